#pragma once

#include "asgd/rng.hpp"
#include "asgd/schedules.hpp"
#include "asgd/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace asgd
{
    /// Objective oracle with analytically known constants.
    ///
    /// Oracles are pure given the explicit noise source; callers own the
    /// generators (one per worker, see make_stream).
    class Problem
    {
    public:
        virtual ~Problem() = default;

        virtual std::string name() const = 0;
        virtual int dim() const = 0;

        virtual double value(const Vector &x) const = 0;
        virtual Vector gradient(const Vector &x) const = 0;
        /// Stochastic gradient drawn by `worker`. Homogeneous problems ignore the worker id.
        virtual Vector stochastic_gradient(const Vector &x, WorkerId worker, Rng &noise) const = 0;

        /// grad F_m for heterogeneous problems, grad F otherwise.
        virtual Vector local_gradient(const Vector &x, WorkerId /*worker*/) const { return gradient(x); }

        /// F(x) - F*, or F(x) - (lower bound) when F* is unknown.
        virtual double gap(const Vector &x) const { return value(x) - reference_value(); }

        double L() const noexcept { return m_L; }
        double mu() const noexcept { return m_mu; }
        double G() const noexcept { return m_G; }
        double sigma() const noexcept { return m_sigma; }
        double zeta() const noexcept { return m_zeta; }
        const std::optional<double> &optimum_value() const noexcept { return m_fstar; }
        const std::optional<Vector> &minimizer() const noexcept { return m_xstar; }
        /// F* when known, otherwise the documented lower bound used for gaps.
        double reference_value() const noexcept { return m_fstar.value_or(m_lower_bound); }

        /// Constants for a run from x0 with M workers and horizon K:
        /// B = ||x0 - x*|| (0 when x* is unknown), Delta = F(x0) - reference_value().
        ProblemConstants constants(const Vector &x0, int num_workers, Iteration horizon) const;

    protected:
        double m_L = 0.0;
        double m_mu = 0.0;
        double m_G = 0.0;
        double m_sigma = 0.0;
        double m_zeta = 0.0;
        double m_lower_bound = 0.0;
        std::optional<double> m_fstar;
        std::optional<Vector> m_xstar;
    };

    enum class NoiseMode
    {
        Additive,    // grad F(x) + isotropic Gaussian with E||noise||^2 = sigma^2
        RowSampling, // gradient of one uniformly sampled row
    };

    /// F(x) = (1/2n) ||Ax - b||^2.
    class LeastSquares : public Problem
    {
    public:
        /// `sigma` is the additive noise level; ignored for row sampling, where
        /// sigma is estimated exactly over a probe grid around x*.
        LeastSquares(Matrix a, Vector b, NoiseMode noise, double sigma);

        std::string name() const override { return "least_squares"; }
        int dim() const override { return static_cast<int>(m_a.cols()); }
        double value(const Vector &x) const override;
        Vector gradient(const Vector &x) const override;
        Vector stochastic_gradient(const Vector &x, WorkerId worker, Rng &noise) const override;
        double gap(const Vector &x) const override;

        NoiseMode noise_mode() const noexcept { return m_noise; }
        const Matrix &data() const noexcept { return m_a; }
        const Vector &targets() const noexcept { return m_b; }
        const Matrix &hessian() const noexcept { return m_q; }

        /// Exact E||g(x) - grad F(x)||^2 for row sampling (average over all n rows).
        double row_sampling_variance(const Vector &x) const;

    protected:
        Vector noise_vector(Rng &noise) const;

        Matrix m_a;
        Vector m_b;
        NoiseMode m_noise;
        Matrix m_q; // A^T A / n
        Vector m_c; // A^T b / n
        double m_bb = 0.0;
    };

    struct LeastSquaresOptions
    {
        int dim = 10;
        int samples = 100;
        NoiseMode noise = NoiseMode::Additive;
        double sigma = 1.0;
        // Columns of A are scaled so that the eigenvalue spread of A^T A is
        // roughly this factor (1 = plain Gaussian design).
        double conditioning = 1.0;
        // Nonzero: consistent system b = A (planted * u) with u ~ N(0, I), so
        // x* = planted * u and F* = 0. Zero: b ~ N(0, I).
        double planted = 0.0;
        std::uint64_t seed = 0;
    };

    std::unique_ptr<LeastSquares> least_squares(const LeastSquaresOptions &opts);

    /// Least squares on external data: every CSV row is (features..., target).
    std::unique_ptr<LeastSquares> least_squares_from_csv(const std::string &path, NoiseMode noise, double sigma);

    /// F(x) = (1/n) sum_i rho(a_i^T x - b_i) with rho(t) = t^2 / (1 + t^2).
    ///
    /// rho'(t) = 2t / (1+t^2)^2 peaks at t = 1/sqrt(3) with value 3 sqrt(3) / 8;
    /// rho''(t) = (2 - 6t^2) / (1+t^2)^3 has sup |rho''| = 2 at t = 0 (its
    /// negative extremum is -1/2 at t = +-1). Hence every per-row loss is
    /// G-Lipschitz with G = max_i ||a_i|| 3 sqrt(3) / 8 and L-smooth with
    /// L = 2 max_i ||a_i||^2. Stochastic gradients sample one row, so the
    /// variance is at most E||g||^2 <= G^2 and sigma = G.
    /// F* is unknown; gaps are measured against the lower bound 0.
    class BoundedNonconvex : public Problem
    {
    public:
        BoundedNonconvex(Matrix a, Vector b);

        static double rho(double t);
        static double rho_prime(double t);
        static double rho_second(double t);
        static constexpr double kSupRhoPrime = 0.6495190528383290; // 3 sqrt(3) / 8
        static constexpr double kSupRhoSecond = 2.0;

        std::string name() const override { return "bounded_nonconvex"; }
        int dim() const override { return static_cast<int>(m_a.cols()); }
        double value(const Vector &x) const override;
        Vector gradient(const Vector &x) const override;
        Vector stochastic_gradient(const Vector &x, WorkerId worker, Rng &noise) const override;

        const Matrix &data() const noexcept { return m_a; }
        const Vector &targets() const noexcept { return m_b; }

    private:
        Matrix m_a;
        Vector m_b;
    };

    std::unique_ptr<BoundedNonconvex> bounded_nonconvex(int dim, int samples, std::uint64_t seed);

    /// F_m(x) = LS(x) + c_m^T x with sum_m c_m = 0 and ||c_m|| = zeta, so that
    /// grad F_m(x) - grad F(x) = c_m exactly and F = (1/M) sum F_m = LS.
    /// With zeta = 0 every worker sees exactly the least-squares oracle built
    /// from the same options.
    class HeterogeneousQuadratics : public LeastSquares
    {
    public:
        HeterogeneousQuadratics(Matrix a, Vector b, double sigma, std::vector<Vector> shifts);

        std::string name() const override { return "heterogeneous_quadratics"; }
        Vector stochastic_gradient(const Vector &x, WorkerId worker, Rng &noise) const override;
        Vector local_gradient(const Vector &x, WorkerId worker) const override;

        int num_workers() const noexcept { return static_cast<int>(m_shifts.size()); }
        const Vector &shift(WorkerId worker) const;

    private:
        std::vector<Vector> m_shifts;
    };

    /// Shared least-squares core from `opts` (additive noise), M per-worker shifts of norm zeta.
    std::unique_ptr<HeterogeneousQuadratics> heterogeneous_quadratics(const LeastSquaresOptions &opts,
                                                                      int num_workers, double zeta);
} // namespace asgd
