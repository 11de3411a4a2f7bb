#include "asgd/problems.hpp"

#include "asgd/csv.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace asgd
{
    ProblemConstants Problem::constants(const Vector &x0, int num_workers, Iteration horizon) const
    {
        require(x0.size() == dim(), "constants: x0 has the wrong dimension");
        ProblemConstants c;
        c.L = m_L;
        c.mu = m_mu;
        c.G = m_G;
        c.sigma = m_sigma;
        c.B = m_xstar ? (x0 - *m_xstar).norm() : 0.0;
        c.Delta = std::max(0.0, gap(x0));
        c.M = num_workers;
        c.K = horizon;
        return c;
    }

    // Least squares ---------------------------------------------------------------

    LeastSquares::LeastSquares(Matrix a, Vector b, NoiseMode noise, double sigma)
        : m_a(std::move(a)), m_b(std::move(b)), m_noise(noise)
    {
        require(m_a.rows() >= 1 && m_a.cols() >= 1, "least_squares: empty data");
        require(m_a.rows() == m_b.size(), "least_squares: A and b disagree on the number of samples");
        require(sigma >= 0, "least_squares: sigma must be >= 0");
        const double n = static_cast<double>(m_a.rows());
        m_q = (m_a.transpose() * m_a) / n;
        m_c = (m_a.transpose() * m_b) / n;
        m_bb = m_b.squaredNorm() / (2.0 * n);

        Eigen::SelfAdjointEigenSolver<Matrix> eig(m_q, Eigen::EigenvaluesOnly);
        const auto &ev = eig.eigenvalues();
        m_L = ev.maxCoeff();
        const double lo = ev.minCoeff();
        // Numerically singular A^T A has no strong convexity.
        m_mu = lo > 1e-12 * std::max(m_L, 1.0) ? lo : 0.0;

        Vector xstar = m_a.completeOrthogonalDecomposition().solve(m_b);
        m_xstar = xstar;
        m_fstar = value(xstar);

        if (m_noise == NoiseMode::Additive)
        {
            m_sigma = sigma;
        }
        else
        {
            // Probe grid: x*, the origin, and points around x* at growing radii.
            Rng probe_rng = make_stream(0x5eed, StreamKind::ProblemData, 99);
            std::normal_distribution<double> normal(0.0, 1.0);
            const double radius = std::max(1.0, xstar.norm());
            double worst = std::max(row_sampling_variance(xstar), row_sampling_variance(Vector::Zero(dim())));
            for (double scale : {0.25, 0.5, 1.0, 2.0})
            {
                for (int rep = 0; rep < 4; ++rep)
                {
                    Vector dir(dim());
                    for (auto &v : dir)
                    {
                        v = normal(probe_rng);
                    }
                    dir.normalize();
                    worst = std::max(worst, row_sampling_variance(xstar + scale * radius * dir));
                }
            }
            m_sigma = std::sqrt(worst);
        }
    }

    double LeastSquares::value(const Vector &x) const
    {
        return 0.5 * x.dot(m_q * x) - m_c.dot(x) + m_bb;
    }

    Vector LeastSquares::gradient(const Vector &x) const
    {
        return m_q * x - m_c;
    }

    double LeastSquares::gap(const Vector &x) const
    {
        // Exact for quadratics: c lies in the range of A^T A, so Q x* = c.
        const Vector d = x - *m_xstar;
        return 0.5 * d.dot(m_q * d);
    }

    Vector LeastSquares::noise_vector(Rng &noise) const
    {
        Vector out(dim());
        if (m_sigma == 0.0)
        {
            out.setZero();
            return out;
        }
        std::normal_distribution<double> normal(0.0, m_sigma / std::sqrt(static_cast<double>(dim())));
        for (auto &v : out)
        {
            v = normal(noise);
        }
        return out;
    }

    Vector LeastSquares::stochastic_gradient(const Vector &x, WorkerId /*worker*/, Rng &noise) const
    {
        if (m_noise == NoiseMode::RowSampling)
        {
            std::uniform_int_distribution<Eigen::Index> pick(0, m_a.rows() - 1);
            const auto i = pick(noise);
            const double r = m_a.row(i).dot(x) - m_b(i);
            return r * m_a.row(i).transpose();
        }
        Vector g = gradient(x);
        g += noise_vector(noise);
        return g;
    }

    double LeastSquares::row_sampling_variance(const Vector &x) const
    {
        const Vector residual = m_a * x - m_b;
        const double n = static_cast<double>(m_a.rows());
        double second_moment = 0.0;
        for (Eigen::Index i = 0; i < m_a.rows(); ++i)
        {
            second_moment += residual(i) * residual(i) * m_a.row(i).squaredNorm();
        }
        second_moment /= n;
        return std::max(0.0, second_moment - gradient(x).squaredNorm());
    }

    namespace
    {
        std::pair<Matrix, Vector> generate_least_squares_data(const LeastSquaresOptions &opts)
        {
            require(opts.dim >= 1, "least_squares: dim must be >= 1");
            require(opts.samples >= 1, "least_squares: samples must be >= 1");
            require(opts.conditioning >= 1.0, "least_squares: conditioning must be >= 1");
            require(std::isfinite(opts.planted), "least_squares: planted scale must be finite");
            Rng rng = make_stream(opts.seed, StreamKind::ProblemData, 0);
            std::normal_distribution<double> normal(0.0, 1.0);
            Matrix a(opts.samples, opts.dim);
            for (Eigen::Index i = 0; i < a.rows(); ++i)
            {
                for (Eigen::Index j = 0; j < a.cols(); ++j)
                {
                    a(i, j) = normal(rng);
                }
            }
            Vector b(opts.samples);
            for (auto &v : b)
            {
                v = normal(rng);
            }
            if (opts.conditioning > 1.0 && opts.dim > 1)
            {
                // Log-spaced column scales; eigenvalues scale with the square.
                for (Eigen::Index j = 0; j < a.cols(); ++j)
                {
                    const double t = static_cast<double>(j) / static_cast<double>(opts.dim - 1);
                    a.col(j) *= std::pow(opts.conditioning, -0.5 * t);
                }
            }
            if (opts.planted != 0.0)
            {
                Vector u(opts.dim);
                for (auto &v : u)
                {
                    v = normal(rng);
                }
                b = opts.planted * (a * u);
            }
            return {std::move(a), std::move(b)};
        }
    } // namespace

    std::unique_ptr<LeastSquares> least_squares(const LeastSquaresOptions &opts)
    {
        auto [a, b] = generate_least_squares_data(opts);
        return std::make_unique<LeastSquares>(std::move(a), std::move(b), opts.noise, opts.sigma);
    }

    std::unique_ptr<LeastSquares> least_squares_from_csv(const std::string &path, NoiseMode noise, double sigma)
    {
        const auto rows = csv::read_matrix(path);
        require(!rows.empty(), "least_squares_from_csv: no data rows in " + path);
        require(rows.front().size() >= 2, "least_squares_from_csv: need at least one feature and a target");
        const auto n = static_cast<Eigen::Index>(rows.size());
        const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
        Matrix a(n, d);
        Vector b(n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const auto &row = rows[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < d; ++j)
            {
                a(i, j) = row[static_cast<std::size_t>(j)];
            }
            b(i) = row.back();
        }
        return std::make_unique<LeastSquares>(std::move(a), std::move(b), noise, sigma);
    }

    // Bounded non-convex -------------------------------------------------------------

    double BoundedNonconvex::rho(double t)
    {
        const double t2 = t * t;
        return t2 / (1.0 + t2);
    }

    double BoundedNonconvex::rho_prime(double t)
    {
        const double s = 1.0 + t * t;
        return 2.0 * t / (s * s);
    }

    double BoundedNonconvex::rho_second(double t)
    {
        const double s = 1.0 + t * t;
        return (2.0 - 6.0 * t * t) / (s * s * s);
    }

    BoundedNonconvex::BoundedNonconvex(Matrix a, Vector b) : m_a(std::move(a)), m_b(std::move(b))
    {
        require(m_a.rows() >= 1 && m_a.cols() >= 1, "bounded_nonconvex: empty data");
        require(m_a.rows() == m_b.size(), "bounded_nonconvex: A and b disagree on the number of samples");
        const double max_row = m_a.rowwise().norm().maxCoeff();
        m_G = max_row * kSupRhoPrime;
        m_L = max_row * max_row * kSupRhoSecond;
        m_sigma = m_G;
        m_lower_bound = 0.0;
    }

    double BoundedNonconvex::value(const Vector &x) const
    {
        const Vector r = m_a * x - m_b;
        double s = 0.0;
        for (double t : r)
        {
            s += rho(t);
        }
        return s / static_cast<double>(m_a.rows());
    }

    Vector BoundedNonconvex::gradient(const Vector &x) const
    {
        Vector r = m_a * x - m_b;
        for (auto &t : r)
        {
            t = rho_prime(t);
        }
        return (m_a.transpose() * r) / static_cast<double>(m_a.rows());
    }

    Vector BoundedNonconvex::stochastic_gradient(const Vector &x, WorkerId /*worker*/, Rng &noise) const
    {
        std::uniform_int_distribution<Eigen::Index> pick(0, m_a.rows() - 1);
        const auto i = pick(noise);
        const double r = m_a.row(i).dot(x) - m_b(i);
        return rho_prime(r) * m_a.row(i).transpose();
    }

    std::unique_ptr<BoundedNonconvex> bounded_nonconvex(int dim, int samples, std::uint64_t seed)
    {
        require(dim >= 1 && samples >= 1, "bounded_nonconvex: dim and samples must be >= 1");
        Rng rng = make_stream(seed, StreamKind::ProblemData, 2);
        std::normal_distribution<double> row_entry(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
        std::normal_distribution<double> target(0.0, 2.0);
        Matrix a(samples, dim);
        for (Eigen::Index i = 0; i < a.rows(); ++i)
        {
            for (Eigen::Index j = 0; j < a.cols(); ++j)
            {
                a(i, j) = row_entry(rng);
            }
        }
        Vector b(samples);
        for (auto &v : b)
        {
            v = target(rng);
        }
        return std::make_unique<BoundedNonconvex>(std::move(a), std::move(b));
    }

    // Heterogeneous quadratics ----------------------------------------------------------

    HeterogeneousQuadratics::HeterogeneousQuadratics(Matrix a, Vector b, double sigma, std::vector<Vector> shifts)
        : LeastSquares(std::move(a), std::move(b), NoiseMode::Additive, sigma), m_shifts(std::move(shifts))
    {
        require(!m_shifts.empty(), "heterogeneous_quadratics: need at least one worker");
        double zeta = 0.0;
        for (const auto &c : m_shifts)
        {
            require(c.size() == dim(), "heterogeneous_quadratics: shift has the wrong dimension");
            zeta = std::max(zeta, c.norm());
        }
        m_zeta = zeta;
    }

    const Vector &HeterogeneousQuadratics::shift(WorkerId worker) const
    {
        require(worker >= 0 && worker < num_workers(), "heterogeneous_quadratics: unknown worker");
        return m_shifts[static_cast<std::size_t>(worker)];
    }

    Vector HeterogeneousQuadratics::local_gradient(const Vector &x, WorkerId worker) const
    {
        Vector g = gradient(x);
        g += shift(worker);
        return g;
    }

    Vector HeterogeneousQuadratics::stochastic_gradient(const Vector &x, WorkerId worker, Rng &noise) const
    {
        Vector g = local_gradient(x, worker);
        g += noise_vector(noise);
        return g;
    }

    std::unique_ptr<HeterogeneousQuadratics> heterogeneous_quadratics(const LeastSquaresOptions &opts,
                                                                      int num_workers, double zeta)
    {
        require(num_workers >= 1, "heterogeneous_quadratics: M must be >= 1");
        require(zeta >= 0 && std::isfinite(zeta), "heterogeneous_quadratics: zeta must be >= 0");
        require(zeta == 0.0 || num_workers >= 2,
                "heterogeneous_quadratics: a single worker cannot have a nonzero shift summing to zero");
        require(zeta == 0.0 || num_workers % 2 == 0 || opts.dim >= 2,
                "heterogeneous_quadratics: odd M with zeta > 0 needs dim >= 2");

        auto [a, b] = generate_least_squares_data(opts);
        const auto d = static_cast<Eigen::Index>(opts.dim);
        std::vector<Vector> shifts(static_cast<std::size_t>(num_workers), Vector::Zero(d));
        if (zeta > 0.0)
        {
            Rng rng = make_stream(opts.seed, StreamKind::ProblemData, 1);
            std::normal_distribution<double> normal(0.0, 1.0);
            auto random_unit = [&] {
                Vector u(d);
                for (auto &v : u)
                {
                    v = normal(rng);
                }
                return Vector(u / u.norm());
            };

            std::size_t next = 0;
            if (num_workers % 2 == 1)
            {
                // Three vectors at 120 degrees in a random plane; the third is
                // -(c0 + c1) so that the sum cancels exactly.
                const Vector u = random_unit();
                Vector v = random_unit();
                v -= v.dot(u) * u;
                v.normalize();
                shifts[0] = zeta * u;
                shifts[1] = zeta * (-0.5 * u + (std::sqrt(3.0) / 2.0) * v);
                shifts[2] = -(shifts[0] + shifts[1]);
                next = 3;
            }
            for (; next < shifts.size(); next += 2)
            {
                const Vector u = random_unit();
                shifts[next] = zeta * u;
                shifts[next + 1] = -shifts[next];
            }
        }
        return std::make_unique<HeterogeneousQuadratics>(std::move(a), std::move(b), opts.sigma, std::move(shifts));
    }
} // namespace asgd
