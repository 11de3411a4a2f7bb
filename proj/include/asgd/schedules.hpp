#pragma once

#include "asgd/rng.hpp"
#include "asgd/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace asgd
{
    struct RunRecord;

    /// Problem and run constants consumed by the stepsize rules.
    struct ProblemConstants
    {
        double L = 0.0;     // gradient Lipschitz constant
        double mu = 0.0;    // strong-convexity modulus, 0 if merely convex
        double G = 0.0;     // loss Lipschitz bound, 0 if unavailable
        double sigma = 0.0; // gradient-noise standard deviation bound
        double B = 0.0;     // ||x0 - x*||
        double Delta = 0.0; // F(x0) - F*
        int M = 1;
        Iteration K = 1;
    };

    enum class ScheduleKind
    {
        Constant,               // fixed user-supplied gamma (grid-tuned baselines)
        ConstLipschitz,         // B / (G sqrt(KM))
        LipschitzSmooth,        // min{1/(2ML), sqrt(Delta/(L sigma^2 K)), (Delta/(L^2 M^2 G^2 K))^(1/3)}
        AdaptiveConvex,         // min{1/(4L tau), 1/(4ML), B/(sigma sqrt K)}
        AdaptiveStronglyConvex, // min{exp(-mu tau/(4ML))/(4L tau), 1/(8ML), 504 ln(e + mu^2 K^2 B^2/sigma^2)/(mu K)}
        AdaptiveNonconvex,      // min{1/(4L tau), 1/(2ML), sqrt(Delta/(K L sigma^2))}
        AdaptiveHeterogeneous,  // min{1/(8L tau), 1/(4ML), sqrt(Delta/(K L sigma^2))}
    };

    std::string_view to_string(ScheduleKind kind);
    /// Parses tags such as "adaptive-convex"; std::nullopt for unknown tags.
    std::optional<ScheduleKind> parse_schedule_kind(std::string_view tag);

    bool is_adaptive(ScheduleKind kind) noexcept;

    /// Numerator c in the delay-adaptive cap gamma_k <= c / (L tau(k)).
    double adaptive_cap(ScheduleKind kind);

    /// A stepsize rule bound to its constants.
    ///
    /// Branches of a min whose formula divides by zero (sigma = 0) or vanishes
    /// (B = 0, Delta = 0) are dropped, matching the limit of the formula.
    class StepSchedule
    {
    public:
        StepSchedule(ScheduleKind kind, ProblemConstants constants, double constant_gamma = 0.0);

        static StepSchedule constant(double gamma, ProblemConstants constants = {});

        ScheduleKind kind() const noexcept { return m_kind; }
        const ProblemConstants &constants() const noexcept { return m_c; }

        /// Stepsize for the update at iteration k whose gradient has delay tau.
        double gamma(Iteration k, Iteration tau) const;

        /// The tau-independent part of the adaptive rules (gamma_max in the
        /// stepsize-sum lower bounds). Throws for non-adaptive kinds.
        double gamma_max() const;

    private:
        ScheduleKind m_kind;
        ProblemConstants m_c;
        double m_constant = 0.0;
        double m_gamma_max = 0.0;
    };

    // Output selection ---------------------------------------------------------

    enum class OutputRule
    {
        LastIterate,
        UniformAverage,       // (1/K) sum x_k
        UniformSample,        // k uniform on [K]
        WeightedAverage,      // sum gh_k x_k / sum gh_k
        StronglyConvexWeighted, // weights gh_k * exp(mu sum_{j<=k} gh_j)
        GammaSample,          // P(k) proportional to gh_k
    };

    std::string_view to_string(OutputRule rule);
    std::optional<OutputRule> parse_output_rule(std::string_view tag);

    /// The output rule that accompanies each schedule's guarantee.
    OutputRule default_output_rule(ScheduleKind kind);

    bool is_sampling(OutputRule rule) noexcept;

    /// Normalized output weights over x_1..x_K for the averaging and sampling
    /// rules; `mu` is only used by StronglyConvexWeighted. Weights are formed
    /// in log space so exp(mu * sum gh) cannot overflow.
    std::vector<double> output_weights(OutputRule rule, std::span<const double> gamma_hat, double mu);

    /// The returned point x~_K. Averaging rules use the running sums when the
    /// run kept no iterate history.
    Vector select_output(OutputRule rule, const RunRecord &run, double mu, Rng &rng);

    // Stepsize-sum lower bounds (checked per trace) ---------------------------

    struct StepsizeSumCheck
    {
        bool holds = true;
        double lhs = 0.0; // log-space for the strongly convex bound
        double rhs = 0.0;
    };

    /// sum gh_k >= min{K/(36LM), B sqrt(K)/(3 sigma)}.
    StepsizeSumCheck check_convex_stepsize_sum(std::span<const double> gamma_hat, const ProblemConstants &c);
    /// sum gh_k >= K gamma_max / 9, gamma_max = min{1/(2ML), sqrt(Delta/(K L sigma^2))}.
    StepsizeSumCheck check_nonconvex_stepsize_sum(std::span<const double> gamma_hat, const ProblemConstants &c);
    /// sum gh_k P_k >= max{K gm/42, (gm/7) exp(K mu gm / 504)} for K >= 3M. Compared as logarithms.
    StepsizeSumCheck check_strongly_convex_stepsize_sum(std::span<const double> gamma_hat, const ProblemConstants &c);
} // namespace asgd
