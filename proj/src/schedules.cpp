#include "asgd/schedules.hpp"

#include "asgd/run_record.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace asgd
{
    namespace
    {
        constexpr double kInf = std::numeric_limits<double>::infinity();

        constexpr std::array<std::pair<ScheduleKind, std::string_view>, 7> kScheduleTags{{
            {ScheduleKind::Constant, "constant"},
            {ScheduleKind::ConstLipschitz, "const-lipschitz"},
            {ScheduleKind::LipschitzSmooth, "lipschitz-smooth"},
            {ScheduleKind::AdaptiveConvex, "adaptive-convex"},
            {ScheduleKind::AdaptiveStronglyConvex, "adaptive-strongly-convex"},
            {ScheduleKind::AdaptiveNonconvex, "adaptive-nonconvex"},
            {ScheduleKind::AdaptiveHeterogeneous, "adaptive-heterogeneous"},
        }};

        constexpr std::array<std::pair<OutputRule, std::string_view>, 6> kOutputTags{{
            {OutputRule::LastIterate, "last"},
            {OutputRule::UniformAverage, "uniform-average"},
            {OutputRule::UniformSample, "uniform-sample"},
            {OutputRule::WeightedAverage, "weighted-average"},
            {OutputRule::StronglyConvexWeighted, "strongly-convex-weighted"},
            {OutputRule::GammaSample, "gamma-sample"},
        }};

        // A branch that is NaN, zero or +inf contributes nothing to the min.
        double branch(double v)
        {
            return (std::isfinite(v) && v > 0) ? v : kInf;
        }

        double ratio(double num, double den)
        {
            if (den == 0.0)
            {
                return kInf;
            }
            return num / den;
        }

        double finite_min(std::initializer_list<double> values, const char *who)
        {
            double out = kInf;
            for (double v : values)
            {
                out = std::min(out, branch(v));
            }
            require(std::isfinite(out), std::string(who) + ": every branch of the stepsize is degenerate");
            return out;
        }

        // sigma-dependent branches
        double noise_branch_convex(const ProblemConstants &c)
        {
            return ratio(c.B, c.sigma * std::sqrt(static_cast<double>(c.K)));
        }

        double noise_branch_nonconvex(const ProblemConstants &c)
        {
            return std::sqrt(ratio(c.Delta, static_cast<double>(c.K) * c.L * c.sigma * c.sigma));
        }

        double noise_branch_strongly_convex(const ProblemConstants &c)
        {
            const double kk = static_cast<double>(c.K);
            const double inner = ratio(c.mu * c.mu * kk * kk * c.B * c.B, c.sigma * c.sigma);
            return 504.0 * std::log(std::exp(1.0) + inner) / (c.mu * kk);
        }
    } // namespace

    std::string_view to_string(ScheduleKind kind)
    {
        for (const auto &[k, tag] : kScheduleTags)
        {
            if (k == kind)
            {
                return tag;
            }
        }
        return "unknown";
    }

    std::optional<ScheduleKind> parse_schedule_kind(std::string_view tag)
    {
        for (const auto &[k, t] : kScheduleTags)
        {
            if (t == tag)
            {
                return k;
            }
        }
        return std::nullopt;
    }

    bool is_adaptive(ScheduleKind kind) noexcept
    {
        switch (kind)
        {
        case ScheduleKind::AdaptiveConvex:
        case ScheduleKind::AdaptiveStronglyConvex:
        case ScheduleKind::AdaptiveNonconvex:
        case ScheduleKind::AdaptiveHeterogeneous:
            return true;
        default:
            return false;
        }
    }

    double adaptive_cap(ScheduleKind kind)
    {
        switch (kind)
        {
        case ScheduleKind::AdaptiveConvex:
        case ScheduleKind::AdaptiveStronglyConvex:
        case ScheduleKind::AdaptiveNonconvex:
            return 0.25;
        case ScheduleKind::AdaptiveHeterogeneous:
            return 0.125;
        default:
            throw ContractViolation("adaptive_cap: not a delay-adaptive schedule");
        }
    }

    StepSchedule::StepSchedule(ScheduleKind kind, ProblemConstants c, double constant_gamma)
        : m_kind(kind), m_c(c), m_constant(constant_gamma)
    {
        const auto name = std::string(to_string(kind));
        require(c.M >= 1 && c.K >= 1, name + ": M and K must be >= 1");
        require(c.L >= 0 && c.mu >= 0 && c.G >= 0 && c.sigma >= 0 && c.B >= 0 && c.Delta >= 0,
                name + ": constants must be nonnegative");
        const double m = c.M;
        const double kk = static_cast<double>(c.K);

        switch (kind)
        {
        case ScheduleKind::Constant:
            require(std::isfinite(constant_gamma) && constant_gamma > 0, "constant: gamma must be > 0");
            break;
        case ScheduleKind::ConstLipschitz:
            require(c.G > 0, name + ": needs G > 0");
            require(c.B > 0, name + ": needs B > 0");
            require(c.K >= c.M, name + ": needs K >= M");
            m_constant = c.B / (c.G * std::sqrt(kk * m));
            break;
        case ScheduleKind::LipschitzSmooth:
            require(c.L > 0, name + ": needs L > 0");
            require(c.G > 0, name + ": needs G > 0");
            require(c.K >= c.M, name + ": needs K >= M");
            m_constant = finite_min({1.0 / (2.0 * m * c.L), noise_branch_nonconvex(c),
                                     std::cbrt(ratio(c.Delta, c.L * c.L * m * m * c.G * c.G * kk))},
                                    "lipschitz-smooth");
            break;
        case ScheduleKind::AdaptiveConvex:
            require(c.L > 0, name + ": needs L > 0");
            require(c.K >= c.M, name + ": needs K >= M");
            m_gamma_max = finite_min({1.0 / (4.0 * m * c.L), noise_branch_convex(c)}, "adaptive-convex");
            break;
        case ScheduleKind::AdaptiveStronglyConvex:
            require(c.L > 0, name + ": needs L > 0");
            require(c.mu > 0, name + ": needs mu > 0");
            require(c.K >= 3 * static_cast<Iteration>(c.M), name + ": needs K >= 3M");
            m_gamma_max = finite_min({1.0 / (8.0 * m * c.L), noise_branch_strongly_convex(c)},
                                     "adaptive-strongly-convex");
            break;
        case ScheduleKind::AdaptiveNonconvex:
            require(c.L > 0, name + ": needs L > 0");
            require(c.K >= c.M, name + ": needs K >= M");
            m_gamma_max = finite_min({1.0 / (2.0 * m * c.L), noise_branch_nonconvex(c)}, "adaptive-nonconvex");
            break;
        case ScheduleKind::AdaptiveHeterogeneous:
            require(c.L > 0, name + ": needs L > 0");
            require(c.K >= c.M, name + ": needs K >= M");
            m_gamma_max = finite_min({1.0 / (4.0 * m * c.L), noise_branch_nonconvex(c)}, "adaptive-heterogeneous");
            break;
        }
    }

    StepSchedule StepSchedule::constant(double gamma, ProblemConstants constants)
    {
        return StepSchedule(ScheduleKind::Constant, constants, gamma);
    }

    double StepSchedule::gamma(Iteration /*k*/, Iteration tau) const
    {
        require(tau >= 1, "gamma: tau must be >= 1");
        const double t = static_cast<double>(tau);
        switch (m_kind)
        {
        case ScheduleKind::Constant:
        case ScheduleKind::ConstLipschitz:
        case ScheduleKind::LipschitzSmooth:
            return m_constant;
        case ScheduleKind::AdaptiveConvex:
        case ScheduleKind::AdaptiveNonconvex:
            return std::min(1.0 / (4.0 * m_c.L * t), m_gamma_max);
        case ScheduleKind::AdaptiveHeterogeneous:
            return std::min(1.0 / (8.0 * m_c.L * t), m_gamma_max);
        case ScheduleKind::AdaptiveStronglyConvex:
        {
            const double decay = std::exp(-m_c.mu * t / (4.0 * m_c.M * m_c.L));
            const double first = decay / (4.0 * m_c.L * t);
            // exp underflows to 0 for astronomically stale gradients; keep gamma > 0.
            return std::min(std::max(first, std::numeric_limits<double>::denorm_min()), m_gamma_max);
        }
        }
        return m_constant;
    }

    double StepSchedule::gamma_max() const
    {
        require(is_adaptive(m_kind), "gamma_max: only defined for delay-adaptive schedules");
        return m_gamma_max;
    }

    // ---------------------------------------------------------------------------

    std::string_view to_string(OutputRule rule)
    {
        for (const auto &[r, tag] : kOutputTags)
        {
            if (r == rule)
            {
                return tag;
            }
        }
        return "unknown";
    }

    std::optional<OutputRule> parse_output_rule(std::string_view tag)
    {
        for (const auto &[r, t] : kOutputTags)
        {
            if (t == tag)
            {
                return r;
            }
        }
        return std::nullopt;
    }

    OutputRule default_output_rule(ScheduleKind kind)
    {
        switch (kind)
        {
        case ScheduleKind::Constant:
            return OutputRule::LastIterate;
        case ScheduleKind::ConstLipschitz:
            return OutputRule::UniformAverage;
        case ScheduleKind::LipschitzSmooth:
            return OutputRule::UniformSample;
        case ScheduleKind::AdaptiveConvex:
            return OutputRule::WeightedAverage;
        case ScheduleKind::AdaptiveStronglyConvex:
            return OutputRule::StronglyConvexWeighted;
        case ScheduleKind::AdaptiveNonconvex:
        case ScheduleKind::AdaptiveHeterogeneous:
            return OutputRule::GammaSample;
        }
        return OutputRule::LastIterate;
    }

    bool is_sampling(OutputRule rule) noexcept
    {
        return rule == OutputRule::UniformSample || rule == OutputRule::GammaSample;
    }

    std::vector<double> output_weights(OutputRule rule, std::span<const double> gh, double mu)
    {
        require(!gh.empty(), "output_weights: empty run");
        const std::size_t n = gh.size();
        std::vector<double> w(n, 0.0);
        switch (rule)
        {
        case OutputRule::LastIterate:
            w.back() = 1.0;
            return w;
        case OutputRule::UniformAverage:
        case OutputRule::UniformSample:
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
            return w;
        case OutputRule::WeightedAverage:
        case OutputRule::GammaSample:
        {
            double total = 0.0;
            for (double g : gh)
            {
                require(g > 0, "output_weights: stepsizes must be positive");
                total += g;
            }
            for (std::size_t i = 0; i < n; ++i)
            {
                w[i] = gh[i] / total;
            }
            return w;
        }
        case OutputRule::StronglyConvexWeighted:
        {
            // log w_k = log gh_k + mu * sum_{j<=k} gh_j
            std::vector<double> logw(n);
            double prefix = 0.0;
            for (std::size_t i = 0; i < n; ++i)
            {
                require(gh[i] > 0, "output_weights: stepsizes must be positive");
                prefix += gh[i];
                logw[i] = std::log(gh[i]) + mu * prefix;
            }
            const double top = *std::max_element(logw.begin(), logw.end());
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i)
            {
                w[i] = std::exp(logw[i] - top);
                total += w[i];
            }
            for (auto &v : w)
            {
                v /= total;
            }
            return w;
        }
        }
        return w;
    }

    Vector select_output(OutputRule rule, const RunRecord &run, double mu, Rng &rng)
    {
        require(run.horizon() >= 1, "select_output: empty run");
        if (rule == OutputRule::LastIterate)
        {
            return run.final_x;
        }
        if (!run.has_history())
        {
            if (rule == OutputRule::WeightedAverage)
            {
                return run.weighted_sum / run.gamma_hat_sum;
            }
            if (rule == OutputRule::UniformAverage)
            {
                return run.iterate_sum / static_cast<double>(run.horizon());
            }
            throw ContractViolation("select_output: rule '" + std::string(to_string(rule)) +
                                    "' needs the full iterate history");
        }
        const auto gh = run.gamma_hat();
        const auto w = output_weights(rule, gh, mu);
        if (is_sampling(rule))
        {
            std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
            return run.iterates[pick(rng) + 1];
        }
        Vector out = Vector::Zero(run.x0.size());
        for (std::size_t i = 0; i < w.size(); ++i)
        {
            out += w[i] * run.iterates[i + 1];
        }
        return out;
    }

    // ---------------------------------------------------------------------------

    namespace
    {
        double sum_of(std::span<const double> v)
        {
            double s = 0.0;
            for (double x : v)
            {
                s += x;
            }
            return s;
        }
    } // namespace

    StepsizeSumCheck check_convex_stepsize_sum(std::span<const double> gh, const ProblemConstants &c)
    {
        const double kk = static_cast<double>(gh.size());
        StepsizeSumCheck out;
        out.lhs = sum_of(gh);
        out.rhs = std::min(kk / (36.0 * c.L * c.M), ratio(c.B * std::sqrt(kk), 3.0 * c.sigma));
        out.holds = out.lhs >= out.rhs;
        return out;
    }

    StepsizeSumCheck check_nonconvex_stepsize_sum(std::span<const double> gh, const ProblemConstants &c)
    {
        const double kk = static_cast<double>(gh.size());
        const double gm = std::min(1.0 / (2.0 * c.M * c.L), branch(noise_branch_nonconvex(c)));
        StepsizeSumCheck out;
        out.lhs = sum_of(gh);
        out.rhs = kk * gm / 9.0;
        out.holds = out.lhs >= out.rhs;
        return out;
    }

    StepsizeSumCheck check_strongly_convex_stepsize_sum(std::span<const double> gh, const ProblemConstants &c)
    {
        const double kk = static_cast<double>(gh.size());
        const double gm = std::min(1.0 / (8.0 * c.M * c.L), branch(noise_branch_strongly_convex(c)));
        // log sum_k gh_k exp(mu * sum_{j<=k} gh_j)
        double prefix = 0.0;
        double top = -kInf;
        std::vector<double> terms;
        terms.reserve(gh.size());
        for (double g : gh)
        {
            prefix += g;
            terms.push_back(std::log(g) + c.mu * prefix);
            top = std::max(top, terms.back());
        }
        double acc = 0.0;
        for (double t : terms)
        {
            acc += std::exp(t - top);
        }
        StepsizeSumCheck out;
        out.lhs = top + std::log(acc);
        out.rhs = std::max(std::log(kk * gm / 42.0), std::log(gm / 7.0) + kk * c.mu * gm / 504.0);
        out.holds = out.lhs >= out.rhs;
        return out;
    }
} // namespace asgd
