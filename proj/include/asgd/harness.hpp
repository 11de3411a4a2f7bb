#pragma once

#include "asgd/config.hpp"
#include "asgd/optimizers.hpp"
#include "asgd/virtual_iterates.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace asgd
{
    inline constexpr int kSummarySchema = 1;
    inline constexpr double kIdentityTolerance = 1e-10;

    // Building blocks shared by the commands and the tests --------------------------

    std::unique_ptr<Problem> make_problem(const ProblemConfig &cfg, int num_workers);
    Vector initial_point(const RunConfig &cfg, const Problem &problem);

    /// Repetition r uses seed + r for gradient noise and shifts random compute
    /// times by the same amount.
    std::uint64_t repetition_seed(const RunConfig &cfg, int repetition);

    /// Horizon K if given, else every arrival up to S seconds.
    ArrivalTrace make_trace(const SpeedConfig &cfg, std::optional<Iteration> horizon, std::optional<double> duration,
                            std::uint64_t seed_shift);

    StepSchedule make_schedule(const ScheduleConfig &cfg, const Problem &problem, const Vector &x0, int num_workers,
                               Iteration horizon);

    struct OutputMetrics
    {
        double final_gap = 0.0;
        double final_gradnorm2 = 0.0;
        double output_gap = 0.0;       // at the rule's output; expectation for sampling rules
        double output_gradnorm2 = 0.0;
    };

    /// Metrics of the rule's output x~_K. Sampling rules report the exact
    /// expectation over the sampling distribution rather than one draw.
    OutputMetrics evaluate_output(const RunRecord &run, const Problem &problem, OutputRule rule, double mu);

    // Commands ------------------------------------------------------------------------

    struct CommandResult
    {
        int exit_code = 0; // 0 ok, 1 invariant failure
        nlohmann::json summary;
    };

    /// One run per schedule and repetition; per-run CSV plus <prefix>_summary.json.
    CommandResult cmd_simulate(const RunConfig &cfg);

    struct CompareReport
    {
        std::vector<double> seconds;
        double budget = 0.0;
        StepCounts predicted;               // closed-form step counts
        Iteration async_steps_simulated = 0; // arrivals with time <= S in the event simulation
        double speedup = 0.0;               // (1/M) sum s_max / s_m
        double step_ratio = 0.0;            // K_async / (M K_mini)
        bool degenerate = false;            // one of the methods takes no step
        double async_final_gap = 0.0;
        double async_output_gap = 0.0;
        double minibatch_final_gap = 0.0;
        double minibatch_gamma = 0.0; // best of the grid
        double error_ratio = 0.0;     // minibatch_final_gap / async_final_gap
    };

    /// Async (first schedule) against tuned minibatch SGD at equal wall-clock S.
    /// Needs a deterministic speed model; metrics are averaged over repetitions.
    CompareReport compare(const RunConfig &cfg);
    nlohmann::json to_json(const CompareReport &report);
    CommandResult cmd_compare(const RunConfig &cfg);

    /// Repetitions x schedules x sweep_K in parallel; <prefix>_sweep_raw.csv and
    /// <prefix>_sweep_summary.csv (mean and standard error over seeds).
    CommandResult cmd_sweep(const RunConfig &cfg);

    /// Real threads; requires K.
    CommandResult cmd_live(const RunConfig &cfg);

    // Invariant suite -------------------------------------------------------------------

    struct CheckOptions
    {
        int seeds = 5;
        std::uint64_t base_seed = 0;
        std::vector<int> workers{1, 2, 5, 16};
        std::vector<Iteration> horizons{50, 500};
        Fault fault = Fault::None;
    };

    struct InvariantTally
    {
        std::string name;
        std::int64_t checked = 0;
        std::int64_t failed = 0;
        double worst = 0.0; // largest violation measure seen (residual, ratio, ...)
        std::string first_failure;

        bool passed() const noexcept { return failed == 0 && checked > 0; }
    };

    struct CheckReport
    {
        std::vector<InvariantTally> invariants;
        std::int64_t configurations = 0;
        double seconds = 0.0;

        bool passed() const;
        const InvariantTally &at(const std::string &name) const;
    };

    /// Every adaptive schedule on every speed model (fixed, exponential,
    /// lognormal, straggler, adversarial order) for each M, K and seed.
    CheckReport run_check(const CheckOptions &opts);
    nlohmann::json to_json(const CheckReport &report);
} // namespace asgd
