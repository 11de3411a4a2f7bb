#pragma once

#include "asgd/delay_ledger.hpp"
#include "asgd/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace asgd
{
    // Compute-time models --------------------------------------------------

    /// Worker m always needs exactly seconds[m].
    struct FixedSpeeds
    {
        std::vector<double> seconds;
    };

    enum class ComputeDistribution
    {
        Exponential,
        LogNormal,
    };

    /// Independent per-gradient compute times. For LogNormal, `mean` is the
    /// mean of the time itself and `sigma` the standard deviation of log(time).
    struct RandomSpeeds
    {
        ComputeDistribution distribution = ComputeDistribution::Exponential;
        std::vector<double> mean;
        double sigma = 0.5;
    };

    /// num_workers identical workers except `straggler`, which is `slowdown` times slower.
    struct StragglerSpeeds
    {
        int num_workers = 1;
        double base_seconds = 1.0;
        int straggler = 0;
        double slowdown = 10.0;
    };

    struct SpeedModel
    {
        std::variant<FixedSpeeds, RandomSpeeds, StragglerSpeeds> kind;
        std::uint64_t seed = 0;

        int num_workers() const;
        bool deterministic() const noexcept { return !std::holds_alternative<RandomSpeeds>(kind); }
        /// Per-worker seconds for deterministic models.
        std::vector<double> fixed_seconds() const;
        void validate() const;
    };

    // Traces ---------------------------------------------------------------

    struct TraceEntry
    {
        Iteration k = 0;
        WorkerId worker = 0;
        Iteration tau = 0;
        double time = 0.0;

        friend bool operator==(const TraceEntry &, const TraceEntry &) = default;
    };

    /// Arrival order m_1..m_K with delays and wall-clock timestamps.
    struct ArrivalTrace
    {
        int num_workers = 1;
        std::vector<TraceEntry> entries;
        std::optional<SpeedModel> model;

        Iteration horizon() const noexcept { return static_cast<Iteration>(entries.size()); }
        std::vector<WorkerId> order() const;

        /// Replays the worker order through a fresh DelayLedger.
        DelayLedger replay() const;
        /// k strictly increasing from 1, times non-decreasing, tau matching a ledger replay.
        void validate() const;
    };

    /// Event-queue simulation of dispatch and arrival. Ties in finish
    /// time go to the lowest worker index; times are compared exactly.
    ArrivalTrace simulate_trace(const SpeedModel &model, Iteration horizon);

    /// Same as simulate_trace, but stops after the last arrival with time <= seconds.
    ArrivalTrace simulate_until(const SpeedModel &model, double seconds);

    /// Trace from an explicit arrival order (adversarial or hand-written patterns).
    /// Timestamps are k, one unit per arrival.
    ArrivalTrace trace_from_order(std::span<const WorkerId> order, int num_workers);

    /// Synchronous rounds under the same model: every round waits for all M
    /// workers. Returns the cumulative wall-clock time at the end of each
    /// round, for as many rounds as fit into `seconds`.
    std::vector<double> simulate_sync_rounds(const SpeedModel &model, double seconds);

    // Closed-form runtime model ----------------------------------------------

    struct StepCounts
    {
        std::int64_t async_steps = 0;
        std::int64_t minibatch_steps = 0;
    };

    /// K_async = sum_m floor(S / s_m), K_mini = min_m floor(S / s_m).
    StepCounts steps_in_time(std::span<const double> seconds, double budget);

    /// (1/M) sum_m s_max / s_m; always >= 1.
    double speedup_factor(std::span<const double> seconds);

    /// CSV with header "k,worker,tau,time".
    void write_trace_csv(std::ostream &out, const ArrivalTrace &trace);
    ArrivalTrace read_trace_csv(std::istream &in, int num_workers);
} // namespace asgd
