#pragma once

#include "asgd/problems.hpp"
#include "asgd/run_record.hpp"
#include "asgd/scheduler.hpp"
#include "asgd/schedules.hpp"

#include <cstdint>
#include <span>

namespace asgd
{
    /// Deliberate bookkeeping bugs, used to show that the invariant suite catches them.
    enum class Fault
    {
        None,
        OffByOnePrev, // gh and memoized gradients filed under prev(k, m_k) - 1
    };

    struct RunOptions
    {
        std::uint64_t seed = 0;
        Retention retention = Retention::Full;
        bool diagnostics = false;     // memoize every stochastic gradient for virtual-iterate checks
        Iteration metrics_stride = 1; // F gap and |grad F|^2 every stride-th step and at K; 0 disables
        Fault fault = Fault::None;
    };

    /// Asynchronous SGD replayed along `trace`.
    ///
    /// Worker m draws its noise from substream (seed, m) in dispatch order, so the
    /// run is a pure function of (problem, trace, schedule, x0, seed). Gradients are
    /// evaluated lazily at arrival from the stored dispatch iterate.
    /// Throws DivergenceError when |x_k| > 1e12 or x_k is not finite.
    RunRecord run_async(const Problem &problem, const ArrivalTrace &trace, const StepSchedule &schedule,
                        const Vector &x0, const RunOptions &opts = {});

    /// x_r = x_{r-1} - gamma (1/M) sum_m g_m(x_{r-1}), r = 1..R. `round_times` gives
    /// the wall-clock end of each round (defaults to r).
    RunRecord run_minibatch(const Problem &problem, int num_workers, Iteration rounds, double gamma,
                            const Vector &x0, const RunOptions &opts = {},
                            std::span<const double> round_times = {});

    /// M real threads against one lock-protected parameter vector. Each arrival
    /// records the ledger entry and applies the update under the same lock.
    /// Stops after `horizon` arrivals. Not deterministic.
    RunRecord run_live(const Problem &problem, const StepSchedule &schedule, int num_workers, Iteration horizon,
                       const Vector &x0, const RunOptions &opts = {});

    /// The arrival trace realized by an asynchronous run (worker, tau and time per step).
    ArrivalTrace trace_of(const RunRecord &run);
} // namespace asgd
