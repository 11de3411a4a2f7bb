#pragma once

#include "asgd/run_record.hpp"
#include "asgd/scheduler.hpp"
#include "asgd/schedules.hpp"

#include <vector>

namespace asgd
{
    /// The virtual sequence x^_1..x^_K of a completed run and the per-step
    /// discrepancy between e_k = x_k - x^_k and its in-flight reconstruction.
    struct VirtualTrack
    {
        std::vector<Vector> xhat;         // x^_1..x^_K
        std::vector<double> residual;     // |e_k - rec_k| / (1 + |e_k|)
        std::vector<double> error_norm;   // |e_k|
        std::vector<int> terms;           // number of in-flight gradients summed into rec_k
        std::vector<double> gamma_hat;    // gh_1..gh_K, derived from the trace alone
        std::vector<double> initial_gamma_hat;
        // Steps whose gh recorded by the optimizer differs from the trace-derived value.
        std::int64_t gamma_hat_mismatches = 0;
    };

    /// Rebuilds x^ from the memoized gradients of `run`. prev/next and gh are
    /// recomputed from the worker order of `trace` and the stepsizes the run
    /// applied; gradients that never arrive get gamma(K, max{1, K - prev}).
    /// Requires Retention::Full and diagnostics.
    VirtualTrack track(const RunRecord &run, const ArrivalTrace &trace, const StepSchedule &schedule);

    /// max_k residual; +inf if any residual is NaN.
    double check_virtual_identity(const VirtualTrack &vt);

    /// max_k |e_k|.
    double max_error_norm(const VirtualTrack &vt);
} // namespace asgd
