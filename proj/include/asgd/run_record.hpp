#pragma once

#include "asgd/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace asgd
{
    /// One update. For minibatch runs k is the round, worker is -1 and tau is 0.
    struct StepRow
    {
        Iteration k = 0;
        WorkerId worker = 0;
        Iteration prev = 0;
        Iteration tau = 0;
        double gamma = 0.0;     // stepsize used at iteration k
        double gamma_hat = 0.0; // stepsize that eventually multiplies the gradient taken at x_k
        double time = 0.0;
        double fgap = 0.0;      // F(x_k) - F*, NaN when skipped by the metrics stride
        double gradnorm2 = 0.0; // ||grad F(x_k)||^2
    };

    enum class Retention
    {
        Full,        // keep x_0..x_K
        MetricsOnly, // keep per-step rows and running sums only
    };

    /// Everything recorded about one optimization run.
    struct RunRecord
    {
        int num_workers = 1;
        bool minibatch = false;
        Vector x0;
        Vector final_x;
        std::vector<StepRow> rows;

        // gh for the M gradients taken at x_0 (indexed by worker).
        std::vector<double> initial_gamma_hat;

        // x_0..x_K when Retention::Full.
        std::vector<Vector> iterates;

        // Running sums over k = 1..K, accumulated when gh_k becomes known.
        Vector weighted_sum; // sum gh_k x_k
        Vector iterate_sum;  // sum x_k
        double gamma_hat_sum = 0.0;

        // Memoized stochastic gradients, recorded when diagnostics are on:
        // initial_gradients[m] was taken at x_0 by worker m, gradients[k-1] at x_k by m_k.
        std::vector<Vector> initial_gradients;
        std::vector<Vector> gradients;

        // |e_k - reconstruction| / (1 + |e_k|), filled in by virtual-iterate tracking.
        std::vector<double> vres;

        std::int64_t gradients_consumed = 0;
        std::int64_t gradients_in_flight = 0;

        Iteration horizon() const noexcept { return static_cast<Iteration>(rows.size()); }
        bool has_history() const noexcept { return !iterates.empty(); }
        bool has_gradients() const noexcept { return !gradients.empty() || !initial_gradients.empty(); }
        std::vector<double> gamma_hat() const;
    };

    /// CSV columns k,worker,tau,gamma,gamma_hat,time,fgap,gradnorm2 (+ vres when present).
    void write_run_csv(std::ostream &out, const RunRecord &run);
} // namespace asgd
