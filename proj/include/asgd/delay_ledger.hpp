#pragma once

#include "asgd/types.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace asgd
{
    /// One processed arrival: at iteration k, worker m_k delivered the gradient
    /// it was dispatched with at iteration prev(k, m_k).
    struct LedgerEntry
    {
        Iteration k = 0;
        WorkerId worker = 0;
        Iteration prev = 0;

        Iteration tau() const noexcept { return k - prev; }

        friend bool operator==(const LedgerEntry &, const LedgerEntry &) = default;
    };

    struct Arrival
    {
        Iteration k = 0;
        Iteration tau = 0;
        Iteration prev = 0;
    };

    /// Delay bookkeeping for M workers.
    ///
    /// Every worker starts with a gradient dispatched at iteration 0. Each
    /// record_arrival() consumes the in-flight gradient of one worker, assigns
    /// it the next iteration index k and re-dispatches that worker at k. The
    /// ledger never models time; the scheduler or a live executor drives it.
    ///
    /// Single writer. Concurrent callers must serialize record_arrival() under
    /// the same lock that protects the parameter update.
    class DelayLedger
    {
    public:
        explicit DelayLedger(int num_workers);

        int num_workers() const noexcept { return static_cast<int>(m_dispatch.size()); }
        Iteration arrivals() const noexcept { return m_count; }

        Arrival record_arrival(WorkerId worker);

        /// Iteration at which the worker's in-flight gradient was dispatched.
        Iteration dispatch_iter(WorkerId worker) const;

        /// tau(k, m) = k - prev(k, m), the age at iteration k of worker m's in-flight gradient.
        /// Only meaningful for k > arrivals(), i.e. before the next arrival is consumed.
        Iteration tau_of_inflight(WorkerId worker, Iteration k) const;

        /// Boundary delay max{1, K - prev} for a gradient still in flight when the run stops at K.
        Iteration tau_terminal(WorkerId worker, Iteration horizon) const;

        std::span<const LedgerEntry> history() const noexcept { return m_history; }

        /// Trace export: header "k,worker,prev,tau", LF line endings.
        void write_csv(std::ostream &out) const;

    private:
        void check_worker(WorkerId worker) const;

        std::vector<Iteration> m_dispatch;
        Iteration m_count = 0;
        std::vector<LedgerEntry> m_history;
    };

    /// Worst case of the delay-budget inequality over every prefix K of a history:
    ///   sum_{k<K} tau(k) + sum_m tau(K, m) <= K * M.
    struct DelayBudgetReport
    {
        bool holds = true;
        Iteration worst_prefix = 0;
        // min over prefixes of K*M - lhs; never negative when holds.
        std::int64_t min_slack = 0;
    };

    DelayBudgetReport check_delay_budget(std::span<const LedgerEntry> history, int num_workers);

    /// Count of arrivals with tau(k) > 3M against the bound min{K/3, max{K-3M, 0}}, for every prefix.
    struct LargeDelayReport
    {
        bool holds = true;
        Iteration worst_prefix = 0;
        std::int64_t large_count = 0;
    };

    LargeDelayReport check_large_delay_fraction(std::span<const LedgerEntry> history, int num_workers);
} // namespace asgd
