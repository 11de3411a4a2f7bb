#include "asgd/delay_ledger.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <string>

namespace asgd
{
    DelayLedger::DelayLedger(int num_workers)
    {
        require(num_workers >= 1, "DelayLedger: need at least one worker");
        m_dispatch.assign(static_cast<std::size_t>(num_workers), 0);
    }

    void DelayLedger::check_worker(WorkerId worker) const
    {
        if (worker < 0 || worker >= num_workers())
        {
            throw ContractViolation("DelayLedger: unknown worker id " + std::to_string(worker) +
                                    " (M = " + std::to_string(num_workers()) + ")");
        }
    }

    Arrival DelayLedger::record_arrival(WorkerId worker)
    {
        check_worker(worker);
        auto &slot = m_dispatch[static_cast<std::size_t>(worker)];
        const Iteration k = ++m_count;
        const Iteration prev = slot;
        m_history.push_back(LedgerEntry{k, worker, prev});
        slot = k;
        return Arrival{k, k - prev, prev};
    }

    Iteration DelayLedger::dispatch_iter(WorkerId worker) const
    {
        check_worker(worker);
        return m_dispatch[static_cast<std::size_t>(worker)];
    }

    Iteration DelayLedger::tau_of_inflight(WorkerId worker, Iteration k) const
    {
        require(k >= 1, "tau_of_inflight: k must be >= 1");
        return k - dispatch_iter(worker);
    }

    Iteration DelayLedger::tau_terminal(WorkerId worker, Iteration horizon) const
    {
        return std::max<Iteration>(1, horizon - dispatch_iter(worker));
    }

    void DelayLedger::write_csv(std::ostream &out) const
    {
        out << "k,worker,prev,tau\n";
        for (const auto &e : m_history)
        {
            out << e.k << ',' << e.worker << ',' << e.prev << ',' << e.tau() << '\n';
        }
    }

    DelayBudgetReport check_delay_budget(std::span<const LedgerEntry> history, int num_workers)
    {
        require(num_workers >= 1, "check_delay_budget: need at least one worker");
        const auto m = static_cast<std::int64_t>(num_workers);

        // prev(K, m) for all m, maintained as a running sum so each prefix is O(1).
        std::vector<Iteration> last(static_cast<std::size_t>(num_workers), 0);
        std::int64_t sum_last = 0;
        std::int64_t sum_tau_before = 0; // sum_{k<K} tau(k)

        DelayBudgetReport report;
        report.min_slack = std::numeric_limits<std::int64_t>::max();
        for (const auto &e : history)
        {
            const Iteration big_k = e.k;
            // sum_m tau(K, m) = K*M - sum_m prev(K, m); prev(K, .) uses arrivals j < K only.
            const std::int64_t inflight = big_k * m - sum_last;
            const std::int64_t slack = big_k * m - (sum_tau_before + inflight);
            if (slack < report.min_slack)
            {
                report.min_slack = slack;
                report.worst_prefix = big_k;
            }
            if (slack < 0)
            {
                report.holds = false;
            }

            auto &slot = last[static_cast<std::size_t>(e.worker)];
            sum_last += e.k - slot;
            slot = e.k;
            sum_tau_before += e.tau();
        }
        if (history.empty())
        {
            report.min_slack = 0;
        }
        return report;
    }

    LargeDelayReport check_large_delay_fraction(std::span<const LedgerEntry> history, int num_workers)
    {
        const std::int64_t threshold = 3 * static_cast<std::int64_t>(num_workers);
        LargeDelayReport report;
        std::int64_t count = 0;
        for (const auto &e : history)
        {
            if (e.tau() > threshold)
            {
                ++count;
            }
            const double big_k = static_cast<double>(e.k);
            const double bound = std::min(big_k / 3.0, std::max(big_k - static_cast<double>(threshold), 0.0));
            if (static_cast<double>(count) > bound && report.holds)
            {
                report.holds = false;
                report.worst_prefix = e.k;
            }
        }
        report.large_count = count;
        return report;
    }
} // namespace asgd
