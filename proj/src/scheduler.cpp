#include "asgd/scheduler.hpp"

#include "asgd/csv.hpp"
#include "asgd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <istream>
#include <ostream>
#include <queue>
#include <string>
#include <utility>

namespace asgd
{
    namespace
    {
        template <class... Ts>
        struct overloaded : Ts...
        {
            using Ts::operator()...;
        };
        template <class... Ts>
        overloaded(Ts...) -> overloaded<Ts...>;

        /// Draws compute times for one worker's successive gradients.
        class ComputeClock
        {
        public:
            explicit ComputeClock(const SpeedModel &model)
                : m_model(model), m_rng(make_stream(model.seed, StreamKind::ComputeTime))
            {
                if (m_model.deterministic())
                {
                    m_fixed = m_model.fixed_seconds();
                }
            }

            // Finish time of worker m's n-th gradient (n >= 1) that started at `start`.
            // Fixed models use n * s_m so that arrival times are exact multiples.
            double finish(WorkerId m, std::int64_t n, double start)
            {
                if (m_model.deterministic())
                {
                    return static_cast<double>(n) * m_fixed[static_cast<std::size_t>(m)];
                }
                return start + sample(m);
            }

            double sample(WorkerId m)
            {
                if (m_model.deterministic())
                {
                    return m_fixed[static_cast<std::size_t>(m)];
                }
                const auto &r = std::get<RandomSpeeds>(m_model.kind);
                const double mean = r.mean[static_cast<std::size_t>(m)];
                double t = 0.0;
                if (r.distribution == ComputeDistribution::Exponential)
                {
                    std::exponential_distribution<double> dist(1.0 / mean);
                    t = dist(m_rng);
                }
                else
                {
                    std::lognormal_distribution<double> dist(std::log(mean) - 0.5 * r.sigma * r.sigma, r.sigma);
                    t = dist(m_rng);
                }
                // Strictly positive compute times.
                return std::max(t, std::numeric_limits<double>::min());
            }

        private:
            const SpeedModel &m_model;
            Rng m_rng;
            std::vector<double> m_fixed;
        };

        /// Min-heap keyed by (finish_time, worker): equal times pop the lowest index first.
        class EventQueue
        {
        public:
            explicit EventQueue(const SpeedModel &model)
                : m_clock(model), m_completed(static_cast<std::size_t>(model.num_workers()), 0)
            {
                for (WorkerId m = 0; m < model.num_workers(); ++m)
                {
                    m_heap.emplace(m_clock.finish(m, 1, 0.0), m);
                }
            }

            std::pair<double, WorkerId> peek() const { return m_heap.top(); }

            std::pair<double, WorkerId> pop()
            {
                auto [t, m] = m_heap.top();
                m_heap.pop();
                auto &n = m_completed[static_cast<std::size_t>(m)];
                ++n;
                m_heap.emplace(m_clock.finish(m, n + 1, t), m);
                return {t, m};
            }

        private:
            using Event = std::pair<double, WorkerId>;
            ComputeClock m_clock;
            std::vector<std::int64_t> m_completed;
            std::priority_queue<Event, std::vector<Event>, std::greater<Event>> m_heap;
        };

        ArrivalTrace run_queue(const SpeedModel &model, Iteration horizon, double budget)
        {
            model.validate();
            ArrivalTrace trace;
            trace.num_workers = model.num_workers();
            trace.model = model;

            DelayLedger ledger(trace.num_workers);
            EventQueue queue(model);
            while (trace.horizon() < horizon)
            {
                if (queue.peek().first > budget)
                {
                    break;
                }
                auto [t, m] = queue.pop();
                const auto a = ledger.record_arrival(m);
                trace.entries.push_back(TraceEntry{a.k, m, a.tau, t});
            }
            return trace;
        }
    } // namespace

    int SpeedModel::num_workers() const
    {
        return std::visit(overloaded{
                              [](const FixedSpeeds &f) { return static_cast<int>(f.seconds.size()); },
                              [](const RandomSpeeds &r) { return static_cast<int>(r.mean.size()); },
                              [](const StragglerSpeeds &s) { return s.num_workers; },
                          },
                          kind);
    }

    std::vector<double> SpeedModel::fixed_seconds() const
    {
        return std::visit(overloaded{
                              [](const FixedSpeeds &f) { return f.seconds; },
                              [](const RandomSpeeds &) -> std::vector<double> {
                                  throw ContractViolation("fixed_seconds: random speed model");
                              },
                              [](const StragglerSpeeds &s) {
                                  std::vector<double> out(static_cast<std::size_t>(s.num_workers), s.base_seconds);
                                  out[static_cast<std::size_t>(s.straggler)] = s.base_seconds * s.slowdown;
                                  return out;
                              },
                          },
                          kind);
    }

    void SpeedModel::validate() const
    {
        require(num_workers() >= 1, "speed model: need at least one worker");
        std::visit(overloaded{
                       [](const FixedSpeeds &f) {
                           for (double s : f.seconds)
                           {
                               require(std::isfinite(s) && s > 0, "fixed speeds: compute times must be positive");
                           }
                       },
                       [](const RandomSpeeds &r) {
                           for (double s : r.mean)
                           {
                               require(std::isfinite(s) && s > 0, "random speeds: means must be positive");
                           }
                           require(r.sigma >= 0 && std::isfinite(r.sigma), "random speeds: sigma must be >= 0");
                       },
                       [](const StragglerSpeeds &s) {
                           require(s.base_seconds > 0 && s.slowdown > 0, "straggler: times must be positive");
                           require(s.straggler >= 0 && s.straggler < s.num_workers, "straggler: index out of range");
                       },
                   },
                   kind);
    }

    std::vector<WorkerId> ArrivalTrace::order() const
    {
        std::vector<WorkerId> out;
        out.reserve(entries.size());
        for (const auto &e : entries)
        {
            out.push_back(e.worker);
        }
        return out;
    }

    DelayLedger ArrivalTrace::replay() const
    {
        DelayLedger ledger(num_workers);
        for (const auto &e : entries)
        {
            ledger.record_arrival(e.worker);
        }
        return ledger;
    }

    void ArrivalTrace::validate() const
    {
        DelayLedger ledger(num_workers);
        double last_time = -INFINITY;
        for (std::size_t i = 0; i < entries.size(); ++i)
        {
            const auto &e = entries[i];
            const auto where = "trace entry " + std::to_string(i + 1) + ": ";
            require(e.k == static_cast<Iteration>(i + 1), where + "k must run 1..K");
            require(e.worker >= 0 && e.worker < num_workers, where + "worker out of range");
            require(e.time >= last_time, where + "time went backwards");
            const auto a = ledger.record_arrival(e.worker);
            require(a.tau == e.tau, where + "tau " + std::to_string(e.tau) + " does not match replay (" +
                                        std::to_string(a.tau) + ")");
            last_time = e.time;
        }
    }

    ArrivalTrace simulate_trace(const SpeedModel &model, Iteration horizon)
    {
        require(horizon >= 1, "simulate_trace: horizon must be >= 1");
        return run_queue(model, horizon, INFINITY);
    }

    ArrivalTrace simulate_until(const SpeedModel &model, double seconds)
    {
        require(seconds >= 0, "simulate_until: negative time budget");
        return run_queue(model, std::numeric_limits<Iteration>::max(), seconds);
    }

    ArrivalTrace trace_from_order(std::span<const WorkerId> order, int num_workers)
    {
        ArrivalTrace trace;
        trace.num_workers = num_workers;
        DelayLedger ledger(num_workers);
        for (WorkerId m : order)
        {
            const auto a = ledger.record_arrival(m);
            trace.entries.push_back(TraceEntry{a.k, m, a.tau, static_cast<double>(a.k)});
        }
        return trace;
    }

    std::vector<double> simulate_sync_rounds(const SpeedModel &model, double seconds)
    {
        model.validate();
        ComputeClock clock(model);
        std::vector<double> ends;
        double now = 0.0;
        while (true)
        {
            double slowest = 0.0;
            for (WorkerId m = 0; m < model.num_workers(); ++m)
            {
                slowest = std::max(slowest, clock.sample(m));
            }
            if (now + slowest > seconds)
            {
                break;
            }
            now += slowest;
            ends.push_back(now);
        }
        return ends;
    }

    StepCounts steps_in_time(std::span<const double> seconds, double budget)
    {
        require(!seconds.empty(), "steps_in_time: empty speed list");
        require(budget >= 0, "steps_in_time: negative time budget");
        StepCounts counts;
        counts.minibatch_steps = std::numeric_limits<std::int64_t>::max();
        for (double s : seconds)
        {
            require(s > 0, "steps_in_time: speeds must be positive");
            const auto n = static_cast<std::int64_t>(std::floor(budget / s));
            counts.async_steps += n;
            counts.minibatch_steps = std::min(counts.minibatch_steps, n);
        }
        return counts;
    }

    double speedup_factor(std::span<const double> seconds)
    {
        require(!seconds.empty(), "speedup_factor: empty speed list");
        const double s_max = *std::max_element(seconds.begin(), seconds.end());
        double sum = 0.0;
        for (double s : seconds)
        {
            require(s > 0, "speedup_factor: speeds must be positive");
            sum += s_max / s;
        }
        return sum / static_cast<double>(seconds.size());
    }

    void write_trace_csv(std::ostream &out, const ArrivalTrace &trace)
    {
        out << "k,worker,tau,time\n";
        for (const auto &e : trace.entries)
        {
            out << e.k << ',' << e.worker << ',' << e.tau << ',' << csv::format(e.time) << '\n';
        }
    }

    ArrivalTrace read_trace_csv(std::istream &in, int num_workers)
    {
        ArrivalTrace trace;
        trace.num_workers = num_workers;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            if (!line.empty() && line.back() == '\r')
            {
                line.pop_back();
            }
            if (line.empty())
            {
                continue;
            }
            if (lineno == 1)
            {
                require(line == "k,worker,tau,time", "trace csv: expected header 'k,worker,tau,time'");
                continue;
            }
            const auto fields = csv::split(line);
            require(fields.size() == 4, "trace csv line " + std::to_string(lineno) + ": expected 4 fields");
            try
            {
                trace.entries.push_back(TraceEntry{csv::parse_int(fields[0]),
                                                   static_cast<WorkerId>(csv::parse_int(fields[1])),
                                                   csv::parse_int(fields[2]), csv::parse_double(fields[3])});
            }
            catch (const std::invalid_argument &e)
            {
                throw ContractViolation("trace csv line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        trace.validate();
        return trace;
    }
} // namespace asgd
