#include "asgd/optimizers.hpp"

#include "asgd/csv.hpp"
#include "asgd/delay_ledger.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace asgd
{
    std::vector<double> RunRecord::gamma_hat() const
    {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto &r : rows)
        {
            out.push_back(r.gamma_hat);
        }
        return out;
    }

    void write_run_csv(std::ostream &out, const RunRecord &run)
    {
        const bool vres = !run.vres.empty();
        out << "k,worker,tau,gamma,gamma_hat,time,fgap,gradnorm2" << (vres ? ",vres\n" : "\n");
        for (std::size_t i = 0; i < run.rows.size(); ++i)
        {
            const auto &r = run.rows[i];
            out << r.k << ',' << r.worker << ',' << r.tau << ',' << csv::format(r.gamma) << ','
                << csv::format(r.gamma_hat) << ',' << csv::format(r.time) << ',' << csv::format(r.fgap) << ','
                << csv::format(r.gradnorm2);
            if (vres)
            {
                out << ',' << csv::format(i < run.vres.size() ? run.vres[i] : std::nan(""));
            }
            out << '\n';
        }
    }

    ArrivalTrace trace_of(const RunRecord &run)
    {
        require(!run.minibatch, "trace_of: minibatch runs have no arrival trace");
        ArrivalTrace trace;
        trace.num_workers = run.num_workers;
        trace.entries.reserve(run.rows.size());
        for (const auto &r : run.rows)
        {
            trace.entries.push_back(TraceEntry{r.k, r.worker, r.tau, r.time});
        }
        return trace;
    }

    namespace
    {
        constexpr double kDivergenceNorm = 1e12;

        void check_finite(const Vector &x, Iteration k)
        {
            const double n = x.norm();
            if (!std::isfinite(n) || n > kDivergenceNorm)
            {
                throw DivergenceError(k, "iterates diverged at k=" + std::to_string(k) +
                                             " (|x| = " + csv::format(n) + ")");
            }
        }

        bool metrics_due(Iteration k, Iteration horizon, Iteration stride)
        {
            return stride > 0 && (k % stride == 0 || k == horizon);
        }

        void fill_metrics(StepRow &row, const Problem &problem, const Vector &x, Iteration horizon,
                          Iteration stride)
        {
            if (metrics_due(row.k, horizon, stride))
            {
                row.fgap = problem.gap(x);
                row.gradnorm2 = problem.gradient(x).squaredNorm();
            }
            else
            {
                row.fgap = std::nan("");
                row.gradnorm2 = std::nan("");
            }
        }

        /// Bookkeeping shared by the simulated and the threaded executors.
        ///
        /// Each gradient is filed under its dispatch iteration d: d = 0 means the
        /// initial gradient of worker m, d >= 1 the gradient taken at x_d.
        class AsyncCore
        {
        public:
            AsyncCore(const Problem &problem, const StepSchedule &schedule, int num_workers, Iteration horizon,
                      const Vector &x0, const RunOptions &opts)
                : m_problem(problem), m_schedule(schedule), m_opts(opts), m_horizon(horizon),
                  m_ledger(num_workers), m_x(x0)
            {
                require(x0.size() == problem.dim(), "run: x0 has the wrong dimension");
                require(horizon >= 1, "run: horizon must be >= 1");
                const auto M = static_cast<std::size_t>(num_workers);
                m_run.num_workers = num_workers;
                m_run.x0 = x0;
                m_run.initial_gamma_hat.assign(M, 0.0);
                m_run.weighted_sum = Vector::Zero(x0.size());
                m_run.iterate_sum = Vector::Zero(x0.size());
                m_run.rows.reserve(static_cast<std::size_t>(horizon));
                if (opts.retention == Retention::Full)
                {
                    m_run.iterates.reserve(static_cast<std::size_t>(horizon) + 1);
                    m_run.iterates.push_back(x0);
                }
                if (opts.diagnostics)
                {
                    // Zero-filled so a misfiled gradient shows up as a residual, not a crash.
                    m_run.initial_gradients.assign(M, Vector::Zero(x0.size()));
                    m_run.gradients.assign(static_cast<std::size_t>(horizon), Vector::Zero(x0.size()));
                }
                m_dispatch_x.assign(M, x0);
            }

            const Vector &dispatch_point(WorkerId m) const { return m_dispatch_x[static_cast<std::size_t>(m)]; }
            const Vector &x() const { return m_x; }
            Iteration arrivals() const { return m_ledger.arrivals(); }

            /// Applies the gradient `g` delivered by worker m; returns the new arrival.
            Arrival consume(WorkerId m, const Vector &g, double time)
            {
                const Arrival a = m_ledger.record_arrival(m);
                const double gamma = m_schedule.gamma(a.k, a.tau);
                file(m, a.prev, gamma, g);

                m_x -= gamma * g;
                check_finite(m_x, a.k);
                m_dispatch_x[static_cast<std::size_t>(m)] = m_x;
                m_run.iterate_sum += m_x;
                if (m_opts.retention == Retention::Full)
                {
                    m_run.iterates.push_back(m_x);
                }

                StepRow row;
                row.k = a.k;
                row.worker = m;
                row.prev = a.prev;
                row.tau = a.tau;
                row.gamma = gamma;
                row.time = time;
                fill_metrics(row, m_problem, m_x, m_horizon, m_opts.metrics_stride);
                m_run.rows.push_back(row);
                return a;
            }

            /// Terminal gh for every in-flight gradient. `terminal_gradient(m)` is only
            /// called with diagnostics on and must return the gradient worker m would deliver.
            template <class TerminalGradient>
            RunRecord finish(TerminalGradient &&terminal_gradient)
            {
                const Iteration K = m_ledger.arrivals();
                for (WorkerId m = 0; m < m_ledger.num_workers(); ++m)
                {
                    const Iteration d = m_ledger.dispatch_iter(m);
                    const double gamma = m_schedule.gamma(K, m_ledger.tau_terminal(m, K));
                    Vector g;
                    if (m_opts.diagnostics)
                    {
                        g = terminal_gradient(m);
                    }
                    file(m, d, gamma, g);
                }
                m_run.final_x = m_x;
                m_run.gradients_consumed = K;
                m_run.gradients_in_flight = m_ledger.num_workers() - 1;
                return std::move(m_run);
            }

        private:
            // gh for the gradient dispatched at d by worker m, plus its memo entry.
            void file(WorkerId m, Iteration d, double gamma, const Vector &g)
            {
                const Vector &xd = m_dispatch_x[static_cast<std::size_t>(m)];
                if (d >= 1)
                {
                    m_run.weighted_sum += gamma * xd;
                    m_run.gamma_hat_sum += gamma;
                }
                if (m_opts.fault == Fault::OffByOnePrev && d >= 1)
                {
                    --d;
                }
                if (d == 0)
                {
                    m_run.initial_gamma_hat[static_cast<std::size_t>(m)] = gamma;
                }
                else
                {
                    m_run.rows[static_cast<std::size_t>(d - 1)].gamma_hat = gamma;
                }
                if (m_opts.diagnostics)
                {
                    auto &slot = d == 0 ? m_run.initial_gradients[static_cast<std::size_t>(m)]
                                        : m_run.gradients[static_cast<std::size_t>(d - 1)];
                    slot = g;
                }
            }

            const Problem &m_problem;
            const StepSchedule &m_schedule;
            RunOptions m_opts;
            Iteration m_horizon;
            DelayLedger m_ledger;
            Vector m_x;
            std::vector<Vector> m_dispatch_x;
            RunRecord m_run;
        };

        std::vector<Rng> noise_streams(std::uint64_t seed, int num_workers)
        {
            std::vector<Rng> out;
            out.reserve(static_cast<std::size_t>(num_workers));
            for (int m = 0; m < num_workers; ++m)
            {
                out.push_back(make_stream(seed, StreamKind::GradientNoise, static_cast<std::uint64_t>(m)));
            }
            return out;
        }
    } // namespace

    RunRecord run_async(const Problem &problem, const ArrivalTrace &trace, const StepSchedule &schedule,
                        const Vector &x0, const RunOptions &opts)
    {
        require(trace.num_workers >= 1, "run_async: trace has no workers");
        const int M = trace.num_workers;
        AsyncCore core(problem, schedule, M, trace.horizon(), x0, opts);
        auto rng = noise_streams(opts.seed, M);
        for (const auto &e : trace.entries)
        {
            require(e.worker >= 0 && e.worker < M,
                    "run_async: trace names worker " + std::to_string(e.worker) + " but M=" + std::to_string(M));
            const auto m = static_cast<std::size_t>(e.worker);
            const Vector g = problem.stochastic_gradient(core.dispatch_point(e.worker), e.worker, rng[m]);
            const Arrival a = core.consume(e.worker, g, e.time);
            require(a.k == e.k && a.tau == e.tau, "run_async: trace entry k=" + std::to_string(e.k) +
                                                      " disagrees with the ledger replay");
        }
        return core.finish([&](WorkerId m) {
            return problem.stochastic_gradient(core.dispatch_point(m), m, rng[static_cast<std::size_t>(m)]);
        });
    }

    RunRecord run_minibatch(const Problem &problem, int num_workers, Iteration rounds, double gamma,
                            const Vector &x0, const RunOptions &opts, std::span<const double> round_times)
    {
        require(num_workers >= 1, "run_minibatch: M must be >= 1");
        require(rounds >= 1, "run_minibatch: R must be >= 1");
        require(gamma > 0 && std::isfinite(gamma), "run_minibatch: gamma must be positive");
        require(x0.size() == problem.dim(), "run_minibatch: x0 has the wrong dimension");
        require(round_times.empty() || static_cast<Iteration>(round_times.size()) >= rounds,
                "run_minibatch: fewer round times than rounds");

        RunRecord run;
        run.num_workers = num_workers;
        run.minibatch = true;
        run.x0 = x0;
        run.weighted_sum = Vector::Zero(x0.size());
        run.iterate_sum = Vector::Zero(x0.size());
        run.rows.reserve(static_cast<std::size_t>(rounds));
        if (opts.retention == Retention::Full)
        {
            run.iterates.push_back(x0);
        }

        auto rng = noise_streams(opts.seed, num_workers);
        Vector x = x0;
        Vector avg(x0.size());
        for (Iteration r = 1; r <= rounds; ++r)
        {
            avg.setZero();
            for (int m = 0; m < num_workers; ++m)
            {
                avg += problem.stochastic_gradient(x, m, rng[static_cast<std::size_t>(m)]);
            }
            avg /= static_cast<double>(num_workers);
            x -= gamma * avg;
            check_finite(x, r);

            run.weighted_sum += gamma * x;
            run.gamma_hat_sum += gamma;
            run.iterate_sum += x;
            if (opts.retention == Retention::Full)
            {
                run.iterates.push_back(x);
            }
            StepRow row;
            row.k = r;
            row.worker = -1;
            row.prev = r - 1;
            row.tau = 0;
            row.gamma = gamma;
            row.gamma_hat = gamma;
            row.time = round_times.empty() ? static_cast<double>(r) : round_times[static_cast<std::size_t>(r - 1)];
            fill_metrics(row, problem, x, rounds, opts.metrics_stride);
            run.rows.push_back(row);
        }
        run.final_x = x;
        run.gradients_consumed = static_cast<std::int64_t>(num_workers) * rounds;
        return run;
    }

    RunRecord run_live(const Problem &problem, const StepSchedule &schedule, int num_workers, Iteration horizon,
                       const Vector &x0, const RunOptions &opts)
    {
        require(num_workers >= 1, "run_live: M must be >= 1");
        AsyncCore core(problem, schedule, num_workers, horizon, x0, opts);
        std::mutex lock;
        std::vector<Vector> terminal(static_cast<std::size_t>(num_workers));
        std::exception_ptr failure;
        const auto start = std::chrono::steady_clock::now();

        auto worker = [&](WorkerId m) {
            Rng rng = make_stream(opts.seed, StreamKind::GradientNoise, static_cast<std::uint64_t>(m));
            Vector point;
            {
                std::lock_guard guard(lock);
                point = core.dispatch_point(m);
            }
            for (;;)
            {
                Vector g = problem.stochastic_gradient(point, m, rng);
                std::lock_guard guard(lock);
                if (failure || core.arrivals() >= horizon)
                {
                    terminal[static_cast<std::size_t>(m)] = std::move(g);
                    return;
                }
                const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                try
                {
                    core.consume(m, g, t);
                }
                catch (...)
                {
                    failure = std::current_exception();
                    return;
                }
                point = core.dispatch_point(m);
            }
        };

        std::vector<std::jthread> threads;
        threads.reserve(static_cast<std::size_t>(num_workers));
        for (WorkerId m = 0; m < num_workers; ++m)
        {
            threads.emplace_back(worker, m);
        }
        threads.clear();
        if (failure)
        {
            std::rethrow_exception(failure);
        }
        return core.finish([&](WorkerId m) { return terminal[static_cast<std::size_t>(m)]; });
    }
} // namespace asgd
