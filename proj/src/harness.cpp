#include "asgd/harness.hpp"

#include "asgd/csv.hpp"
#include "asgd/delay_ledger.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace asgd
{
    using nlohmann::json;

    // Building blocks ---------------------------------------------------------------

    std::unique_ptr<Problem> make_problem(const ProblemConfig &cfg, int num_workers)
    {
        LeastSquaresOptions ls;
        ls.dim = cfg.dim;
        ls.samples = cfg.samples;
        ls.noise = cfg.noise;
        ls.sigma = cfg.sigma;
        ls.conditioning = cfg.conditioning;
        ls.planted = cfg.planted;
        ls.seed = cfg.seed;
        switch (cfg.kind)
        {
        case ProblemKind::LeastSquares:
            if (!cfg.data_csv.empty())
            {
                return least_squares_from_csv(cfg.data_csv, cfg.noise, cfg.sigma);
            }
            return least_squares(ls);
        case ProblemKind::BoundedNonconvex:
            return bounded_nonconvex(cfg.dim, cfg.samples, cfg.seed);
        case ProblemKind::HeterogeneousQuadratics:
            ls.noise = NoiseMode::Additive;
            return heterogeneous_quadratics(ls, num_workers, cfg.zeta);
        }
        throw ConfigError("problem.kind", "unhandled problem kind");
    }

    Vector initial_point(const RunConfig &cfg, const Problem &problem)
    {
        if (cfg.x0)
        {
            if (cfg.x0->size() != problem.dim())
            {
                throw ConfigError("x0", "length " + std::to_string(cfg.x0->size()) + " but the problem has d=" +
                                            std::to_string(problem.dim()));
            }
            return *cfg.x0;
        }
        return Vector::Constant(problem.dim(), cfg.x0_fill);
    }

    std::uint64_t repetition_seed(const RunConfig &cfg, int repetition)
    {
        return cfg.seed + static_cast<std::uint64_t>(repetition);
    }

    ArrivalTrace make_trace(const SpeedConfig &cfg, std::optional<Iteration> horizon, std::optional<double> duration,
                            std::uint64_t seed_shift)
    {
        switch (cfg.source)
        {
        case SpeedConfig::Source::Model:
        {
            SpeedModel model = cfg.model;
            model.seed += seed_shift;
            if (horizon)
            {
                return simulate_trace(model, *horizon);
            }
            if (duration)
            {
                return simulate_until(model, *duration);
            }
            throw ConfigError("K", "either K or S is required");
        }
        case SpeedConfig::Source::Order:
        {
            const auto n = static_cast<Iteration>(cfg.order.size());
            const Iteration k = horizon.value_or(n);
            if (k > n)
            {
                throw ConfigError("K", "exceeds the length of speed.order");
            }
            return trace_from_order(std::span(cfg.order).first(static_cast<std::size_t>(k)), cfg.workers);
        }
        case SpeedConfig::Source::TraceCsv:
        {
            std::ifstream in(cfg.trace_csv);
            if (!in)
            {
                throw ConfigError("speed.path", "cannot open '" + cfg.trace_csv + "'");
            }
            ArrivalTrace t = read_trace_csv(in, cfg.workers);
            if (horizon)
            {
                if (*horizon > t.horizon())
                {
                    throw ConfigError("K", "exceeds the length of the trace file");
                }
                t.entries.resize(static_cast<std::size_t>(*horizon));
            }
            return t;
        }
        }
        throw ConfigError("speed", "unhandled speed source");
    }

    StepSchedule make_schedule(const ScheduleConfig &cfg, const Problem &problem, const Vector &x0, int num_workers,
                               Iteration horizon)
    {
        ProblemConstants c = problem.constants(x0, num_workers, horizon);
        cfg.overrides.apply(c);
        if (cfg.kind == ScheduleKind::Constant)
        {
            return StepSchedule::constant(cfg.gamma, c);
        }
        return StepSchedule(cfg.kind, c);
    }

    OutputMetrics evaluate_output(const RunRecord &run, const Problem &problem, OutputRule rule, double mu)
    {
        OutputMetrics m;
        m.final_gap = problem.gap(run.final_x);
        m.final_gradnorm2 = problem.gradient(run.final_x).squaredNorm();
        if (rule == OutputRule::LastIterate)
        {
            m.output_gap = m.final_gap;
            m.output_gradnorm2 = m.final_gradnorm2;
            return m;
        }
        if (!is_sampling(rule))
        {
            Rng unused = make_stream(0, StreamKind::OutputSelection);
            const Vector x = select_output(rule, run, mu, unused);
            m.output_gap = problem.gap(x);
            m.output_gradnorm2 = problem.gradient(x).squaredNorm();
            return m;
        }
        const auto w = output_weights(rule, run.gamma_hat(), mu);
        for (std::size_t i = 0; i < w.size(); ++i)
        {
            double gap = run.rows[i].fgap;
            double g2 = run.rows[i].gradnorm2;
            if (!std::isfinite(gap) || !std::isfinite(g2))
            {
                require(run.has_history(), "evaluate_output: sampling rules need per-step metrics or iterates");
                const Vector &x = run.iterates[i + 1];
                gap = problem.gap(x);
                g2 = problem.gradient(x).squaredNorm();
            }
            m.output_gap += w[i] * gap;
            m.output_gradnorm2 += w[i] * g2;
        }
        return m;
    }

    // Commands ----------------------------------------------------------------------

    namespace
    {
        std::filesystem::path output_path(const RunConfig &cfg, const std::string &suffix)
        {
            std::filesystem::create_directories(cfg.out_dir);
            std::string name = cfg.prefix + "_" + suffix;
            for (auto &ch : name)
            {
                if (ch == '/' || ch == '\\' || ch == ' ')
                {
                    ch = '_';
                }
            }
            return std::filesystem::path(cfg.out_dir) / name;
        }

        void write_json(const std::filesystem::path &path, const json &j)
        {
            std::ofstream out(path);
            out << j.dump(2) << '\n';
        }

        json metrics_json(const OutputMetrics &m)
        {
            return {{"final_gap", m.final_gap},
                    {"final_gradnorm2", m.final_gradnorm2},
                    {"output_gap", m.output_gap},
                    {"output_gradnorm2", m.output_gradnorm2}};
        }

        RunOptions run_options(const RunConfig &cfg, std::uint64_t seed)
        {
            RunOptions o;
            o.seed = seed;
            o.retention = cfg.retention;
            o.diagnostics = cfg.diagnostics;
            o.metrics_stride = cfg.metrics_stride;
            return o;
        }

        Iteration max_tau(const ArrivalTrace &t)
        {
            Iteration out = 0;
            for (const auto &e : t.entries)
            {
                out = std::max(out, e.tau);
            }
            return out;
        }

        double mean(const std::vector<double> &v)
        {
            double s = 0.0;
            for (double x : v)
            {
                s += x;
            }
            return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
        }

        double stderr_of(const std::vector<double> &v)
        {
            if (v.size() < 2)
            {
                return 0.0;
            }
            const double mu = mean(v);
            double ss = 0.0;
            for (double x : v)
            {
                ss += (x - mu) * (x - mu);
            }
            return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
        }
    } // namespace

    CommandResult cmd_simulate(const RunConfig &cfg)
    {
        const int M = cfg.speed.num_workers();
        const auto problem = make_problem(cfg.problem, M);
        const Vector x0 = initial_point(cfg, *problem);

        CommandResult result;
        json runs = json::array();
        for (int rep = 0; rep < cfg.repetitions; ++rep)
        {
            const std::uint64_t seed = repetition_seed(cfg, rep);
            const ArrivalTrace trace = make_trace(cfg.speed, cfg.horizon, cfg.duration, seed);
            for (const auto &sc : cfg.schedules)
            {
                const std::string label = label_of(sc);
                json entry = {{"label", label},
                              {"schedule", std::string(to_string(sc.kind))},
                              {"output_rule", std::string(to_string(sc.rule()))},
                              {"repetition", rep},
                              {"seed", seed},
                              {"K", trace.horizon()},
                              {"max_tau", max_tau(trace)}};
                if (trace.horizon() == 0)
                {
                    entry["degenerate"] = true;
                    runs.push_back(entry);
                    continue;
                }
                const StepSchedule schedule = make_schedule(sc, *problem, x0, M, trace.horizon());
                RunRecord run;
                try
                {
                    run = run_async(*problem, trace, schedule, x0, run_options(cfg, seed));
                }
                catch (const DivergenceError &e)
                {
                    entry["diverged"] = true;
                    entry["diverged_at"] = e.iteration();
                    runs.push_back(entry);
                    continue;
                }
                entry["diverged"] = false;
                entry.update(metrics_json(evaluate_output(run, *problem, sc.rule(), schedule.constants().mu)));
                if (cfg.diagnostics)
                {
                    const VirtualTrack vt = track(run, trace, schedule);
                    run.vres = vt.residual;
                    const double worst = check_virtual_identity(vt);
                    entry["identity_max_residual"] = worst;
                    if (!(worst <= kIdentityTolerance))
                    {
                        result.exit_code = 1;
                    }
                }
                const auto path = output_path(cfg, label + "_r" + std::to_string(rep) + ".csv");
                std::ofstream out(path);
                write_run_csv(out, run);
                entry["csv"] = path.string();
                runs.push_back(entry);
            }
        }
        result.summary = {{"schema", kSummarySchema},
                          {"command", "simulate"},
                          {"problem", problem->name()},
                          {"M", M},
                          {"runs", runs}};
        write_json(output_path(cfg, "summary.json"), result.summary);
        return result;
    }

    CompareReport compare(const RunConfig &cfg)
    {
        if (cfg.speed.source != SpeedConfig::Source::Model || !cfg.speed.model.deterministic())
        {
            throw ConfigError("speed", "compare needs a fixed or straggler speed model");
        }
        if (!cfg.duration)
        {
            throw ConfigError("S", "compare needs a wall-clock budget S");
        }
        CompareReport r;
        r.seconds = cfg.speed.model.fixed_seconds();
        r.budget = *cfg.duration;
        r.predicted = steps_in_time(r.seconds, r.budget);
        r.async_steps_simulated = simulate_until(cfg.speed.model, r.budget).horizon();
        r.speedup = speedup_factor(r.seconds);
        const int M = static_cast<int>(r.seconds.size());
        r.degenerate = r.predicted.async_steps == 0 || r.predicted.minibatch_steps == 0;
        r.step_ratio = r.predicted.minibatch_steps > 0
                           ? static_cast<double>(r.predicted.async_steps) /
                                 (static_cast<double>(M) * static_cast<double>(r.predicted.minibatch_steps))
                           : std::nan("");
        if (r.degenerate)
        {
            r.async_final_gap = r.async_output_gap = r.minibatch_final_gap = r.error_ratio = std::nan("");
            return r;
        }

        const auto problem = make_problem(cfg.problem, M);
        const Vector x0 = initial_point(cfg, *problem);
        const ScheduleConfig &sc = cfg.schedules.front();
        const ArrivalTrace trace = simulate_trace(cfg.speed.model, r.predicted.async_steps);
        const StepSchedule schedule = make_schedule(sc, *problem, x0, M, trace.horizon());

        std::vector<double> async_final, async_output;
        for (int rep = 0; rep < cfg.repetitions; ++rep)
        {
            RunOptions o = run_options(cfg, repetition_seed(cfg, rep));
            o.diagnostics = false;
            o.metrics_stride = is_sampling(sc.rule()) ? 1 : 0;
            const RunRecord run = run_async(*problem, trace, schedule, x0, o);
            const auto m = evaluate_output(run, *problem, sc.rule(), schedule.constants().mu);
            async_final.push_back(m.final_gap);
            async_output.push_back(m.output_gap);
        }
        r.async_final_gap = mean(async_final);
        r.async_output_gap = mean(async_output);

        std::vector<double> grid = cfg.minibatch_gammas;
        if (grid.empty())
        {
            ProblemConstants c = problem->constants(x0, M, trace.horizon());
            sc.overrides.apply(c);
            for (double f : {1.0, 0.5, 0.25, 0.125})
            {
                grid.push_back(f / c.L);
            }
        }
        const auto rounds = r.predicted.minibatch_steps;
        auto times = simulate_sync_rounds(cfg.speed.model, r.budget);
        if (static_cast<Iteration>(times.size()) < rounds)
        {
            times.clear();
        }
        r.minibatch_final_gap = std::numeric_limits<double>::infinity();
        for (double gamma : grid)
        {
            std::vector<double> finals;
            try
            {
                for (int rep = 0; rep < cfg.repetitions; ++rep)
                {
                    RunOptions o = run_options(cfg, repetition_seed(cfg, rep));
                    o.diagnostics = false;
                    o.metrics_stride = 0;
                    const RunRecord run = run_minibatch(*problem, M, rounds, gamma, x0, o, times);
                    finals.push_back(problem->gap(run.final_x));
                }
            }
            catch (const DivergenceError &)
            {
                continue;
            }
            const double g = mean(finals);
            if (g < r.minibatch_final_gap)
            {
                r.minibatch_final_gap = g;
                r.minibatch_gamma = gamma;
            }
        }
        r.error_ratio = r.minibatch_final_gap / r.async_final_gap;
        return r;
    }

    json to_json(const CompareReport &r)
    {
        return {{"schema", kSummarySchema},
                {"command", "compare"},
                {"seconds", r.seconds},
                {"S", r.budget},
                {"K_async", r.predicted.async_steps},
                {"K_mini", r.predicted.minibatch_steps},
                {"K_async_simulated", r.async_steps_simulated},
                {"speedup_predicted", r.speedup},
                {"step_ratio", r.step_ratio},
                {"degenerate", r.degenerate},
                {"async_final_gap", r.async_final_gap},
                {"async_output_gap", r.async_output_gap},
                {"minibatch_final_gap", r.minibatch_final_gap},
                {"minibatch_gamma", r.minibatch_gamma},
                {"error_ratio", r.error_ratio}};
    }

    CommandResult cmd_compare(const RunConfig &cfg)
    {
        CommandResult result;
        result.summary = to_json(compare(cfg));
        write_json(output_path(cfg, "compare.json"), result.summary);
        return result;
    }

    CommandResult cmd_sweep(const RunConfig &cfg)
    {
        const int M = cfg.speed.num_workers();
        const auto problem = make_problem(cfg.problem, M);
        const Vector x0 = initial_point(cfg, *problem);
        std::vector<Iteration> horizons = cfg.sweep_horizons;
        if (horizons.empty())
        {
            if (!cfg.horizon)
            {
                throw ConfigError("K", "sweep needs K or sweep_K");
            }
            horizons.push_back(*cfg.horizon);
        }

        struct Task
        {
            std::size_t horizon = 0, schedule = 0;
            int rep = 0;
            std::uint64_t seed = 0;
            OutputMetrics metrics;
            bool diverged = false;
            std::string error;
        };
        std::vector<Task> tasks;
        for (std::size_t h = 0; h < horizons.size(); ++h)
            for (std::size_t s = 0; s < cfg.schedules.size(); ++s)
                for (int rep = 0; rep < cfg.repetitions; ++rep)
                    tasks.push_back(Task{h, s, rep, repetition_seed(cfg, rep), {}, false, {}});

        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < tasks.size(); i = next++)
            {
                Task &t = tasks[i];
                const ScheduleConfig &sc = cfg.schedules[t.schedule];
                try
                {
                    const ArrivalTrace trace = make_trace(cfg.speed, horizons[t.horizon], std::nullopt, t.seed);
                    const StepSchedule schedule = make_schedule(sc, *problem, x0, M, trace.horizon());
                    RunOptions o = run_options(cfg, t.seed);
                    o.diagnostics = false;
                    const RunRecord run = run_async(*problem, trace, schedule, x0, o);
                    t.metrics = evaluate_output(run, *problem, sc.rule(), schedule.constants().mu);
                }
                catch (const DivergenceError &)
                {
                    t.diverged = true;
                }
                catch (const std::exception &e)
                {
                    t.error = e.what();
                }
            }
        };
        const unsigned n_threads =
            cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
        {
            std::vector<std::jthread> pool;
            for (unsigned i = 0; i < std::min<std::size_t>(n_threads, tasks.size()); ++i)
            {
                pool.emplace_back(worker);
            }
        }
        for (const auto &t : tasks)
        {
            if (!t.error.empty())
            {
                throw ContractViolation(t.error);
            }
        }

        {
            std::ofstream raw(output_path(cfg, "sweep_raw.csv"));
            raw << "label,K,repetition,seed,diverged,final_gap,final_gradnorm2,output_gap,output_gradnorm2\n";
            for (const auto &t : tasks)
            {
                const auto nan = std::nan("");
                raw << label_of(cfg.schedules[t.schedule]) << ',' << horizons[t.horizon] << ',' << t.rep << ','
                    << t.seed << ',' << (t.diverged ? 1 : 0) << ','
                    << csv::format(t.diverged ? nan : t.metrics.final_gap) << ','
                    << csv::format(t.diverged ? nan : t.metrics.final_gradnorm2) << ','
                    << csv::format(t.diverged ? nan : t.metrics.output_gap) << ','
                    << csv::format(t.diverged ? nan : t.metrics.output_gradnorm2) << '\n';
            }
        }

        json groups = json::array();
        std::ofstream summary(output_path(cfg, "sweep_summary.csv"));
        summary << "label,K,n,diverged,mean_output_gap,stderr_output_gap,mean_output_gradnorm2,"
                   "stderr_output_gradnorm2,mean_final_gap,stderr_final_gap\n";
        for (std::size_t h = 0; h < horizons.size(); ++h)
        {
            for (std::size_t s = 0; s < cfg.schedules.size(); ++s)
            {
                std::vector<double> og, og2, fg;
                int diverged = 0;
                for (const auto &t : tasks)
                {
                    if (t.horizon != h || t.schedule != s)
                        continue;
                    if (t.diverged)
                    {
                        ++diverged;
                        continue;
                    }
                    og.push_back(t.metrics.output_gap);
                    og2.push_back(t.metrics.output_gradnorm2);
                    fg.push_back(t.metrics.final_gap);
                }
                const std::string label = label_of(cfg.schedules[s]);
                summary << label << ',' << horizons[h] << ',' << og.size() << ',' << diverged << ','
                        << csv::format(mean(og)) << ',' << csv::format(stderr_of(og)) << ','
                        << csv::format(mean(og2)) << ',' << csv::format(stderr_of(og2)) << ','
                        << csv::format(mean(fg)) << ',' << csv::format(stderr_of(fg)) << '\n';
                groups.push_back({{"label", label},
                                  {"K", horizons[h]},
                                  {"n", og.size()},
                                  {"diverged", diverged},
                                  {"mean_output_gap", mean(og)},
                                  {"stderr_output_gap", stderr_of(og)},
                                  {"mean_output_gradnorm2", mean(og2)},
                                  {"stderr_output_gradnorm2", stderr_of(og2)},
                                  {"mean_final_gap", mean(fg)},
                                  {"stderr_final_gap", stderr_of(fg)}});
            }
        }
        CommandResult result;
        result.summary = {{"schema", kSummarySchema}, {"command", "sweep"}, {"M", M}, {"groups", groups}};
        write_json(output_path(cfg, "sweep_summary.json"), result.summary);
        return result;
    }

    CommandResult cmd_live(const RunConfig &cfg)
    {
        if (!cfg.horizon)
        {
            throw ConfigError("K", "live runs need a horizon K");
        }
        const int M = cfg.speed.num_workers();
        const auto problem = make_problem(cfg.problem, M);
        const Vector x0 = initial_point(cfg, *problem);
        const ScheduleConfig &sc = cfg.schedules.front();
        const StepSchedule schedule = make_schedule(sc, *problem, x0, M, *cfg.horizon);

        CommandResult result;
        RunRecord run = run_live(*problem, schedule, M, *cfg.horizon, x0, run_options(cfg, repetition_seed(cfg, 0)));
        const ArrivalTrace trace = trace_of(run);
        const auto budget = check_delay_budget(trace.replay().history(), M);
        json summary = {{"schema", kSummarySchema},
                        {"command", "live"},
                        {"label", label_of(sc)},
                        {"M", M},
                        {"K", run.horizon()},
                        {"max_tau", max_tau(trace)},
                        {"wall_seconds", run.rows.back().time},
                        {"delay_budget_holds", budget.holds}};
        summary.update(metrics_json(evaluate_output(run, *problem, sc.rule(), schedule.constants().mu)));
        if (!budget.holds)
        {
            result.exit_code = 1;
        }
        if (cfg.diagnostics)
        {
            const VirtualTrack vt = track(run, trace, schedule);
            run.vres = vt.residual;
            const double worst = check_virtual_identity(vt);
            summary["identity_max_residual"] = worst;
            if (!(worst <= kIdentityTolerance))
            {
                result.exit_code = 1;
            }
        }
        const auto path = output_path(cfg, "live.csv");
        std::ofstream out(path);
        write_run_csv(out, run);
        summary["csv"] = path.string();
        result.summary = summary;
        write_json(output_path(cfg, "live_summary.json"), summary);
        return result;
    }

    // Invariant suite -------------------------------------------------------------------

    bool CheckReport::passed() const
    {
        return std::all_of(invariants.begin(), invariants.end(), [](const auto &t) { return t.passed(); });
    }

    const InvariantTally &CheckReport::at(const std::string &name) const
    {
        for (const auto &t : invariants)
        {
            if (t.name == name)
            {
                return t;
            }
        }
        throw ContractViolation("CheckReport: no invariant named " + name);
    }

    namespace
    {
        enum class SuiteSpeed
        {
            Fixed,
            Exponential,
            LogNormal,
            Straggler,
            Adversarial,
        };

        constexpr SuiteSpeed kSuiteSpeeds[] = {SuiteSpeed::Fixed, SuiteSpeed::Exponential, SuiteSpeed::LogNormal,
                                               SuiteSpeed::Straggler, SuiteSpeed::Adversarial};

        constexpr ScheduleKind kSuiteSchedules[] = {ScheduleKind::AdaptiveConvex, ScheduleKind::AdaptiveStronglyConvex,
                                                    ScheduleKind::AdaptiveNonconvex,
                                                    ScheduleKind::AdaptiveHeterogeneous};

        const char *name_of(SuiteSpeed s)
        {
            switch (s)
            {
            case SuiteSpeed::Fixed: return "fixed";
            case SuiteSpeed::Exponential: return "exponential";
            case SuiteSpeed::LogNormal: return "lognormal";
            case SuiteSpeed::Straggler: return "straggler";
            case SuiteSpeed::Adversarial: return "adversarial";
            }
            return "?";
        }

        ArrivalTrace suite_trace(SuiteSpeed kind, int M, Iteration K, std::uint64_t seed)
        {
            SpeedModel model;
            model.seed = seed;
            switch (kind)
            {
            case SuiteSpeed::Fixed:
            {
                std::vector<double> s;
                for (int m = 0; m < M; ++m)
                    s.push_back(1.0 + 0.5 * m);
                model.kind = FixedSpeeds{s};
                break;
            }
            case SuiteSpeed::Exponential:
            {
                std::vector<double> mean;
                for (int m = 0; m < M; ++m)
                    mean.push_back(1.0 + m);
                model.kind = RandomSpeeds{ComputeDistribution::Exponential, mean, 0.0};
                break;
            }
            case SuiteSpeed::LogNormal:
            {
                std::vector<double> mean;
                for (int m = 0; m < M; ++m)
                    mean.push_back(1.0 + 0.25 * m);
                model.kind = RandomSpeeds{ComputeDistribution::LogNormal, mean, 1.0};
                break;
            }
            case SuiteSpeed::Straggler:
                model.kind = StragglerSpeeds{M, 1.0, M - 1, 40.0};
                break;
            case SuiteSpeed::Adversarial:
            {
                // Worker 0 never returns; the rest arrive in random order.
                Rng rng = make_stream(seed, StreamKind::ComputeTime, 7);
                std::vector<WorkerId> order(static_cast<std::size_t>(K), 0);
                if (M > 1)
                {
                    std::uniform_int_distribution<WorkerId> pick(1, M - 1);
                    for (auto &w : order)
                        w = pick(rng);
                }
                return trace_from_order(order, M);
            }
            }
            return simulate_trace(model, K);
        }

        struct Tallies
        {
            std::vector<InvariantTally> list;

            InvariantTally &get(const std::string &name)
            {
                for (auto &t : list)
                    if (t.name == name)
                        return t;
                list.push_back(InvariantTally{name, 0, 0, 0.0, {}});
                return list.back();
            }

            void record(const std::string &name, bool ok, double measure, const std::string &where)
            {
                auto &t = get(name);
                ++t.checked;
                if (std::isnan(measure))
                    measure = std::numeric_limits<double>::infinity();
                t.worst = std::max(t.worst, measure);
                if (!ok)
                {
                    ++t.failed;
                    if (t.first_failure.empty())
                        t.first_failure = where;
                }
            }
        };
    } // namespace

    CheckReport run_check(const CheckOptions &opts)
    {
        const auto start = std::chrono::steady_clock::now();
        Tallies tallies;
        for (const char *name : {"virtual-identity", "virtual-cardinality", "gamma-hat-bookkeeping", "delay-budget",
                                 "large-delay-fraction", "stepsize-sum-convex", "stepsize-sum-nonconvex",
                                 "stepsize-sum-strongly-convex", "adaptive-cap", "gradient-accounting",
                                 "trace-determinism", "error-norm-bound"})
        {
            tallies.get(name);
        }
        CheckReport report;

        const int d = 4;
        const int n = 32;
        LeastSquaresOptions ls;
        ls.dim = d;
        ls.samples = n;
        ls.sigma = 0.5;
        ls.seed = 11;
        const auto convex = least_squares(ls);
        const auto nonconvex = bounded_nonconvex(d, n, 12);
        const Vector x0 = Vector::Constant(d, 1.0);

        for (int M : opts.workers)
        {
            const auto hetero = heterogeneous_quadratics(ls, M, M > 1 ? 0.5 : 0.0);
            for (Iteration K : opts.horizons)
            {
                for (SuiteSpeed speed : kSuiteSpeeds)
                {
                    for (int s = 0; s < opts.seeds; ++s)
                    {
                        const std::uint64_t seed = opts.base_seed + static_cast<std::uint64_t>(s);
                        const ArrivalTrace trace = suite_trace(speed, M, K, seed);
                        const std::string where_trace = "M=" + std::to_string(M) + " K=" + std::to_string(K) +
                                                        " speed=" + name_of(speed) + " seed=" + std::to_string(seed);

                        tallies.record("trace-determinism", suite_trace(speed, M, K, seed).entries == trace.entries,
                                       0.0, where_trace);
                        const DelayLedger ledger = trace.replay();
                        const auto budget = check_delay_budget(ledger.history(), M);
                        tallies.record("delay-budget", budget.holds,
                                       budget.min_slack < 0 ? static_cast<double>(-budget.min_slack) : 0.0,
                                       where_trace + " prefix=" + std::to_string(budget.worst_prefix));
                        const auto large = check_large_delay_fraction(ledger.history(), M);
                        tallies.record("large-delay-fraction", large.holds, 0.0,
                                       where_trace + " prefix=" + std::to_string(large.worst_prefix));

                        RunOptions ro;
                        ro.seed = seed;
                        ro.diagnostics = true;
                        ro.metrics_stride = 0;
                        ro.fault = opts.fault;

                        auto identity = [&](const RunRecord &run, const StepSchedule &schedule,
                                          const std::string &where) {
                            const VirtualTrack vt = track(run, trace, schedule);
                            const double worst = check_virtual_identity(vt);
                            tallies.record("virtual-identity", worst <= kIdentityTolerance, worst, where);
                            const bool cardinality = std::all_of(vt.terms.begin(), vt.terms.end(),
                                                                 [M](int t) { return t == M - 1; });
                            tallies.record("virtual-cardinality", cardinality, 0.0, where);
                            tallies.record("gamma-hat-bookkeeping", vt.gamma_hat_mismatches == 0,
                                           static_cast<double>(vt.gamma_hat_mismatches), where);
                            tallies.record("gradient-accounting",
                                           run.gradients_consumed == K && run.gradients_in_flight == M - 1, 0.0,
                                           where);
                            return vt;
                        };

                        for (ScheduleKind kind : kSuiteSchedules)
                        {
                            const Problem &problem =
                                kind == ScheduleKind::AdaptiveNonconvex       ? static_cast<const Problem &>(*nonconvex)
                                : kind == ScheduleKind::AdaptiveHeterogeneous ? static_cast<const Problem &>(*hetero)
                                                                              : static_cast<const Problem &>(*convex);
                            if (kind == ScheduleKind::AdaptiveStronglyConvex && K < 3 * static_cast<Iteration>(M))
                            {
                                continue;
                            }
                            const std::string where = where_trace + " schedule=" + std::string(to_string(kind));
                            const StepSchedule schedule(kind, problem.constants(x0, M, K));
                            const RunRecord run = run_async(problem, trace, schedule, x0, ro);
                            ++report.configurations;
                            identity(run, schedule, where);

                            const auto &c = schedule.constants();
                            bool capped = true;
                            double worst_cap = 0.0;
                            for (const auto &row : run.rows)
                            {
                                const double cap = adaptive_cap(kind) / (c.L * static_cast<double>(row.tau));
                                worst_cap = std::max(worst_cap, row.gamma / cap);
                                capped = capped && row.gamma > 0 && row.gamma <= cap * (1 + 1e-12);
                            }
                            tallies.record("adaptive-cap", capped, worst_cap, where);

                            const auto gh = run.gamma_hat();
                            auto record_sum = [&](const char *name, const StepsizeSumCheck &chk) {
                                tallies.record(name, chk.holds, chk.holds ? 0.0 : chk.rhs - chk.lhs, where);
                            };
                            if (kind == ScheduleKind::AdaptiveConvex)
                                record_sum("stepsize-sum-convex", check_convex_stepsize_sum(gh, c));
                            else if (kind == ScheduleKind::AdaptiveNonconvex)
                                record_sum("stepsize-sum-nonconvex", check_nonconvex_stepsize_sum(gh, c));
                            else if (kind == ScheduleKind::AdaptiveStronglyConvex)
                                record_sum("stepsize-sum-strongly-convex", check_strongly_convex_stepsize_sum(gh, c));
                        }

                        // Constant stepsize with G-Lipschitz losses: |e_k| <= (M-1) gamma G.
                        ProblemConstants c = nonconvex->constants(x0, M, K);
                        c.B = 1.0;
                        const StepSchedule lipschitz(ScheduleKind::ConstLipschitz, c);
                        const RunRecord run = run_async(*nonconvex, trace, lipschitz, x0, ro);
                        ++report.configurations;
                        const std::string where = where_trace + " schedule=const-lipschitz";
                        const VirtualTrack vt = identity(run, lipschitz, where);
                        const double bound = (M - 1) * lipschitz.gamma(1, 1) * c.G;
                        const double worst = max_error_norm(vt);
                        tallies.record("error-norm-bound", worst <= bound * (1 + 1e-12) + 1e-300,
                                       bound > 0 ? worst / bound : worst, where);
                    }
                }
            }
        }
        report.invariants = std::move(tallies.list);
        report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return report;
    }

    json to_json(const CheckReport &r)
    {
        json inv = json::array();
        for (const auto &t : r.invariants)
        {
            inv.push_back({{"name", t.name},
                           {"passed", t.passed()},
                           {"checked", t.checked},
                           {"failed", t.failed},
                           {"worst", t.worst},
                           {"first_failure", t.first_failure}});
        }
        return {{"schema", kSummarySchema},
                {"command", "check"},
                {"configurations", r.configurations},
                {"passed", r.passed()},
                {"invariants", inv}};
    }
} // namespace asgd
