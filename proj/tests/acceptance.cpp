// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Values marked "oracle" are recomputed here from first principles (brute-force
// prev/next bookkeeping, closed-form step counts, a hand-written SGD loop) and
// compared against the library.

#include "asgd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace asgd;

namespace
{
    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    double seconds_since(std::chrono::steady_clock::time_point t0)
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    std::string fmt(double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return buf;
    }

    // Brute-force oracles ------------------------------------------------------------

    // prev(k, m) = max{j < k : m_j = m}, 0 if none. k is 1-based.
    Iteration oracle_prev(const std::vector<WorkerId> &order, Iteration k, WorkerId m)
    {
        for (Iteration j = k - 1; j >= 1; --j)
        {
            if (order[static_cast<std::size_t>(j - 1)] == m)
            {
                return j;
            }
        }
        return 0;
    }

    // next(k, m) = min{j >= k : m_j = m}, K + 1 if none within the horizon.
    Iteration oracle_next(const std::vector<WorkerId> &order, Iteration k, WorkerId m)
    {
        const auto K = static_cast<Iteration>(order.size());
        for (Iteration j = k; j <= K; ++j)
        {
            if (order[static_cast<std::size_t>(j - 1)] == m)
            {
                return j;
            }
        }
        return K + 1;
    }

    // Stepsize eventually applied to the gradient worker m dispatched at d.
    double oracle_gamma_hat(const std::vector<WorkerId> &order, const RunRecord &run, const StepSchedule &schedule,
                            Iteration d, WorkerId m)
    {
        const auto K = static_cast<Iteration>(order.size());
        const Iteration n = oracle_next(order, d + 1, m);
        if (n <= K)
        {
            return run.rows[static_cast<std::size_t>(n - 1)].gamma;
        }
        return schedule.gamma(K, std::max<Iteration>(1, K - d));
    }

    // max_k |e_k - sum_{m != m_k} gh g(x_prev(k,m))| / (1 + |e_k|), with x^ rebuilt from scratch.
    double oracle_identity(const std::vector<WorkerId> &order, const RunRecord &run, const StepSchedule &schedule,
                         int M, bool &cardinality_ok)
    {
        const auto K = static_cast<Iteration>(order.size());
        auto grad = [&](Iteration d, WorkerId m) -> const Vector & {
            return d == 0 ? run.initial_gradients[static_cast<std::size_t>(m)]
                          : run.gradients[static_cast<std::size_t>(d - 1)];
        };
        Vector xhat = run.x0;
        for (WorkerId m = 0; m < M; ++m)
        {
            xhat -= oracle_gamma_hat(order, run, schedule, 0, m) * grad(0, m);
        }
        double worst = 0.0;
        for (Iteration k = 1; k <= K; ++k)
        {
            const WorkerId mk = order[static_cast<std::size_t>(k - 1)];
            Vector rec = Vector::Zero(run.x0.size());
            int terms = 0;
            for (WorkerId m = 0; m < M; ++m)
            {
                if (m == mk)
                    continue;
                const Iteration p = oracle_prev(order, k, m);
                rec += oracle_gamma_hat(order, run, schedule, p, m) * grad(p, m);
                ++terms;
            }
            cardinality_ok = cardinality_ok && terms == M - 1;
            const Vector e = run.iterates[static_cast<std::size_t>(k)] - xhat;
            const double r = (e - rec).norm() / (1.0 + e.norm());
            worst = std::isnan(r) ? INFINITY : std::max(worst, r);
            xhat -= oracle_gamma_hat(order, run, schedule, k, mk) * grad(k, mk);
        }
        return worst;
    }

    // min over prefixes K of K*M - (sum_{k<K} tau(k) + sum_m tau(K, m)).
    std::int64_t oracle_budget_slack(const std::vector<WorkerId> &order, int M)
    {
        const auto Kmax = static_cast<Iteration>(order.size());
        std::int64_t slack = std::numeric_limits<std::int64_t>::max();
        for (Iteration K = 1; K <= Kmax; ++K)
        {
            std::int64_t lhs = 0;
            for (Iteration k = 1; k < K; ++k)
            {
                lhs += k - oracle_prev(order, k, order[static_cast<std::size_t>(k - 1)]);
            }
            for (WorkerId m = 0; m < M; ++m)
            {
                lhs += K - oracle_prev(order, K, m);
            }
            slack = std::min(slack, K * M - lhs);
        }
        return slack;
    }

    // Randomized configuration suite shared by criteria 1-3 --------------------------

    struct SuiteResult
    {
        int configurations = 0;
        double worst_identity = 0.0;
        bool cardinality = true;
        int traces = 0;
        std::int64_t min_budget_slack = std::numeric_limits<std::int64_t>::max();
        int convex_checked = 0, convex_failed = 0;
        int nonconvex_checked = 0, nonconvex_failed = 0;
        double convex_min_ratio = INFINITY, nonconvex_min_ratio = INFINITY; // lhs / rhs
        double seconds = 0.0;
    };

    ArrivalTrace suite_trace(int speed, int M, Iteration K, std::uint64_t seed)
    {
        SpeedModel model;
        model.seed = seed;
        std::vector<double> v;
        switch (speed)
        {
        case 0:
            for (int m = 0; m < M; ++m)
                v.push_back(1.0 + 0.3 * m);
            model.kind = FixedSpeeds{v};
            break;
        case 1:
            for (int m = 0; m < M; ++m)
                v.push_back(0.5 + m);
            model.kind = RandomSpeeds{ComputeDistribution::Exponential, v, 0.0};
            break;
        case 2:
            for (int m = 0; m < M; ++m)
                v.push_back(1.0 + 0.1 * m);
            model.kind = RandomSpeeds{ComputeDistribution::LogNormal, v, 1.5};
            break;
        case 3:
            model.kind = StragglerSpeeds{M, 1.0, 0, 25.0};
            break;
        default:
        {
            // Adversarial: the last worker never returns, the rest are random.
            Rng rng(seed * 7919 + 17);
            std::vector<WorkerId> order(static_cast<std::size_t>(K), 0);
            if (M > 1)
            {
                std::uniform_int_distribution<WorkerId> pick(0, M - 2);
                for (auto &w : order)
                    w = pick(rng);
            }
            return trace_from_order(order, M);
        }
        }
        return simulate_trace(model, K);
    }

    const SuiteResult &suite()
    {
        static const SuiteResult result = [] {
            SuiteResult r;
            const auto t0 = std::chrono::steady_clock::now();
            LeastSquaresOptions ls;
            ls.dim = 3;
            ls.samples = 24;
            ls.sigma = 0.7;
            ls.seed = 5;
            const auto convex = least_squares(ls);
            const auto nonconvex = bounded_nonconvex(3, 24, 6);
            const Vector x0 = Vector::Constant(3, -1.5);
            const ScheduleKind kinds[] = {ScheduleKind::AdaptiveConvex, ScheduleKind::AdaptiveStronglyConvex,
                                          ScheduleKind::AdaptiveNonconvex, ScheduleKind::AdaptiveHeterogeneous};
            for (int M : {1, 2, 5, 16})
            {
                const auto hetero = heterogeneous_quadratics(ls, M, M > 1 ? 0.4 : 0.0);
                for (Iteration K : {50, 500})
                {
                    for (int speed = 0; speed < 5; ++speed)
                    {
                        const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(M * 10 + speed) +
                                                   static_cast<std::uint64_t>(K);
                        const ArrivalTrace trace = suite_trace(speed, M, K, seed);
                        const auto order = trace.order();
                        ++r.traces;
                        r.min_budget_slack = std::min(r.min_budget_slack, oracle_budget_slack(order, M));
                        for (ScheduleKind kind : kinds)
                        {
                            const Problem &problem = kind == ScheduleKind::AdaptiveNonconvex
                                                         ? static_cast<const Problem &>(*nonconvex)
                                                     : kind == ScheduleKind::AdaptiveHeterogeneous
                                                         ? static_cast<const Problem &>(*hetero)
                                                         : static_cast<const Problem &>(*convex);
                            const StepSchedule schedule(kind, problem.constants(x0, M, K));
                            RunOptions o;
                            o.seed = seed;
                            o.diagnostics = true;
                            o.metrics_stride = 0;
                            const RunRecord run = run_async(problem, trace, schedule, x0, o);
                            ++r.configurations;
                            r.worst_identity = std::max(r.worst_identity, oracle_identity(order, run, schedule, M, r.cardinality));

                            const auto &c = schedule.constants();
                            double sum = 0.0;
                            for (Iteration k = 1; k <= K; ++k)
                            {
                                sum += oracle_gamma_hat(order, run, schedule, k, order[static_cast<std::size_t>(k - 1)]);
                            }
                            const double Kd = static_cast<double>(K);
                            if (kind == ScheduleKind::AdaptiveConvex)
                            {
                                const double rhs = std::min(Kd / (36 * c.L * M), c.B * std::sqrt(Kd) / (3 * c.sigma));
                                ++r.convex_checked;
                                r.convex_failed += !(sum >= rhs);
                                r.convex_min_ratio = std::min(r.convex_min_ratio, sum / rhs);
                            }
                            else if (kind == ScheduleKind::AdaptiveNonconvex)
                            {
                                const double gmax = std::min(1.0 / (2 * M * c.L), std::sqrt(c.Delta / (Kd * c.L * c.sigma * c.sigma)));
                                const double rhs = Kd * gmax / 9;
                                ++r.nonconvex_checked;
                                r.nonconvex_failed += !(sum >= rhs);
                                r.nonconvex_min_ratio = std::min(r.nonconvex_min_ratio, sum / rhs);
                            }
                        }
                    }
                }
            }
            r.seconds = seconds_since(t0);
            return r;
        }();
        return result;
    }

    Outcome criterion1()
    {
        const auto &s = suite();
        // The library's own invariant suite must agree with the oracle.
        const CheckReport lib = run_check(CheckOptions{});
        const bool lib_ok = lib.at("virtual-identity").passed() && lib.at("virtual-cardinality").passed();
        const bool pass = s.configurations >= 100 && s.worst_identity <= 1e-10 && s.cardinality && lib_ok &&
                          s.seconds + lib.seconds < 60.0;
        return {pass, std::to_string(s.configurations) + " oracle configs + " + std::to_string(lib.configurations) +
                          " library configs, max residual " + fmt(std::max(s.worst_identity, lib.at("virtual-identity").worst)) +
                          " (tol 1e-10), M-1 terms " + (s.cardinality ? "ok" : "WRONG") + ", " +
                          fmt(s.seconds + lib.seconds) + " s (limit 60 s)"};
    }

    Outcome criterion2()
    {
        const auto &s = suite();
        const CheckReport lib = run_check(CheckOptions{});
        const bool pass = s.min_budget_slack >= 0 && lib.at("delay-budget").passed();
        return {pass, std::to_string(s.traces) + " oracle traces (every prefix) + " +
                          std::to_string(lib.at("delay-budget").checked) + " library traces, min slack KM - lhs = " +
                          std::to_string(s.min_budget_slack)};
    }

    Outcome criterion3()
    {
        const auto &s = suite();
        const CheckReport lib = run_check(CheckOptions{});
        const bool pass = s.convex_failed == 0 && s.nonconvex_failed == 0 && s.convex_checked > 0 &&
                          s.nonconvex_checked > 0 && lib.at("stepsize-sum-convex").passed() &&
                          lib.at("stepsize-sum-nonconvex").passed();
        return {pass, "convex " + std::to_string(s.convex_checked - s.convex_failed) + "/" +
                          std::to_string(s.convex_checked) + " (min lhs/rhs " + fmt(s.convex_min_ratio) +
                          "), nonconvex " + std::to_string(s.nonconvex_checked - s.nonconvex_failed) + "/" +
                          std::to_string(s.nonconvex_checked) + " (min lhs/rhs " + fmt(s.nonconvex_min_ratio) +
                          "), library suite " + (lib.at("stepsize-sum-convex").passed() && lib.at("stepsize-sum-nonconvex").passed() ? "agrees" : "DISAGREES")};
    }

    // Rate experiments --------------------------------------------------------------

    // Least squares with a log-spread spectrum (condition number 1e4) and a planted
    // solution with equal energy per direction: the regime where the weighted
    // average of SGD exhibits the sigma B / sqrt(K) statistical rate.
    LeastSquaresOptions rate_problem(double sigma)
    {
        LeastSquaresOptions o;
        o.dim = 50;
        o.samples = 500;
        o.sigma = sigma;
        o.conditioning = 1e4;
        o.planted = 0.1;
        o.seed = 1;
        return o;
    }

    SpeedModel rate_speeds(std::uint64_t seed)
    {
        return SpeedModel{RandomSpeeds{ComputeDistribution::Exponential, {1, 1, 1, 1, 2, 2, 3, 4}, 0.0}, seed};
    }

    const std::vector<Iteration> kRateHorizons{512, 1024, 2048, 4096, 8192, 16384};

    double slope(const std::vector<double> &x, const std::vector<double> &y)
    {
        const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
        }
        return sxy / sxx;
    }

    Outcome criterion4()
    {
        const auto t0 = std::chrono::steady_clock::now();
        const auto problem = least_squares(rate_problem(1.0));
        const Vector x0 = Vector::Zero(problem->dim());
        const int seeds = 20;
        std::vector<double> lk, lg;
        bool noise_dominated = true;
        std::string levels;
        for (Iteration K : kRateHorizons)
        {
            double total = 0.0;
            for (int s = 0; s < seeds; ++s)
            {
                const auto seed = static_cast<std::uint64_t>(s);
                const ArrivalTrace trace = simulate_trace(rate_speeds(seed), K);
                const StepSchedule schedule(ScheduleKind::AdaptiveConvex, problem->constants(x0, 8, K));
                const auto &c = schedule.constants();
                noise_dominated = noise_dominated && c.B / (c.sigma * std::sqrt(double(K))) < 1.0 / (4 * c.M * c.L);
                RunOptions o;
                o.seed = seed;
                o.retention = Retention::MetricsOnly;
                o.metrics_stride = 0;
                const RunRecord run = run_async(*problem, trace, schedule, x0, o);
                Rng unused(0);
                total += problem->gap(select_output(OutputRule::WeightedAverage, run, 0.0, unused));
            }
            lk.push_back(std::log(static_cast<double>(K)));
            lg.push_back(std::log(total / seeds));
            levels += (levels.empty() ? "" : " ") + fmt(total / seeds);
        }
        const double b = slope(lk, lg);
        const double elapsed = seconds_since(t0);
        const bool pass = std::abs(b + 0.5) <= 0.15 && elapsed <= 300.0 && noise_dominated;
        return {pass, "slope " + fmt(b) + " (target -0.5 +- 0.15), B/(sigma sqrt K) branch active: " +
                          (noise_dominated ? "yes" : "NO") + ", E gap over K=2^9..2^14: " + levels + ", " +
                          fmt(elapsed) + " s"};
    }

    // Weighted-average gap of the sigma = 0 version, one trace per K (seed 0).
    std::vector<double> noiseless_gaps(const Problem &problem, ScheduleKind kind, OutputRule rule,
                                       std::vector<RunRecord> *runs = nullptr)
    {
        const Vector x0 = Vector::Zero(problem.dim());
        std::vector<double> out;
        for (Iteration K : kRateHorizons)
        {
            const ArrivalTrace trace = simulate_trace(rate_speeds(0), K);
            const StepSchedule schedule(kind, problem.constants(x0, 8, K));
            RunOptions o;
            o.seed = 0;
            const RunRecord run = run_async(problem, trace, schedule, x0, o);
            out.push_back(evaluate_output(run, problem, rule, 0.0).output_gap);
            if (runs)
                runs->push_back(run);
        }
        return out;
    }

    Outcome criterion5()
    {
        const auto problem = least_squares(rate_problem(0.0));
        const auto gaps = noiseless_gaps(*problem, ScheduleKind::AdaptiveConvex, OutputRule::WeightedAverage);
        const double floor = 1e-13 * std::max(1.0, problem->gap(Vector::Zero(problem->dim())));
        bool pass = true;
        std::string ratios;
        for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
        {
            if (gaps[i + 1] < floor)
                break;
            const double r = gaps[i] / gaps[i + 1];
            pass = pass && r >= 1.8;
            ratios += (ratios.empty() ? "" : " ") + fmt(r);
        }
        return {pass, "gap ratio per doubling of K (need >= 1.8): " + ratios + ", final gap " + fmt(gaps.back())};
    }

    // Equal wall-clock comparison at M = 40 ----------------------------------------

    struct Curve
    {
        double final_gap = 0.0;
        double worst_spike = 1.0; // max_k gap(x_k) / min_{j<k} gap(x_j)
        bool diverged = false;
    };

    Curve curve_of(const RunRecord &run, const Problem &problem)
    {
        Curve c;
        c.final_gap = problem.gap(run.final_x);
        double best = problem.gap(run.x0);
        for (const auto &row : run.rows)
        {
            if (std::isfinite(row.fgap))
            {
                c.worst_spike = std::max(c.worst_spike, row.fgap / best);
                best = std::min(best, row.fgap);
            }
        }
        return c;
    }

    Outcome criterion6()
    {
        const int M = 40;
        LeastSquaresOptions ls;
        ls.dim = 20;
        ls.samples = 400;
        ls.noise = NoiseMode::RowSampling;
        ls.seed = 3;
        const auto problem = least_squares(ls);
        const Vector x0 = Vector::Zero(problem->dim());
        std::vector<double> means;
        for (int m = 0; m < M; ++m)
            means.push_back(1.0 + 0.25 * m);
        const SpeedModel model{RandomSpeeds{ComputeDistribution::LogNormal, means, 0.5}, 42};
        const double S = 400.0;
        const ArrivalTrace trace = simulate_until(model, S);
        const auto rounds_t = simulate_sync_rounds(model, S);
        const Iteration K = trace.horizon();
        const auto R = static_cast<Iteration>(rounds_t.size());
        const double L = problem->L();

        RunOptions o;
        o.seed = 9;
        o.retention = Retention::MetricsOnly;
        o.metrics_stride = std::max<Iteration>(1, K / 400);

        const StepSchedule adaptive(ScheduleKind::AdaptiveConvex, problem->constants(x0, M, K));
        const Curve ad = curve_of(run_async(*problem, trace, adaptive, x0, o), *problem);

        const double grid[] = {1.0 / L, 1.0 / (4 * L), 1.0 / (16 * L), 1.0 / (64 * L)};
        Curve best_const{INFINITY, 1.0, true};
        double best_const_gamma = 0.0, worst_const_spike = 1.0;
        for (double g : grid)
        {
            Curve c;
            try
            {
                c = curve_of(run_async(*problem, trace, StepSchedule::constant(g), x0, o), *problem);
            }
            catch (const DivergenceError &)
            {
                c = Curve{INFINITY, INFINITY, true};
            }
            worst_const_spike = std::max(worst_const_spike, c.worst_spike);
            if (c.final_gap < best_const.final_gap)
            {
                best_const = c;
                best_const_gamma = g * L;
            }
        }

        RunOptions mo = o;
        mo.metrics_stride = 1;
        double mini = INFINITY, mini_gamma = 0.0;
        for (double g : grid)
        {
            try
            {
                const double gap = curve_of(run_minibatch(*problem, M, R, g, x0, mo, rounds_t), *problem).final_gap;
                if (gap < mini)
                {
                    mini = gap;
                    mini_gamma = g * L;
                }
            }
            catch (const DivergenceError &)
            {
            }
        }

        const bool qualitative = best_const.final_gap > ad.final_gap || best_const.worst_spike > 10.0;
        // Stable: no iterate more than 1.5x above the best gap seen so far.
        const bool stable = ad.worst_spike <= 1.5;
        const bool pass = ad.final_gap <= mini && std::isfinite(ad.final_gap) && stable;
        return {pass, "S=" + fmt(S) + ": async K=" + std::to_string(K) + ", minibatch R=" + std::to_string(R) +
                          "; final F-F*: adaptive " + fmt(ad.final_gap) + " (spike " + fmt(ad.worst_spike) +
                          "), best constant " + fmt(best_const.final_gap) + " at gamma L=" + fmt(best_const_gamma) +
                          " (spike " + fmt(best_const.worst_spike) + ", worst grid spike " + fmt(worst_const_spike) +
                          "), minibatch " + fmt(mini) + " at gamma L=" + fmt(mini_gamma) +
                          "; constant slower-or-spiky: " + (qualitative ? "yes" : "no") +
                          "; asserted adaptive <= minibatch and adaptive spike <= 1.5"};
    }

    Outcome criterion7()
    {
        LeastSquaresOptions ls;
        ls.dim = 10;
        ls.samples = 100;
        ls.sigma = 1.0;
        ls.seed = 7;
        const auto problem = least_squares(ls);
        const Vector x0 = Vector::Zero(problem->dim());
        const SpeedModel straggler{FixedSpeeds{{1.0, 1e6}}, 0};
        const SpeedModel alone{FixedSpeeds{{1.0}}, 0};
        // Ties go to worker 0, so the slow worker arrives at k = 10^6 + 1.
        const Iteration K = 1'000'001;
        const ArrivalTrace t2 = simulate_trace(straggler, K);
        const ArrivalTrace t1 = simulate_trace(alone, K - 1);
        Iteration slow_k = 0, slow_tau = 0;
        for (const auto &e : t2.entries)
            if (e.worker == 1)
            {
                slow_k = e.k;
                slow_tau = e.tau;
            }

        double worst = 0.0;
        std::string detail;
        for (std::uint64_t seed : {1, 2, 3})
        {
            RunOptions o;
            o.seed = seed;
            o.retention = Retention::MetricsOnly;
            o.metrics_stride = 0;
            const StepSchedule s2(ScheduleKind::AdaptiveConvex, problem->constants(x0, 2, K));
            const StepSchedule s1(ScheduleKind::AdaptiveConvex, problem->constants(x0, 1, K - 1));
            Rng unused(0);
            const double g2 = problem->gap(select_output(OutputRule::WeightedAverage, run_async(*problem, t2, s2, x0, o), 0.0, unused));
            const double g1 = problem->gap(select_output(OutputRule::WeightedAverage, run_async(*problem, t1, s1, x0, o), 0.0, unused));
            worst = std::max(worst, g2 / g1);
            detail += (detail.empty() ? "" : ", ") + fmt(g2 / g1);
        }
        const bool pass = slow_k == K && slow_tau == K && worst <= 2.0;
        return {pass, "slow worker arrives once at k=" + std::to_string(slow_k) + " with tau=" +
                          std::to_string(slow_tau) + "; gap ratio straggler/fast-only per seed: " + detail +
                          " (need <= 2)"};
    }

    Outcome criterion8()
    {
        const LeastSquaresOptions ls = rate_problem(0.0);
        const auto homogeneous = least_squares(ls);
        std::vector<std::vector<double>> levels;
        bool exact = true;
        for (double zeta : {0.0, 0.3, 1.0})
        {
            const auto problem = heterogeneous_quadratics(ls, 8, zeta);
            const Vector x0 = Vector::Zero(problem->dim());
            std::vector<double> lv;
            for (Iteration K : kRateHorizons)
            {
                double total = 0.0;
                for (std::uint64_t seed : {0, 1, 2})
                {
                    const ArrivalTrace trace = simulate_trace(rate_speeds(seed), K);
                    const StepSchedule schedule(ScheduleKind::AdaptiveHeterogeneous, problem->constants(x0, 8, K));
                    RunOptions o;
                    o.seed = seed;
                    const RunRecord run = run_async(*problem, trace, schedule, x0, o);
                    total += evaluate_output(run, *problem, OutputRule::GammaSample, 0.0).output_gradnorm2;
                    if (zeta == 0.0)
                    {
                        const StepSchedule hs(ScheduleKind::AdaptiveHeterogeneous, homogeneous->constants(x0, 8, K));
                        const RunRecord ref = run_async(*homogeneous, trace, hs, x0, o);
                        for (std::size_t i = 0; i < ref.iterates.size(); ++i)
                            exact = exact && ref.iterates[i] == run.iterates[i];
                    }
                }
                lv.push_back(total / 3);
            }
            levels.push_back(lv);
        }
        const std::size_t n = kRateHorizons.size();
        bool monotone = true;
        for (std::size_t i = 0; i < n; ++i)
            monotone = monotone && levels[0][i] < levels[1][i] && levels[1][i] < levels[2][i];
        // Last doubling: zeta = 0 keeps improving, zeta > 0 has flattened out.
        auto last_drop = [&](const std::vector<double> &lv) { return lv[n - 2] / lv[n - 1]; };
        const bool plateau = last_drop(levels[0]) >= 1.8 && last_drop(levels[1]) <= 1.5 && last_drop(levels[2]) <= 1.5;
        const bool pass = exact && monotone && plateau;
        return {pass, "E|grad F|^2 at K=2^14: zeta 0 -> " + fmt(levels[0][n - 1]) + ", 0.3 -> " + fmt(levels[1][n - 1]) +
                          ", 1.0 -> " + fmt(levels[2][n - 1]) + "; last-doubling drop " + fmt(last_drop(levels[0])) +
                          " / " + fmt(last_drop(levels[1])) + " / " + fmt(last_drop(levels[2])) +
                          "; monotone in zeta at every K: " + (monotone ? "yes" : "NO") +
                          "; zeta=0 bitwise equal to the homogeneous run: " + (exact ? "yes" : "NO")};
    }

    Outcome criterion9()
    {
        RunConfig cfg;
        cfg.speed.model = SpeedModel{FixedSpeeds{{1, 1, 1, 10}}, 0};
        cfg.duration = 100.0;
        cfg.problem.dim = 5;
        cfg.problem.samples = 50;
        cfg.problem.sigma = 0.1;
        const CompareReport r = compare(cfg);
        // Oracle: integer division of the budget by each s_m.
        const std::int64_t k_async = 100 / 1 + 100 / 1 + 100 / 1 + 100 / 10;
        const std::int64_t k_mini = std::min<std::int64_t>({100 / 1, 100 / 10});
        const double speedup = (10.0 / 1 + 10.0 / 1 + 10.0 / 1 + 10.0 / 10) / 4;
        const bool pass = r.predicted.async_steps == k_async && r.predicted.minibatch_steps == k_mini &&
                          r.async_steps_simulated == k_async && r.speedup == speedup && speedup == 7.75 &&
                          r.step_ratio == 7.75 && !r.degenerate;
        return {pass, "K_async=" + std::to_string(r.predicted.async_steps) + " (simulated " +
                          std::to_string(r.async_steps_simulated) + ", oracle " + std::to_string(k_async) +
                          "), K_mini=" + std::to_string(r.predicted.minibatch_steps) + " (oracle " +
                          std::to_string(k_mini) + "), speedup " + fmt(r.speedup) + ", K_async/(M K_mini) " +
                          fmt(r.step_ratio) + " (exact 7.75)"};
    }

    Outcome criterion10()
    {
        LeastSquaresOptions ls;
        ls.dim = 8;
        ls.samples = 64;
        ls.sigma = 0.5;
        ls.seed = 10;
        const auto problem = least_squares(ls);
        const Vector x0 = Vector::Constant(problem->dim(), 1.0);
        const Iteration K = 300;
        const ArrivalTrace trace = simulate_trace(SpeedModel{FixedSpeeds{{1.0}}, 0}, K);
        int identical = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed)
        {
            const StepSchedule schedule(ScheduleKind::AdaptiveConvex, problem->constants(x0, 1, K));
            RunOptions o;
            o.seed = seed;
            const RunRecord run = run_async(*problem, trace, schedule, x0, o);

            // Sequential SGD reference loop.
            Rng noise = make_stream(seed, StreamKind::GradientNoise, 0);
            Vector x = x0;
            bool same = true;
            for (Iteration k = 1; k <= K; ++k)
            {
                const Vector g = problem->stochastic_gradient(x, 0, noise);
                x -= schedule.gamma(k, 1) * g;
                const Vector &y = run.iterates[static_cast<std::size_t>(k)];
                same = same && std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
            }
            identical += same;
        }
        return {identical == 10, std::to_string(identical) + "/10 seeds bitwise identical over K=" + std::to_string(K)};
    }
} // namespace

int main()
{
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
        {"1 virtual-iterate identity", criterion1},
        {"2 delay budget", criterion2},
        {"3 stepsize-sum lower bounds", criterion3},
        {"4 statistical rate slope", criterion4},
        {"5 optimization-term rate", criterion5},
        {"6 equal-time ordering", criterion6},
        {"7 straggler robustness", criterion7},
        {"8 heterogeneous plateau", criterion8},
        {"9 speedup model", criterion9},
        {"10 single-worker degeneracy", criterion10},
    };
    int failed = 0;
    for (const auto &[name, fn] : criteria)
    {
        Outcome out;
        try
        {
            out = fn();
        }
        catch (const std::exception &e)
        {
            out = {false, std::string("exception: ") + e.what()};
        }
        failed += !out.pass;
        std::cout << (out.pass ? "PASS " : "FAIL ") << name << ": " << out.detail << std::endl;
    }
    std::cout << (failed == 0 ? "all acceptance criteria pass" : std::to_string(failed) + " criteria FAILED") << '\n';
    return failed == 0 ? 0 : 1;
}
