#include "asgd/virtual_iterates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace asgd
{
    VirtualTrack track(const RunRecord &run, const ArrivalTrace &trace, const StepSchedule &schedule)
    {
        require(!run.minibatch, "track: minibatch runs have no virtual sequence");
        require(run.has_history(), "track: run kept no iterate history");
        require(run.has_gradients(), "track: run was recorded without diagnostics");
        const Iteration K = trace.horizon();
        const int M = trace.num_workers;
        require(run.horizon() == K && run.num_workers == M, "track: run and trace disagree on K or M");
        require(static_cast<Iteration>(run.iterates.size()) == K + 1, "track: iterate history is incomplete");
        require(static_cast<Iteration>(run.gradients.size()) == K &&
                    static_cast<int>(run.initial_gradients.size()) == M,
                "track: gradient memo is incomplete");

        const auto Ms = static_cast<std::size_t>(M);
        const auto Ks = static_cast<std::size_t>(K);

        // gh per dispatch: initial_gh[m] for d = 0, gh[d-1] for d >= 1.
        VirtualTrack vt;
        vt.initial_gamma_hat.assign(Ms, std::nan(""));
        vt.gamma_hat.assign(Ks, std::nan(""));
        std::vector<Iteration> dispatch(Ms, 0);
        auto assign = [&](WorkerId m, Iteration d, double gamma) {
            (d == 0 ? vt.initial_gamma_hat[static_cast<std::size_t>(m)] : vt.gamma_hat[static_cast<std::size_t>(d - 1)]) =
                gamma;
        };
        for (Iteration k = 1; k <= K; ++k)
        {
            const WorkerId m = trace.entries[static_cast<std::size_t>(k - 1)].worker;
            require(m >= 0 && m < M, "track: trace names an unknown worker");
            auto &d = dispatch[static_cast<std::size_t>(m)];
            assign(m, d, run.rows[static_cast<std::size_t>(k - 1)].gamma);
            d = k;
        }
        for (WorkerId m = 0; m < M; ++m)
        {
            const Iteration d = dispatch[static_cast<std::size_t>(m)];
            assign(m, d, schedule.gamma(K, std::max<Iteration>(1, K - d)));
        }

        for (std::size_t m = 0; m < Ms; ++m)
        {
            vt.gamma_hat_mismatches += vt.initial_gamma_hat[m] != run.initial_gamma_hat[m];
        }
        for (std::size_t i = 0; i < Ks; ++i)
        {
            vt.gamma_hat_mismatches += vt.gamma_hat[i] != run.rows[i].gamma_hat;
        }

        auto gradient_of = [&](Iteration d, WorkerId m) -> const Vector & {
            return d == 0 ? run.initial_gradients[static_cast<std::size_t>(m)]
                          : run.gradients[static_cast<std::size_t>(d - 1)];
        };
        auto gamma_hat_of = [&](Iteration d, WorkerId m) {
            return d == 0 ? vt.initial_gamma_hat[static_cast<std::size_t>(m)]
                          : vt.gamma_hat[static_cast<std::size_t>(d - 1)];
        };

        Vector xhat = run.x0;
        for (WorkerId m = 0; m < M; ++m)
        {
            xhat -= gamma_hat_of(0, m) * gradient_of(0, m);
        }

        vt.xhat.reserve(Ks);
        vt.residual.reserve(Ks);
        vt.error_norm.reserve(Ks);
        vt.terms.reserve(Ks);
        std::fill(dispatch.begin(), dispatch.end(), 0);
        Vector rec(run.x0.size());
        for (Iteration k = 1; k <= K; ++k)
        {
            const WorkerId mk = trace.entries[static_cast<std::size_t>(k - 1)].worker;
            dispatch[static_cast<std::size_t>(mk)] = k;

            // After arrival k every other worker still holds the gradient dispatched at prev(k, m).
            rec.setZero();
            int terms = 0;
            for (WorkerId m = 0; m < M; ++m)
            {
                if (m == mk)
                {
                    continue;
                }
                const Iteration p = dispatch[static_cast<std::size_t>(m)];
                rec += gamma_hat_of(p, m) * gradient_of(p, m);
                ++terms;
            }

            const Vector e = run.iterates[static_cast<std::size_t>(k)] - xhat;
            const double en = e.norm();
            vt.xhat.push_back(xhat);
            vt.error_norm.push_back(en);
            vt.residual.push_back((e - rec).norm() / (1.0 + en));
            vt.terms.push_back(terms);

            xhat -= gamma_hat_of(k, mk) * gradient_of(k, mk);
        }
        return vt;
    }

    double check_virtual_identity(const VirtualTrack &vt)
    {
        double worst = 0.0;
        for (double r : vt.residual)
        {
            if (std::isnan(r))
            {
                return std::numeric_limits<double>::infinity();
            }
            worst = std::max(worst, r);
        }
        return worst;
    }

    double max_error_norm(const VirtualTrack &vt)
    {
        double worst = 0.0;
        for (double e : vt.error_norm)
        {
            worst = std::max(worst, e);
        }
        return worst;
    }
} // namespace asgd
