#pragma once

#include "asgd/problems.hpp"
#include "asgd/run_record.hpp"
#include "asgd/scheduler.hpp"
#include "asgd/schedules.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asgd
{
    /// Malformed or semantically invalid run configuration. `field` is a dotted
    /// path such as "problem.d" (empty for syntax errors, which carry line/column).
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(std::string field, const std::string &what)
            : std::runtime_error(field.empty() ? what : field + ": " + what), m_field(std::move(field)) {}

        const std::string &field() const noexcept { return m_field; }

    private:
        std::string m_field;
    };

    enum class ProblemKind
    {
        LeastSquares,
        BoundedNonconvex,
        HeterogeneousQuadratics,
    };

    struct ProblemConfig
    {
        ProblemKind kind = ProblemKind::LeastSquares;
        int dim = 10;
        int samples = 100;
        double sigma = 1.0;
        NoiseMode noise = NoiseMode::Additive;
        double zeta = 0.0;
        double conditioning = 1.0;
        double planted = 0.0;
        std::uint64_t seed = 0;
        std::string data_csv; // least squares on external data when non-empty
    };

    struct SpeedConfig
    {
        enum class Source
        {
            Model, // simulate a SpeedModel
            Order, // explicit arrival order
            TraceCsv,
        };
        Source source = Source::Model;
        SpeedModel model{FixedSpeeds{{1.0}}, 0};
        std::vector<WorkerId> order;
        std::string trace_csv;
        int workers = 1; // for Order and TraceCsv

        int num_workers() const { return source == Source::Model ? model.num_workers() : workers; }
    };

    /// Optional replacements for the analytic problem constants.
    struct ConstantOverrides
    {
        std::optional<double> L, mu, G, sigma, B, Delta;

        void apply(ProblemConstants &c) const;
    };

    struct ScheduleConfig
    {
        ScheduleKind kind = ScheduleKind::AdaptiveConvex;
        double gamma = 0.0; // Constant only
        ConstantOverrides overrides;
        std::optional<OutputRule> output_rule;
        std::string label; // defaults to the tag (with gamma for constants)

        OutputRule rule() const { return output_rule.value_or(default_output_rule(kind)); }
    };

    struct RunConfig
    {
        ProblemConfig problem;
        SpeedConfig speed;
        std::vector<ScheduleConfig> schedules{ScheduleConfig{}};
        std::optional<Iteration> horizon;  // K
        std::optional<double> duration;    // S (wall-clock seconds)
        std::vector<Iteration> sweep_horizons; // sweep: one block of repetitions per K
        std::optional<Vector> x0;          // zeros when absent
        double x0_fill = 0.0;
        int repetitions = 1;
        std::uint64_t seed = 0;
        bool diagnostics = false;
        Retention retention = Retention::Full;
        Iteration metrics_stride = 1;
        std::vector<double> minibatch_gammas; // compare: tuned over this grid (default {1,1/2,1/4,1/8}/L)
        int threads = 0;                      // sweep parallelism, 0 = hardware concurrency
        std::string out_dir = ".";
        std::string prefix = "run";
    };

    /// Parses and validates a JSON run configuration ("schema": 1). Unknown keys
    /// are rejected.
    RunConfig parse_config(const std::string &text);
    RunConfig load_config(const std::string &path);

    std::string label_of(const ScheduleConfig &s);
} // namespace asgd
