// asgd: simulate, compare, sweep, check and live runs of asynchronous SGD.
//
// Precedence for every setting: command-line flag > ASYNC_SGD_SEED (seed only)
// > config file > built-in default.
// Exit codes: 0 ok, 1 invariant failure, 2 usage, config or run error.

#include "asgd/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace
{
    struct Overrides
    {
        std::string config;
        std::optional<asgd::Iteration> horizon;
        std::optional<double> duration;
        std::optional<std::uint64_t> seed;
        std::optional<int> repetitions;
        std::optional<std::string> schedule;
        std::optional<std::string> out_dir;
        std::optional<std::string> prefix;
        std::optional<int> threads;
        bool diagnostics = false;
    };

    void add_run_options(CLI::App *cmd, Overrides &o)
    {
        cmd->add_option("-c,--config", o.config, "JSON run configuration");
        cmd->add_option("-K,--horizon", o.horizon, "number of iterations K")->check(CLI::PositiveNumber);
        cmd->add_option("-S,--duration", o.duration, "wall-clock budget S in simulated seconds")
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--seed", o.seed, "base seed");
        cmd->add_option("--repetitions", o.repetitions, "runs per schedule")->check(CLI::PositiveNumber);
        cmd->add_option("--schedule", o.schedule, "replace the configured schedules with this tag");
        cmd->add_option("--out-dir", o.out_dir, "directory for CSV and JSON output");
        cmd->add_option("--prefix", o.prefix, "output file prefix");
        cmd->add_option("--threads", o.threads, "sweep worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
        cmd->add_flag("--diagnostics", o.diagnostics, "record gradients and verify the virtual-iterate identity");
    }

    asgd::RunConfig resolve(const Overrides &o)
    {
        asgd::RunConfig cfg = o.config.empty() ? asgd::parse_config(R"({"schema": 1})") : asgd::load_config(o.config);
        if (const char *env = std::getenv("ASYNC_SGD_SEED"))
        {
            try
            {
                cfg.seed = std::stoull(env);
            }
            catch (const std::exception &)
            {
                throw asgd::ConfigError("ASYNC_SGD_SEED", "not an unsigned integer: '" + std::string(env) + "'");
            }
        }
        if (o.horizon)
            cfg.horizon = *o.horizon;
        if (o.duration)
            cfg.duration = *o.duration;
        if (o.seed)
            cfg.seed = *o.seed;
        if (o.repetitions)
            cfg.repetitions = *o.repetitions;
        if (o.out_dir)
            cfg.out_dir = *o.out_dir;
        if (o.prefix)
            cfg.prefix = *o.prefix;
        if (o.threads)
            cfg.threads = *o.threads;
        if (o.diagnostics)
        {
            cfg.diagnostics = true;
            cfg.retention = asgd::Retention::Full;
        }
        if (o.schedule)
        {
            const auto kind = asgd::parse_schedule_kind(*o.schedule);
            if (!kind || *kind == asgd::ScheduleKind::Constant)
            {
                throw asgd::ConfigError("--schedule", "unknown or non-adaptive schedule tag '" + *o.schedule + "'");
            }
            asgd::ScheduleConfig sc;
            sc.kind = *kind;
            cfg.schedules = {sc};
        }
        return cfg;
    }

    void print_check(const asgd::CheckReport &report)
    {
        for (const auto &t : report.invariants)
        {
            std::cout << (t.passed() ? "PASS " : "FAIL ") << t.name << " checked=" << t.checked
                      << " failed=" << t.failed << " worst=" << t.worst;
            if (!t.first_failure.empty())
            {
                std::cout << " first_failure=[" << t.first_failure << "]";
            }
            std::cout << '\n';
        }
        std::cout << report.configurations << " runs in " << report.seconds << " s: "
                  << (report.passed() ? "all invariants hold" : "INVARIANT FAILURE") << '\n';
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Asynchronous SGD simulator under arbitrary delays"};
    app.require_subcommand(1);

    Overrides simulate_o, compare_o, sweep_o, live_o;
    auto *simulate = app.add_subcommand("simulate", "run every schedule for each repetition");
    add_run_options(simulate, simulate_o);
    auto *compare = app.add_subcommand("compare", "async against minibatch SGD at equal wall-clock time");
    add_run_options(compare, compare_o);
    auto *sweep = app.add_subcommand("sweep", "parallel repetitions with mean and standard error");
    add_run_options(sweep, sweep_o);
    auto *live = app.add_subcommand("live", "real threads against a locked parameter vector");
    add_run_options(live, live_o);

    asgd::CheckOptions check_o;
    std::string inject;
    std::string check_json;
    auto *check = app.add_subcommand("check", "invariant suite over randomized configurations");
    check->add_option("--seeds", check_o.seeds, "seeds per configuration")->check(CLI::PositiveNumber);
    check->add_option("--base-seed", check_o.base_seed, "first seed");
    check->add_option("--workers", check_o.workers, "worker counts M")->check(CLI::PositiveNumber);
    check->add_option("--horizons", check_o.horizons, "horizons K")->check(CLI::PositiveNumber);
    check->add_option("--inject-bug", inject, "deliberate bookkeeping bug")
        ->check(CLI::IsMember({"off-by-one-prev"}));
    check->add_option("--json", check_json, "also write the report as JSON");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        if (*check)
        {
            if (inject == "off-by-one-prev")
            {
                check_o.fault = asgd::Fault::OffByOnePrev;
            }
            const auto report = asgd::run_check(check_o);
            print_check(report);
            if (!check_json.empty())
            {
                std::ofstream(check_json) << asgd::to_json(report).dump(2) << '\n';
            }
            return report.passed() ? 0 : 1;
        }

        asgd::CommandResult result;
        if (*simulate)
            result = asgd::cmd_simulate(resolve(simulate_o));
        else if (*compare)
            result = asgd::cmd_compare(resolve(compare_o));
        else if (*sweep)
            result = asgd::cmd_sweep(resolve(sweep_o));
        else
            result = asgd::cmd_live(resolve(live_o));
        std::cout << result.summary.dump(2) << '\n';
        return result.exit_code;
    }
    catch (const asgd::ConfigError &e)
    {
        std::cerr << "asgd: config error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "asgd: " << e.what() << '\n';
        return 2;
    }
}
