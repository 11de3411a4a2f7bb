#include "asgd/config.hpp"

#include "asgd/csv.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace asgd
{
    using nlohmann::json;

    void ConstantOverrides::apply(ProblemConstants &c) const
    {
        if (L) c.L = *L;
        if (mu) c.mu = *mu;
        if (G) c.G = *G;
        if (sigma) c.sigma = *sigma;
        if (B) c.B = *B;
        if (Delta) c.Delta = *Delta;
    }

    std::string label_of(const ScheduleConfig &s)
    {
        if (!s.label.empty())
        {
            return s.label;
        }
        std::string out(to_string(s.kind));
        if (s.kind == ScheduleKind::Constant)
        {
            out += "-" + csv::format(s.gamma);
        }
        return out;
    }

    namespace
    {
        /// One JSON object; every key must be consumed before finish().
        class Section
        {
        public:
            Section(const json &j, std::string path) : m_j(j), m_path(std::move(path))
            {
                if (!j.is_object())
                {
                    throw ConfigError(m_path, "expected an object");
                }
            }

            bool has(const std::string &key) const { return m_j.contains(key); }

            template <class T>
            std::optional<T> get(const std::string &key)
            {
                m_seen.insert(key);
                if (!m_j.contains(key))
                {
                    return std::nullopt;
                }
                const json &v = m_j.at(key);
                try
                {
                    if constexpr (std::is_same_v<T, double>)
                    {
                        if (!v.is_number())
                        {
                            throw ConfigError(field(key), "expected a number");
                        }
                    }
                    else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>)
                    {
                        if (!v.is_number_integer())
                        {
                            throw ConfigError(field(key), "expected an integer");
                        }
                        if constexpr (std::is_unsigned_v<T>)
                        {
                            if (v.is_number_integer() && !v.is_number_unsigned())
                            {
                                throw ConfigError(field(key), "expected a non-negative integer");
                            }
                        }
                    }
                    return v.get<T>();
                }
                catch (const json::exception &e)
                {
                    throw ConfigError(field(key), e.what());
                }
            }

            template <class T>
            T get_or(const std::string &key, T fallback)
            {
                return get<T>(key).value_or(fallback);
            }

            const json *raw(const std::string &key)
            {
                m_seen.insert(key);
                return m_j.contains(key) ? &m_j.at(key) : nullptr;
            }

            std::string field(const std::string &key) const { return m_path.empty() ? key : m_path + "." + key; }

            void finish() const
            {
                for (const auto &[key, value] : m_j.items())
                {
                    if (!m_seen.contains(key))
                    {
                        throw ConfigError(field(key), "unknown key");
                    }
                }
            }

        private:
            const json &m_j;
            std::string m_path;
            std::set<std::string> m_seen;
        };

        template <class T>
        std::vector<T> number_list(const json &v, const std::string &path)
        {
            if (!v.is_array())
            {
                throw ConfigError(path, "expected an array");
            }
            std::vector<T> out;
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                const bool ok = std::is_integral_v<T> ? v[i].is_number_integer() : v[i].is_number();
                if (!ok)
                {
                    throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
                }
                out.push_back(v[i].get<T>());
            }
            return out;
        }

        void check(bool ok, const std::string &field, const std::string &what)
        {
            if (!ok)
            {
                throw ConfigError(field, what);
            }
        }

        ProblemConfig parse_problem(const json &j)
        {
            Section s(j, "problem");
            ProblemConfig p;
            const auto kind = s.get_or<std::string>("kind", "least_squares");
            if (kind == "least_squares")
                p.kind = ProblemKind::LeastSquares;
            else if (kind == "bounded_nonconvex")
                p.kind = ProblemKind::BoundedNonconvex;
            else if (kind == "heterogeneous_quadratics")
                p.kind = ProblemKind::HeterogeneousQuadratics;
            else
                throw ConfigError("problem.kind", "unknown problem '" + kind + "'");

            p.dim = s.get_or<int>("d", p.dim);
            p.samples = s.get_or<int>("n", p.samples);
            p.sigma = s.get_or<double>("sigma", p.sigma);
            p.zeta = s.get_or<double>("zeta", p.zeta);
            p.conditioning = s.get_or<double>("conditioning", p.conditioning);
            p.planted = s.get_or<double>("planted", p.planted);
            p.seed = s.get_or<std::uint64_t>("seed", p.seed);
            p.data_csv = s.get_or<std::string>("data_csv", "");
            const auto noise = s.get_or<std::string>("noise", "additive");
            if (noise == "additive")
                p.noise = NoiseMode::Additive;
            else if (noise == "row")
                p.noise = NoiseMode::RowSampling;
            else
                throw ConfigError("problem.noise", "expected 'additive' or 'row'");
            s.finish();

            check(p.dim >= 1, "problem.d", "must be >= 1");
            check(p.samples >= 1, "problem.n", "must be >= 1");
            check(p.sigma >= 0, "problem.sigma", "must be >= 0");
            check(p.zeta >= 0, "problem.zeta", "must be >= 0");
            check(p.conditioning >= 1, "problem.conditioning", "must be >= 1");
            return p;
        }

        SpeedConfig parse_speed(const json &j)
        {
            Section s(j, "speed");
            SpeedConfig c;
            const auto kind = s.get<std::string>("kind");
            check(kind.has_value(), "speed.kind", "missing (fixed, random, straggler, order or trace_csv)");
            c.model.seed = s.get_or<std::uint64_t>("seed", 0);
            if (*kind == "fixed")
            {
                const json *secs = s.raw("seconds");
                check(secs != nullptr, "speed.seconds", "missing");
                c.model.kind = FixedSpeeds{number_list<double>(*secs, "speed.seconds")};
            }
            else if (*kind == "random")
            {
                RandomSpeeds r;
                const auto dist = s.get_or<std::string>("distribution", "exponential");
                if (dist == "exponential")
                    r.distribution = ComputeDistribution::Exponential;
                else if (dist == "lognormal")
                    r.distribution = ComputeDistribution::LogNormal;
                else
                    throw ConfigError("speed.distribution", "expected 'exponential' or 'lognormal'");
                const json *mean = s.raw("mean");
                check(mean != nullptr, "speed.mean", "missing");
                r.mean = number_list<double>(*mean, "speed.mean");
                r.sigma = s.get_or<double>("sigma", r.sigma);
                c.model.kind = r;
            }
            else if (*kind == "straggler")
            {
                StragglerSpeeds st;
                st.num_workers = s.get_or<int>("workers", st.num_workers);
                st.base_seconds = s.get_or<double>("base", st.base_seconds);
                st.straggler = s.get_or<int>("straggler", st.straggler);
                st.slowdown = s.get_or<double>("slowdown", st.slowdown);
                c.model.kind = st;
            }
            else if (*kind == "order")
            {
                c.source = SpeedConfig::Source::Order;
                const json *order = s.raw("order");
                check(order != nullptr, "speed.order", "missing");
                c.order = number_list<WorkerId>(*order, "speed.order");
                const auto w = s.get<int>("workers");
                check(w.has_value(), "speed.workers", "missing");
                c.workers = *w;
            }
            else if (*kind == "trace_csv")
            {
                c.source = SpeedConfig::Source::TraceCsv;
                c.trace_csv = s.get_or<std::string>("path", "");
                check(!c.trace_csv.empty(), "speed.path", "missing");
                const auto w = s.get<int>("workers");
                check(w.has_value(), "speed.workers", "missing");
                c.workers = *w;
            }
            else
            {
                throw ConfigError("speed.kind", "unknown speed model '" + *kind + "'");
            }
            s.finish();

            if (c.source == SpeedConfig::Source::Model)
            {
                try
                {
                    c.model.validate();
                }
                catch (const ContractViolation &e)
                {
                    throw ConfigError("speed", e.what());
                }
            }
            else
            {
                check(c.workers >= 1, "speed.workers", "must be >= 1");
            }
            return c;
        }

        ScheduleConfig parse_schedule(const json &j, const std::string &path)
        {
            ScheduleConfig sc;
            if (j.is_string())
            {
                const auto kind = parse_schedule_kind(j.get<std::string>());
                check(kind.has_value(), path, "unknown schedule tag '" + j.get<std::string>() + "'");
                sc.kind = *kind;
                check(sc.kind != ScheduleKind::Constant, path, "the constant schedule needs a gamma");
                return sc;
            }
            Section s(j, path);
            const auto tag = s.get<std::string>("tag");
            check(tag.has_value(), s.field("tag"), "missing");
            const auto kind = parse_schedule_kind(*tag);
            check(kind.has_value(), s.field("tag"), "unknown schedule tag '" + *tag + "'");
            sc.kind = *kind;
            sc.gamma = s.get_or<double>("gamma", 0.0);
            if (sc.kind == ScheduleKind::Constant)
            {
                check(sc.gamma > 0, s.field("gamma"), "must be > 0 for the constant schedule");
            }
            sc.label = s.get_or<std::string>("label", "");
            if (const auto rule = s.get<std::string>("output_rule"))
            {
                const auto r = parse_output_rule(*rule);
                check(r.has_value(), s.field("output_rule"), "unknown output rule '" + *rule + "'");
                sc.output_rule = r;
            }
            if (const json *ov = s.raw("overrides"))
            {
                Section o(*ov, s.field("overrides"));
                sc.overrides.L = o.get<double>("L");
                sc.overrides.mu = o.get<double>("mu");
                sc.overrides.G = o.get<double>("G");
                sc.overrides.sigma = o.get<double>("sigma");
                sc.overrides.B = o.get<double>("B");
                sc.overrides.Delta = o.get<double>("Delta");
                o.finish();
            }
            s.finish();
            return sc;
        }

        std::pair<int, int> line_column(const std::string &text, std::size_t byte)
        {
            int line = 1;
            int col = 1;
            for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i)
            {
                if (text[i] == '\n')
                {
                    ++line;
                    col = 1;
                }
                else
                {
                    ++col;
                }
            }
            return {line, col};
        }
    } // namespace

    RunConfig parse_config(const std::string &text)
    {
        json j;
        try
        {
            j = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            const auto [line, col] = line_column(text, e.byte);
            throw ConfigError("", "JSON syntax error at line " + std::to_string(line) + ", column " +
                                      std::to_string(col) + ": " + e.what());
        }

        Section s(j, "");
        const auto schema = s.get<int>("schema");
        check(schema.has_value(), "schema", "missing (expected 1)");
        check(*schema == 1, "schema", "unsupported version " + std::to_string(*schema));

        RunConfig c;
        if (const json *p = s.raw("problem"))
            c.problem = parse_problem(*p);
        if (const json *sp = s.raw("speed"))
            c.speed = parse_speed(*sp);
        if (const json *sch = s.raw("schedule"))
        {
            c.schedules.clear();
            if (sch->is_array())
            {
                check(!sch->empty(), "schedule", "empty list");
                for (std::size_t i = 0; i < sch->size(); ++i)
                {
                    c.schedules.push_back(parse_schedule((*sch)[i], "schedule[" + std::to_string(i) + "]"));
                }
            }
            else
            {
                c.schedules.push_back(parse_schedule(*sch, "schedule"));
            }
        }
        c.horizon = s.get<Iteration>("K");
        c.duration = s.get<double>("S");
        if (const json *ks = s.raw("sweep_K"))
            c.sweep_horizons = number_list<Iteration>(*ks, "sweep_K");
        if (const json *x0 = s.raw("x0"))
        {
            if (x0->is_number())
            {
                c.x0_fill = x0->get<double>();
            }
            else
            {
                const auto v = number_list<double>(*x0, "x0");
                c.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
            }
        }
        c.repetitions = s.get_or<int>("repetitions", c.repetitions);
        c.seed = s.get_or<std::uint64_t>("seed", c.seed);
        c.diagnostics = s.get_or<bool>("diagnostics", c.diagnostics);
        const auto retention = s.get_or<std::string>("retention", "full");
        if (retention == "full")
            c.retention = Retention::Full;
        else if (retention == "metrics")
            c.retention = Retention::MetricsOnly;
        else
            throw ConfigError("retention", "expected 'full' or 'metrics'");
        c.metrics_stride = s.get_or<Iteration>("metrics_stride", c.metrics_stride);
        if (const json *g = s.raw("minibatch_gamma"))
            c.minibatch_gammas = g->is_number() ? std::vector<double>{g->get<double>()}
                                                : number_list<double>(*g, "minibatch_gamma");
        c.threads = s.get_or<int>("threads", c.threads);
        if (const json *out = s.raw("output"))
        {
            Section o(*out, "output");
            c.out_dir = o.get_or<std::string>("dir", c.out_dir);
            c.prefix = o.get_or<std::string>("prefix", c.prefix);
            o.finish();
        }
        s.finish();

        check(!c.horizon || *c.horizon >= 1, "K", "must be >= 1");
        check(!c.duration || *c.duration >= 0, "S", "must be >= 0");
        check(c.repetitions >= 1, "repetitions", "must be >= 1");
        check(c.metrics_stride >= 0, "metrics_stride", "must be >= 0");
        check(c.threads >= 0, "threads", "must be >= 0");
        for (auto k : c.sweep_horizons)
        {
            check(k >= 1, "sweep_K", "every horizon must be >= 1");
        }
        for (double g : c.minibatch_gammas)
        {
            check(g > 0, "minibatch_gamma", "must be > 0");
        }
        check(!c.diagnostics || c.retention == Retention::Full, "diagnostics",
              "virtual-iterate diagnostics need retention 'full'");
        if (c.x0)
        {
            check(c.x0->size() == c.problem.dim || !c.problem.data_csv.empty(), "x0",
                  "length must equal problem.d");
        }
        return c;
    }

    RunConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw ConfigError("", "cannot open config file '" + path + "'");
        }
        std::ostringstream text;
        text << in.rdbuf();
        return parse_config(text.str());
    }
} // namespace asgd
