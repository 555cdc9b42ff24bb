#include "cbwk/harness.hpp"

#include "cbwk/benchmark.hpp"
#include "cbwk/config.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace cbwk {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

// =============================================================================
// Config
// =============================================================================

std::vector<std::size_t> ExperimentConfig::horizons() const {
    if (!T_grid.empty()) return T_grid;
    return {run.T};
}

double ExperimentConfig::budget_for(std::size_t T) const {
    return budget_ratio ? *budget_ratio * static_cast<double>(T) : run.B;
}

double realized_p_min(const InstanceConfig& cfg) {
    const auto counts = cluster_sizes(cfg.resolved_proportions(), cfg.K);
    return static_cast<double>(*std::min_element(counts.begin(), counts.end())) / static_cast<double>(cfg.K);
}

void ExperimentConfig::validate() const {
    instance.validate();
    if (replications == 0) throw ValidationError("experiment.replications must be positive");
    if (n_mc_opt == 0) throw ValidationError("experiment.n_mc_opt must be positive");
    if (baselines.empty()) throw ValidationError("experiment.baselines must not be empty");
    if (output_dir.empty()) throw ValidationError("experiment.output_dir must not be empty");
    for (std::size_t i = 1; i < T_grid.size(); ++i)
        if (T_grid[i] <= T_grid[i - 1]) throw ValidationError("experiment.T_grid must be strictly increasing");
    if (budget_ratio && !(*budget_ratio > 0.0 && *budget_ratio <= 1.0))
        throw ValidationError("run.budget_ratio must lie in (0, 1]");

    const double p_min = realized_p_min(instance);
    for (std::size_t T : horizons()) {
        RunConfig r = run;
        r.T = T;
        r.B = budget_for(T);
        r.validate();
        const ExplorationPlan plan = plan_exploration(instance.K, p_min, instance.C, r);
        if (!run.t0 && plan.T0 != plan.N_S) throw ContractViolation("config: T0 must default to N_S");
    }
}

namespace {

Matrix as_matrix(const std::string& key, const ConfigValue& v) {
    if (v.kind != ConfigValue::Kind::array || v.items.empty()) throw ConfigError(key + " must be an array of rows");
    std::vector<std::vector<double>> rows;
    for (const auto& item : v.items) rows.push_back(as_doubles(key, item));
    Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size())
            throw ConfigError("line " + std::to_string(v.line) + ": " + key + " rows differ in length");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return M;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const ConfigValue&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        // [experiment]
        {"experiment.replications", [](auto& c, auto& k, auto& v) { c.replications = as_count(k, v); }},
        {"experiment.seed", [](auto& c, auto& k, auto& v) {
             c.seed = static_cast<std::uint64_t>(as_integer(k, v));
         }},
        {"experiment.output_dir", [](auto& c, auto& k, auto& v) { c.output_dir = as_string(k, v); }},
        {"experiment.n_mc_opt", [](auto& c, auto& k, auto& v) { c.n_mc_opt = as_count(k, v); }},
        {"experiment.T_grid", [](auto& c, auto& k, auto& v) {
             if (v.kind != ConfigValue::Kind::array) throw ConfigError(k + " must be an array");
             c.T_grid.clear();
             for (const auto& item : v.items) c.T_grid.push_back(as_count(k, item));
         }},
        {"experiment.baselines", [](auto& c, auto& k, auto& v) {
             c.baselines.clear();
             if (v.kind == ConfigValue::Kind::string) {
                 c.baselines.push_back(parse_baseline(v.text));
                 return;
             }
             if (v.kind != ConfigValue::Kind::array) throw ConfigError(k + " must be a string or array of strings");
             for (const auto& item : v.items) c.baselines.push_back(parse_baseline(as_string(k, item)));
         }},
        {"experiment.write_traces", [](auto& c, auto& k, auto& v) { c.write_traces = as_bool(k, v); }},
        {"experiment.record_wall_time", [](auto& c, auto& k, auto& v) { c.record_wall_time = as_bool(k, v); }},
        // [instance]
        {"instance.K", [](auto& c, auto& k, auto& v) { c.instance.K = as_count(k, v); }},
        {"instance.C", [](auto& c, auto& k, auto& v) { c.instance.C = as_count(k, v); }},
        {"instance.m", [](auto& c, auto& k, auto& v) { c.instance.m = as_count(k, v); }},
        {"instance.d", [](auto& c, auto& k, auto& v) { c.instance.d = as_count(k, v); }},
        {"instance.separation", [](auto& c, auto& k, auto& v) { c.instance.separation = as_double(k, v); }},
        {"instance.noise_half_width", [](auto& c, auto& k, auto& v) {
             c.instance.noise_half_width = as_double(k, v);
         }},
        {"instance.proportions", [](auto& c, auto& k, auto& v) {
             if (v.kind == ConfigValue::Kind::string) {
                 if (v.text != "balanced") throw ConfigError(k + " must be \"balanced\" or an array");
                 c.instance.proportions.clear();
                 return;
             }
             c.instance.proportions = as_doubles(k, v);
         }},
        {"instance.context", [](auto& c, auto& k, auto& v) {
             c.instance.context = ContextDistribution::parse(as_string(k, v));
         }},
        {"instance.mu", [](auto& c, auto& k, auto& v) { c.instance.mu = as_matrix(k, v); }},
        {"instance.W", [](auto& c, auto& k, auto& v) {
             if (v.kind != ConfigValue::Kind::array) throw ConfigError(k + " must be an array of matrices");
             std::vector<Matrix> W;
             for (const auto& item : v.items) W.push_back(as_matrix(k, item));
             c.instance.W = std::move(W);
         }},
        // [run]
        {"run.T", [](auto& c, auto& k, auto& v) { c.run.T = as_count(k, v); }},
        {"run.B", [](auto& c, auto& k, auto& v) { c.run.B = as_double(k, v); }},
        {"run.budget_ratio", [](auto& c, auto& k, auto& v) { c.budget_ratio = as_double(k, v); }},
        {"run.allow_noop_in_argmax", [](auto& c, auto& k, auto& v) {
             c.run.allow_noop_in_argmax = as_bool(k, v);
         }},
        {"run.n_s", [](auto& c, auto& k, auto& v) { c.run.n_s = as_count(k, v); }},
        {"run.t0", [](auto& c, auto& k, auto& v) { c.run.t0 = as_count(k, v); }},
        // [clustering]
        {"clustering.delta", [](auto& c, auto& k, auto& v) { c.run.clustering.delta = as_double(k, v); }},
        {"clustering.c0", [](auto& c, auto& k, auto& v) { c.run.clustering.c0 = as_double(k, v); }},
        {"clustering.lambda1", [](auto& c, auto& k, auto& v) {
             if (v.kind == ConfigValue::Kind::string) {
                 if (v.text != "auto") throw ConfigError(k + " must be \"auto\" or a number");
                 c.run.clustering.lambda1.reset();
                 return;
             }
             c.run.clustering.lambda1 = as_double(k, v);
         }},
        {"clustering.c1", [](auto& c, auto& k, auto& v) { c.run.clustering.c1 = as_double(k, v); }},
        {"clustering.max_iter", [](auto& c, auto& k, auto& v) {
             c.run.clustering.max_iter = static_cast<int>(as_integer(k, v));
         }},
        {"clustering.tol", [](auto& c, auto& k, auto& v) { c.run.clustering.tol = as_double(k, v); }},
        {"clustering.match_tol", [](auto& c, auto& k, auto& v) { c.run.clustering.match_tol = as_double(k, v); }},
        {"clustering.kmeans_restarts", [](auto& c, auto& k, auto& v) {
             c.run.clustering.kmeans_restarts = static_cast<int>(as_integer(k, v));
         }},
        // [radius]
        {"radius.zeta", [](auto& c, auto& k, auto& v) { c.run.radius.zeta = as_double(k, v); }},
        {"radius.eps_hat", [](auto& c, auto& k, auto& v) {
             if (v.kind == ConfigValue::Kind::string) {
                 if (v.text != "rate") throw ConfigError(k + " must be \"rate\" or a number");
                 c.run.radius.eps_hat.reset();
                 return;
             }
             c.run.radius.eps_hat = as_double(k, v);
         }},
        {"radius.c2", [](auto& c, auto& k, auto& v) { c.run.radius.c2 = as_double(k, v); }},
        {"radius.lambda2", [](auto& c, auto& k, auto& v) { c.run.radius.lambda2 = as_double(k, v); }},
        {"radius.R", [](auto& c, auto& k, auto& v) { c.run.radius.R = as_double(k, v); }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& text, const std::string& origin) {
    const ConfigDocument doc = ConfigDocument::parse(text, origin);
    ExperimentConfig cfg;
    for (const auto& [key, value] : doc.entries) {
        const auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError(origin + ":" + std::to_string(value.line) + ": unknown key '" + key + "'");
        try {
            it->second(cfg, key, value);
        } catch (const ValidationError& e) {
            const std::string what = e.what();
            if (what.rfind("line ", 0) == 0) throw ConfigError(origin + ":" + what.substr(5));
            throw ConfigError(origin + ":" + std::to_string(value.line) + ": " + what);
        }
    }
    cfg.instance.seed = cfg.seed;
    cfg.run.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment(buf.str(), path);
}

// =============================================================================
// Runner
// =============================================================================

std::uint64_t replication_seed(std::uint64_t seed, std::size_t r) { return seed ^ static_cast<std::uint64_t>(r); }

ReplicationSetup prepare_replication(const ExperimentConfig& cfg, std::size_t r, std::size_t T) {
    const std::uint64_t seed = replication_seed(cfg.seed, r);
    Rng instance_rng = derive_stream(seed, stream::instance);
    InstanceConfig icfg = cfg.instance;
    icfg.seed = seed;
    ReplicationSetup setup{generate_instance(icfg, instance_rng), cfg.run, 0.0};
    setup.run.seed = seed;
    setup.run.T = T;
    setup.run.B = cfg.budget_for(T);
    Rng oracle_rng = derive_stream(seed, stream::oracle);
    setup.opt_total = oracle_opt(setup.instance, setup.run.B, T, cfg.n_mc_opt, oracle_rng);
    return setup;
}

namespace {

void write_trace_rows(std::ostream& out, const RunTrace& trace, std::size_t d) {
    const std::string name = to_string(trace.baseline);
    for (const auto& rec : trace.records) {
        out << name << ',' << trace.T << ',' << rec.t << ',' << rec.arm << ',' << rec.cluster << ','
            << format_double(rec.reward);
        for (std::size_t j = 0; j < d; ++j) out << ',' << format_double(rec.consumption[static_cast<Eigen::Index>(j)]);
        for (std::size_t j = 0; j < d; ++j)
            out << ',' << (rec.theta.size() ? format_double(rec.theta[static_cast<Eigen::Index>(j)]) : "");
        out << ',' << (std::isnan(rec.score) ? "" : format_double(rec.score)) << '\n';
    }
}

std::string trace_header(std::size_t d) {
    std::string h = "baseline,T,t,arm,cluster,reward";
    for (std::size_t j = 1; j <= d; ++j) h += ",v_" + std::to_string(j);
    for (std::size_t j = 1; j <= d; ++j) h += ",theta_" + std::to_string(j);
    return h + ",score\n";
}

struct JobResult {
    std::vector<SummaryRow> rows;
    std::string trace;
    std::exception_ptr error;
};

std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BK_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::vector<std::size_t> Ts = cfg.horizons();
    const std::size_t jobs = Ts.size() * cfg.replications;
    std::vector<JobResult> results(jobs);

    auto work = [&](std::size_t job) {
        const std::size_t T = Ts[job / cfg.replications];
        const std::size_t r = job % cfg.replications;
        JobResult& out = results[job];
        try {
            const ReplicationSetup setup = prepare_replication(cfg, r, T);
            std::ostringstream trace;
            for (Baseline b : cfg.baselines) {
                RunConfig rc = setup.run;
                rc.record_periods = cfg.write_traces;
                const auto start = std::chrono::steady_clock::now();
                const RunTrace tr = run_baseline(b, setup.instance, rc, setup.opt_total);
                const auto stop = std::chrono::steady_clock::now();
                SummaryRow row;
                row.replication = r;
                row.baseline = b;
                row.T = T;
                row.B = rc.B;
                row.N_S = tr.N_S;
                row.T0 = tr.T0;
                row.T_omega = tr.T_omega;
                row.total_reward = tr.total_reward;
                row.opt_total = tr.opt_total;
                row.opt_hat = tr.opt_hat;
                row.Z = tr.Z;
                row.regret = tr.regret;
                row.eps_c_max = tr.eps_c_max;
                row.wall_ms = cfg.record_wall_time
                                  ? std::chrono::duration<double, std::milli>(stop - start).count()
                                  : 0.0;
                out.rows.push_back(row);
                if (cfg.write_traces) write_trace_rows(trace, tr, setup.instance.d);
            }
            out.trace = trace.str();
        } catch (...) {
            out.error = std::current_exception();
        }
    };

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = worker_count(jobs);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t job = next++; job < jobs; job = next++) work(job);
        });
    for (auto& t : pool) t.join();
    for (const auto& res : results)
        if (res.error) std::rethrow_exception(res.error);

    // Single writer, in job order.
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    ExperimentResult out;

    auto open = [&](const fs::path& p) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
        out.files.push_back(p.string());
        return f;
    };

    {
        std::ofstream f = open(dir / "summary.csv");
        f << "replication,baseline,T,B,N_S,T0,T_omega,total_reward,opt_total,opt_hat,Z,regret,eps_c_max,wall_ms\n";
        for (const auto& res : results) {
            for (const auto& row : res.rows) {
                f << row.replication << ',' << to_string(row.baseline) << ',' << row.T << ',' << format_double(row.B)
                  << ',' << row.N_S << ',' << row.T0 << ',' << row.T_omega << ',' << format_double(row.total_reward)
                  << ',' << format_double(row.opt_total) << ',' << format_double(row.opt_hat) << ','
                  << format_double(row.Z) << ',' << format_double(row.regret) << ','
                  << format_double(row.eps_c_max) << ',' << format_double(row.wall_ms) << '\n';
                out.rows.push_back(row);
            }
        }
        if (!f) throw std::runtime_error("write failed for summary.csv");
    }

    if (cfg.write_traces) {
        for (std::size_t r = 0; r < cfg.replications; ++r) {
            std::ofstream f = open(dir / ("trace_" + std::to_string(r) + ".csv"));
            f << trace_header(cfg.instance.d);
            for (std::size_t k = 0; k < Ts.size(); ++k) f << results[k * cfg.replications + r].trace;
            if (!f) throw std::runtime_error("write failed for trace file");
        }
    }

    if (!cfg.T_grid.empty()) {
        const Baseline tracked =
            std::find(cfg.baselines.begin(), cfg.baselines.end(), Baseline::cluster_lcbwk) != cfg.baselines.end()
                ? Baseline::cluster_lcbwk
                : cfg.baselines.front();
        std::ofstream f = open(dir / "regret_curve.csv");
        f << "T,mean_regret,stderr,mean_regret_over_T\n";
        for (std::size_t T : Ts) {
            std::vector<double> values;
            for (const auto& row : out.rows)
                if (row.T == T && row.baseline == tracked) values.push_back(row.regret);
            const double n = static_cast<double>(values.size());
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= n;
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            const double se = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
            f << T << ',' << format_double(mean) << ',' << format_double(se) << ','
              << format_double(mean / static_cast<double>(T)) << '\n';
        }
        if (!f) throw std::runtime_error("write failed for regret_curve.csv");
    }
    return out;
}

}  // namespace cbwk
