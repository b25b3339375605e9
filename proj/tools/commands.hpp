#pragma once

// Subcommand implementations for the adaptqn command-line tool. Flag parsing
// lives in adaptqn.cpp; everything here takes plain option structs so the
// tests can drive it directly.

#include "adaptqn/adaptqn.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace adaptqn::cli {

// sysexits-style codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBudget = 2;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitNoInput = 66;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

/// "dim=5,cond=100" -> {dim: 5, cond: 100}. Keys must come from `allowed`.
inline std::map<std::string, std::string> parse_kv(const std::string& spec, const std::vector<std::string>& allowed) {
    std::map<std::string, std::string> out;
    for (const auto& item : split(spec, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw UsageError("expected key=value, got '" + item + "'");
        }
        std::string key = item.substr(0, eq);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw UsageError("unknown key '" + key + "' in '" + spec + "'");
        }
        out[key] = item.substr(eq + 1);
    }
    return out;
}

inline double kv_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        return fallback;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(it->second, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != it->second.size()) {
        throw UsageError("'" + key + "' must be a number, got '" + it->second + "'");
    }
    return v;
}

inline long long kv_int(const std::map<std::string, std::string>& kv, const std::string& key, long long fallback) {
    const double v = kv_double(kv, key, static_cast<double>(fallback));
    if (v != std::floor(v) || v < 1) {
        throw UsageError("'" + key + "' must be a positive integer");
    }
    return static_cast<long long>(v);
}

// ---------------------------------------------------------------------------
// Problems

struct ProblemOptions {
    std::string data;                 ///< LIBSVM file
    std::string synthetic_logistic;   ///< "N=500,n=50,sep=1"
    std::string synthetic_quadratic;  ///< "dim=5,cond=100"
    std::string sc_scale = "auto";    ///< auto | 1
    std::uint64_t seed = 42;
    bool reference = true;  ///< solve for x* so log_gap/err_ratio are filled
};

struct Problem {
    std::unique_ptr<Objective> oracle;
    std::optional<ReferenceOptimum> reference;
    std::string description;
};

inline SparseDataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read dataset '" + path + "': " + std::strerror(errno));
    }
    try {
        return parse_libsvm(in);
    } catch (const ParseError& e) {
        throw InputError(path + ": " + e.what());
    }
}

inline Problem load_problem(const ProblemOptions& opt) {
    const int sources = int(!opt.data.empty()) + int(!opt.synthetic_logistic.empty()) +
                        int(!opt.synthetic_quadratic.empty());
    if (sources > 1) {
        throw UsageError("--data, --synthetic-logistic and --synthetic-quadratic are mutually exclusive");
    }
    if (opt.sc_scale != "auto" && opt.sc_scale != "1") {
        throw UsageError("--sc-scale must be 'auto' or '1'");
    }
    const auto scaling =
        opt.sc_scale == "auto" ? LogisticObjective::Scaling::self_concordant : LogisticObjective::Scaling::unit;

    Problem p;
    if (!opt.synthetic_quadratic.empty()) {
        const auto kv = parse_kv(opt.synthetic_quadratic, {"dim", "cond"});
        const auto dim = kv_int(kv, "dim", 5);
        const double cond = kv_double(kv, "cond", 100.0);
        if (!(cond >= 1.0)) {
            throw UsageError("quadratic condition number must be >= 1");
        }
        auto q = std::make_unique<QuadraticObjective>(synthetic_quadratic(dim, cond, opt.seed));
        if (opt.reference) {
            Vector xs = q->minimizer();
            const double fs = q->value(xs);
            p.reference = ReferenceOptimum{std::move(xs), fs};
        }
        p.description = "quadratic dim=" + std::to_string(dim);
        p.oracle = std::move(q);
        return p;
    }

    SparseDataset ds;
    if (!opt.data.empty()) {
        ds = read_dataset(opt.data);
        p.description = opt.data;
    } else {
        const auto kv = parse_kv(opt.synthetic_logistic, {"N", "n", "sep"});
        const auto rows = kv_int(kv, "N", 500);
        const auto cols = kv_int(kv, "n", 50);
        ds = synth_logistic(rows, cols, opt.seed, kv_double(kv, "sep", 1.0));
        p.description = "logistic N=" + std::to_string(rows) + " n=" + std::to_string(cols);
    }
    if (ds.rows() == 0) {
        throw InputError("dataset has no rows");
    }
    p.oracle = std::make_unique<LogisticObjective>(std::move(ds), scaling);
    if (opt.reference) {
        p.reference = solve_reference(*p.oracle);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Deterministic methods

inline const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{"gd-a",    "gd-ls",   "newton-a", "bfgs-a",
                                                "bfgs-ls", "bfgs-h",  "lbfgs-a",  "lbfgs-ls"};
    return names;
}

inline bool method_uses_scaling(const std::string& method) {
    return method.rfind("bfgs", 0) == 0 || method.rfind("lbfgs", 0) == 0;
}

inline void validate_methods(const std::vector<std::string>& methods) {
    for (const auto& m : methods) {
        if (std::find(method_names().begin(), method_names().end(), m) == method_names().end()) {
            throw UsageError("unknown method '" + m + "'");
        }
    }
}

struct MethodOptions {
    bool identity_scaling = false;
    std::optional<std::size_t> memory;
    Eigen::Index dense_bfgs_max_dim = 5000;
};

/// Direction and step rule for a method name. BFGS switches to the unlimited
/// two-loop form when n is above the dense limit.
inline void configure_method(RunConfig& cfg, const std::string& method, Eigen::Index n, const MethodOptions& opt) {
    validate_methods({method});
    const auto dash = method.find('-');
    const std::string dir = method.substr(0, dash);
    const std::string step = method.substr(dash + 1);

    if (dir == "gd") {
        cfg.direction = GradientDescent{};
    } else if (dir == "newton") {
        cfg.direction = Newton{};
    } else if (dir == "bfgs") {
        if (n <= opt.dense_bfgs_max_dim) {
            cfg.direction = BfgsDense{opt.identity_scaling};
        } else {
            cfg.direction = BfgsTwoLoopUnlimited{opt.identity_scaling};
        }
    } else {
        const std::size_t mem = opt.memory.value_or(default_lbfgs_memory(n));
        if (mem < 1) {
            throw UsageError("--memory must be >= 1");
        }
        cfg.direction = LBfgs{mem, opt.identity_scaling};
    }

    if (step == "a") {
        cfg.step = Adaptive{};
    } else if (step == "ls") {
        cfg.step = ArmijoWolfe{};
    } else {
        cfg.step = Hybrid{};
    }
    cfg.dense_bfgs_max_dim = opt.dense_bfgs_max_dim;
}

/// Exit code for a finished deterministic run.
inline int exit_code_for(TerminationReason reason) {
    switch (reason) {
        case TerminationReason::grad_tol: return kExitOk;
        case TerminationReason::max_iters:
        case TerminationReason::time_budget: return kExitBudget;
        case TerminationReason::numerical_error: return kExitError;
    }
    return kExitError;
}

/// Writes `content` to `path` (truncating) and fsyncs before returning.
inline void write_file_synced(const std::filesystem::path& path, const std::string& content) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing: " + std::strerror(errno));
    }
    const char* p = content.data();
    std::size_t left = content.size();
    while (left > 0) {
        const ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            const std::string why = std::strerror(errno);
            ::close(fd);
            throw std::runtime_error("write to '" + path.string() + "' failed: " + why);
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        throw std::runtime_error("cannot flush '" + path.string() + "': " + std::strerror(errno));
    }
}

inline void write_trace_file(const std::filesystem::path& path, const Trace& trace) {
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_file_synced(path, csv.str());
}

inline std::string summary_line(const std::string& method, const Trace& trace) {
    std::ostringstream s;
    s << method << ": iters=" << trace.iterations() << " final_gnorm=" << format_double(trace.last().gnorm)
      << " termination=" << to_string(trace.termination.reason);
    if (!trace.termination.detail.empty()) {
        s << " (" << trace.termination.detail << ")";
    }
    return s.str();
}

struct Budget {
    double grad_tol = 1e-7;
    std::size_t max_iters = 10000;
    double max_seconds = std::numeric_limits<double>::infinity();
};

inline void check_budget(const Budget& b) {
    if (!(b.grad_tol > 0.0)) {
        throw UsageError("--grad-tol must be positive");
    }
    if (!(b.max_seconds > 0.0)) {
        throw UsageError("--max-seconds must be positive");
    }
}

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
}

struct RunOptions {
    ProblemOptions problem;
    std::string method;
    bool identity_scaling = false;
    std::optional<std::size_t> memory;
    Budget budget;
    std::string out = ".";
};

inline int cmd_run(const RunOptions& opt, std::ostream& out) {
    validate_methods({opt.method});
    check_budget(opt.budget);
    const Problem problem = load_problem(opt.problem);

    RunConfig cfg;
    configure_method(cfg, opt.method, problem.oracle->dimension(), {opt.identity_scaling, opt.memory});
    cfg.grad_tol = opt.budget.grad_tol;
    cfg.max_iters = opt.budget.max_iters;
    cfg.max_seconds = opt.budget.max_seconds;
    cfg.reference = problem.reference;

    const Trace trace = run(cfg, *problem.oracle);
    ensure_directory(opt.out);
    write_trace_file(std::filesystem::path(opt.out) / (opt.method + ".csv"), trace);
    out << summary_line(opt.method, trace) << '\n';
    return exit_code_for(trace.termination.reason);
}

struct BenchOptions {
    ProblemOptions problem;
    std::vector<std::string> methods;
    std::string identity_scaling = "off";  ///< on | off | both
    std::optional<std::size_t> memory;
    Budget budget;
    std::string out = ".";
    unsigned jobs = 1;
};

struct BenchJob {
    std::string method;
    bool identity_scaling = false;
    std::string file;
    SummaryRow row;
    std::string line;
    bool error = false;
};

/// One job per (method, scaling) pair. With "both", methods without an
/// inverse-Hessian approximation run once.
inline std::vector<BenchJob> bench_jobs(const BenchOptions& opt) {
    std::vector<bool> settings;
    if (opt.identity_scaling == "off") {
        settings = {false};
    } else if (opt.identity_scaling == "on") {
        settings = {true};
    } else if (opt.identity_scaling == "both") {
        settings = {false, true};
    } else {
        throw UsageError("--identity-scaling must be on, off or both");
    }
    std::vector<BenchJob> jobs;
    for (const auto& m : opt.methods) {
        const bool applies = method_uses_scaling(m);
        for (const bool is : settings) {
            if (!applies && is && settings.size() == 2) {
                continue;
            }
            BenchJob job;
            job.method = m;
            job.identity_scaling = applies && is;
            job.file = m + (settings.size() == 2 && job.identity_scaling ? "-idscale" : "") + ".csv";
            job.row.method = m;
            job.row.identity_scaling = applies ? (is ? "on" : "off") : "n/a";
            jobs.push_back(std::move(job));
        }
    }
    return jobs;
}

inline int cmd_bench(const BenchOptions& opt, std::ostream& out) {
    if (opt.methods.size() < 2) {
        throw UsageError("bench needs at least two methods");
    }
    validate_methods(opt.methods);
    check_budget(opt.budget);
    std::vector<BenchJob> jobs = bench_jobs(opt);
    const Problem problem = load_problem(opt.problem);
    ensure_directory(opt.out);

    auto work = [&](BenchJob& job) {
        try {
            RunConfig cfg;
            configure_method(cfg, job.method, problem.oracle->dimension(), {job.identity_scaling, opt.memory});
            cfg.grad_tol = opt.budget.grad_tol;
            cfg.max_iters = opt.budget.max_iters;
            cfg.max_seconds = opt.budget.max_seconds;
            cfg.reference = problem.reference;
            const Trace trace = run(cfg, *problem.oracle);
            write_trace_file(std::filesystem::path(opt.out) / job.file, trace);
            job.row.iters = trace.iterations();
            job.row.final_gnorm = trace.last().gnorm;
            job.row.termination = to_string(trace.termination.reason);
            job.row.iters_until_t_near_1 = iters_until_t_near_one(trace.records);
            job.line = summary_line(job.method + "[" + job.row.identity_scaling + "]", trace);
            job.error = trace.termination.reason == TerminationReason::numerical_error;
        } catch (const std::exception& e) {
            job.row.termination = "error";
            job.line = job.method + ": error: " + e.what();
            job.error = true;
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(jobs.size())));
    if (workers == 1) {
        for (auto& job : jobs) {
            work(job);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) {
                    work(jobs[i]);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    std::vector<SummaryRow> rows;
    int code = kExitOk;
    for (const auto& job : jobs) {
        rows.push_back(job.row);
        out << job.line << '\n';
        if (job.error) {
            code = kExitError;
        } else if (job.row.termination != "grad_tol" && code == kExitOk) {
            code = kExitBudget;
        }
    }
    std::ostringstream summary;
    write_summary_csv(summary, rows);
    write_file_synced(std::filesystem::path(opt.out) / "summary.csv", summary.str());
    return code;
}

// ---------------------------------------------------------------------------
// Stochastic experiments

inline const std::vector<std::string>& stoch_method_names() {
    static const std::vector<std::string> names{"sbfgs-a", "sbfgs-1", "sn-a",  "sn-1",  "sgd-a",
                                                "sgd-1",   "sgd-2",   "sgd-3", "sgd-4"};
    return names;
}

/// Method and step rule for a stochastic method name. sgd-1..4 use the
/// constant step table; sbfgs-1 and sn-1 use t = 1.
inline StochasticConfig stoch_method_config(const std::string& name) {
    if (std::find(stoch_method_names().begin(), stoch_method_names().end(), name) == stoch_method_names().end()) {
        throw UsageError("unknown stochastic method '" + name + "'");
    }
    StochasticConfig cfg;
    const auto dash = name.find('-');
    const std::string family = name.substr(0, dash);
    const std::string step = name.substr(dash + 1);
    cfg.method = family == "sbfgs" ? StochasticMethod::bfgs
                 : family == "sn"  ? StochasticMethod::newton
                                   : StochasticMethod::sgd;
    if (step == "a") {
        cfg.step = Adaptive{};
    } else if (family == "sgd") {
        cfg.step = Constant{ConstantStepTable::alpha(std::stoi(step))};
    } else {
        cfg.step = Constant{1.0};
    }
    return cfg;
}

/// small | medium | large -> ½p, p, 4p (rounded up); a positive integer is
/// taken literally.
inline std::size_t base_batch(const std::string& batch, std::size_t p) {
    if (batch == "small") {
        return (p + 1) / 2;
    }
    if (batch == "medium") {
        return p;
    }
    if (batch == "large") {
        return 4 * p;
    }
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(batch, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != batch.size() || v < 1) {
        throw UsageError("--batch must be small, medium, large or a positive integer");
    }
    return static_cast<std::size_t>(v);
}

struct StochOptions {
    std::size_t p = 30;
    std::vector<std::string> methods;
    std::string batch = "small";
    std::string schedule = "growing";  ///< growing | constant
    std::uint64_t seed = 7;
    std::string sigma = "eig_min=1,eig_max=1e4";  ///< synthetic spectrum
    std::string data;  ///< empirical covariance source; overrides p
    std::size_t max_iters = 3000;
    double max_seconds = std::numeric_limits<double>::infinity();
    std::string out = ".";
};

/// Σ, β and λ shared by every method of one stoch invocation. The sampler
/// stream for each method starts from seed + 2, so all methods see the same
/// draws as long as they request the same batch sizes.
struct OnlineLsSetup {
    Matrix sigma;
    Vector beta;
    double lambda = 0.0;
    std::uint64_t sampler_seed = 0;
};

inline OnlineLsSetup online_ls_setup(const StochOptions& opt) {
    OnlineLsSetup s;
    if (!opt.data.empty()) {
        s.sigma = empirical_covariance(read_dataset(opt.data));
    } else {
        if (opt.p < 1) {
            throw UsageError("--p must be >= 1");
        }
        const auto kv = parse_kv(opt.sigma, {"eig_min", "eig_max"});
        const double lo = kv_double(kv, "eig_min", 1.0);
        const double hi = kv_double(kv, "eig_max", 1e4);
        if (!(lo > 0.0) || !(hi >= lo)) {
            throw UsageError("--sigma needs 0 < eig_min <= eig_max");
        }
        s.sigma = synthetic_spd(static_cast<Eigen::Index>(opt.p), lo, hi, opt.seed);
    }
    const Eigen::Index p = s.sigma.rows();
    s.beta = sparse_beta(p, opt.seed + 1);
    s.lambda = 1.0 / static_cast<double>(p);
    s.sampler_seed = opt.seed + 2;
    return s;
}

inline int cmd_stoch(const StochOptions& opt, std::ostream& out) {
    if (opt.methods.empty()) {
        throw UsageError("--methods is empty");
    }
    std::vector<StochasticConfig> configs;
    for (const auto& m : opt.methods) {
        configs.push_back(stoch_method_config(m));
    }
    if (opt.schedule != "growing" && opt.schedule != "constant") {
        throw UsageError("--schedule must be growing or constant");
    }
    if (!(opt.max_seconds > 0.0)) {
        throw UsageError("--max-seconds must be positive");
    }
    const OnlineLsSetup setup = online_ls_setup(opt);
    const std::size_t p = static_cast<std::size_t>(setup.sigma.rows());
    const std::size_t base = base_batch(opt.batch, p);
    const OnlineLsExpectedObjective expected(setup.sigma, setup.beta, setup.lambda);
    ensure_directory(opt.out);

    int code = kExitOk;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        StochasticConfig cfg = configs[i];
        if (opt.schedule == "growing") {
            cfg.schedule = GrowingBatch{base, 1.05, 50};
        } else {
            cfg.schedule = ConstantBatch{base};
        }
        cfg.max_iters = opt.max_iters;
        cfg.max_seconds = opt.max_seconds;
        OnlineSampler sampler(setup.sigma, setup.beta, setup.lambda, setup.sampler_seed);
        const Trace trace = stochastic_run(cfg, sampler, expected);
        write_trace_file(std::filesystem::path(opt.out) / (opt.methods[i] + ".csv"), trace);
        out << summary_line(opt.methods[i], trace) << " final_log_gap=" << format_optional(trace.last().log_gap)
            << '\n';
        if (trace.termination.reason == TerminationReason::numerical_error) {
            code = kExitError;
        }
    }
    return code;
}

}  // namespace adaptqn::cli
