// adaptqn: run, bench and stoch subcommands.

#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace adaptqn::cli;

void add_problem_flags(CLI::App* cmd, ProblemOptions& p) {
    cmd->add_option("--data", p.data, "LIBSVM dataset");
    cmd->add_option("--synthetic-logistic", p.synthetic_logistic,
                    "synthetic logistic problem, e.g. N=500,n=50,sep=1 (default when no source is given)");
    cmd->add_option("--synthetic-quadratic", p.synthetic_quadratic, "synthetic quadratic, e.g. dim=5,cond=100");
    cmd->add_option("--sc-scale", p.sc_scale, "logistic scaling: auto (B^2 N/4) or 1")->capture_default_str();
    cmd->add_option("--seed", p.seed, "seed for synthetic problems")->capture_default_str();
    cmd->add_flag("!--no-reference", p.reference, "skip the reference solve; log_gap and err_ratio stay empty");
}

void add_budget_flags(CLI::App* cmd, Budget& b) {
    cmd->add_option("--grad-tol", b.grad_tol, "stop when ||g|| < this")->capture_default_str();
    cmd->add_option("--max-iters", b.max_iters, "iteration cap")->capture_default_str();
    cmd->add_option("--max-seconds", b.max_seconds, "wall-clock cap");
}

std::string method_list() {
    std::string s;
    for (const auto& m : method_names()) {
        s += (s.empty() ? "" : ", ") + m;
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curvature-adaptive quasi-Newton methods: runs, benchmarks and stochastic experiments"};
    app.require_subcommand(1);

    RunOptions run_opt;
    auto* run = app.add_subcommand("run", "run one method and write <method>.csv");
    run->add_option("--method", run_opt.method, "one of: " + method_list())->required();
    add_problem_flags(run, run_opt.problem);
    add_budget_flags(run, run_opt.budget);
    std::string run_scaling = "off";
    run->add_option("--identity-scaling", run_scaling, "on | off")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    run->add_option("--memory", run_opt.memory, "L-BFGS memory (default min(n/2, 20))");
    run->add_option("--out", run_opt.out, "output directory")->capture_default_str();

    BenchOptions bench_opt;
    auto* bench = app.add_subcommand("bench", "run several methods and write summary.csv");
    bench->add_option("--methods", bench_opt.methods, "comma-separated list from: " + method_list())
        ->required()
        ->delimiter(',');
    add_problem_flags(bench, bench_opt.problem);
    add_budget_flags(bench, bench_opt.budget);
    bench->add_option("--identity-scaling", bench_opt.identity_scaling, "on | off | both")
        ->check(CLI::IsMember({"on", "off", "both"}))
        ->capture_default_str();
    bench->add_option("--memory", bench_opt.memory, "L-BFGS memory (default min(n/2, 20))");
    bench->add_option("--jobs", bench_opt.jobs, "methods run in parallel")->capture_default_str();
    bench->add_option("--out", bench_opt.out, "output directory")->capture_default_str();

    StochOptions stoch_opt;
    auto* stoch = app.add_subcommand("stoch", "online least-squares experiments");
    stoch->add_option("--p", stoch_opt.p, "dimension of the synthetic model")->capture_default_str();
    stoch->add_option("--methods", stoch_opt.methods,
                      "comma-separated: sbfgs-a, sbfgs-1, sn-a, sn-1, sgd-a, sgd-1..sgd-4")
        ->required()
        ->delimiter(',');
    stoch->add_option("--batch", stoch_opt.batch, "small (p/2), medium (p), large (4p) or a number")
        ->capture_default_str();
    stoch->add_option("--schedule", stoch_opt.schedule, "growing (5% every 50 iterations) or constant")
        ->capture_default_str();
    stoch->add_option("--seed", stoch_opt.seed, "seed for Sigma, beta and the sample stream")
        ->capture_default_str();
    stoch->add_option("--sigma", stoch_opt.sigma, "synthetic spectrum, e.g. eig_min=1,eig_max=1e4")
        ->capture_default_str();
    stoch->add_option("--data", stoch_opt.data, "use this dataset's empirical covariance as Sigma");
    stoch->add_option("--max-iters", stoch_opt.max_iters, "iterations per method")->capture_default_str();
    stoch->add_option("--max-seconds", stoch_opt.max_seconds, "wall-clock cap per method");
    stoch->add_option("--out", stoch_opt.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*run) {
            run_opt.identity_scaling = run_scaling == "on";
            return cmd_run(run_opt, std::cout);
        }
        if (*bench) {
            return cmd_bench(bench_opt, std::cout);
        }
        return cmd_stoch(stoch_opt, std::cout);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
}
