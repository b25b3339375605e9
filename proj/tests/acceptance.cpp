// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "support.hpp"

#include <quadmath.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace adaptqn;
using namespace adaptqn::test;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

Trace desk_run(DirectionRule dir, StepRule step) {
    RunConfig cfg;
    cfg.direction = std::move(dir);
    cfg.step = std::move(step);
    cfg.reference = desk_reference();
    cfg.keep_iterates = true;
    return run(cfg, desk_logistic());
}

struct DeskRuns {
    Trace gd, newton, bfgs, lbfgs, hybrid;
};

const DeskRuns& desk_runs() {
    static const DeskRuns runs{
        desk_run(GradientDescent{}, Adaptive{}),
        desk_run(Newton{}, Adaptive{}),
        desk_run(BfgsDense{}, Adaptive{}),
        desk_run(LBfgs{default_lbfgs_memory(desk_logistic().dimension())}, Adaptive{}),
        desk_run(BfgsDense{}, Hybrid{}),
    };
    return runs;
}

std::vector<std::pair<const char*, const Trace*>> adaptive_runs() {
    const DeskRuns& r = desk_runs();
    return {{"GD-A", &r.gd}, {"Newton-A", &r.newton}, {"BFGS-A", &r.bfgs}, {"LBFGS-A", &r.lbfgs}};
}

// 1. Damped Newton on ½‖x‖² from ‖x₀‖ = 3 follows r ↦ r²/(1+r) for 20 steps.
Verdict damped_newton_recursion() {
    const auto start = Clock::now();
    const QuadraticObjective q(Matrix::Identity(3, 3), Vector::Zero(3));
    RunConfig cfg;
    cfg.direction = Newton{};
    cfg.x0 = (Vector(3) << 1.0, 2.0, 2.0).finished();
    cfg.max_iters = 20;
    cfg.grad_tol = std::numeric_limits<double>::min();
    cfg.keep_iterates = true;
    const Trace tr = run(cfg, q);
    const double elapsed = seconds_since(start);

    double expected = 3.0, worst = 0.0;
    std::size_t matched = 0;
    std::optional<std::size_t> first_bad;
    for (std::size_t k = 0; k <= 20; ++k) {
        const double got = k < tr.iterates.size() ? tr.iterates[k].norm() : std::nan("");
        const double rel = std::abs(got - expected) / expected;
        if (rel <= 1e-12) {
            ++matched;
        } else if (!first_bad) {
            first_bad = k;
        }
        if (std::isfinite(rel)) {
            worst = std::max(worst, rel);
        }
        expected = expected * expected / (1.0 + expected);
    }
    std::ostringstream d;
    d << matched << "/21 iterates within 1e-12, run made " << tr.iterations() << " steps ("
      << to_string(tr.termination.reason) << ")";
    if (first_bad) {
        d << ", first miss at k=" << *first_bad << " (|x|=" << fmt("%.3g", tr.iterates[std::min(*first_bad, tr.iterates.size() - 1)].norm())
          << "), worst finite rel err " << fmt("%.2g", worst);
    }
    d << ", " << fmt("%.3f", elapsed * 1e3) << " ms";
    return {!first_bad && tr.iterations() == 20 && elapsed < 1e-3, d.str()};
}

// 2. f(x_{k+1}) ≤ f(x_k) − ω(η_k) + 1e-10(1+|f(x_k)|) for every adaptive step.
Verdict decrease_guarantee() {
    const auto start = Clock::now();
    const auto runs = adaptive_runs();
    const double elapsed = seconds_since(start);
    std::size_t checked = 0, bad = 0;
    std::ostringstream d;
    bool all_converged = true;
    for (const auto& [name, tr] : runs) {
        all_converged = all_converged && tr->termination.reason == TerminationReason::grad_tol;
        for (const auto& r : tr->records) {
            if (!r.eta) {
                continue;
            }
            ++checked;
            if (!(*r.f_next <= r.f - omega(*r.eta) + 1e-10 * (1.0 + std::abs(r.f)))) {
                ++bad;
            }
        }
        d << name << " " << tr->iterations() << " it; ";
    }
    d << checked << " steps checked, " << bad << " violations, " << fmt("%.2f", elapsed) << " s";
    return {bad == 0 && checked > 0 && all_converged && elapsed < 5.0, d.str()};
}

using q128 = __float128;

q128 softplus_q(q128 z) { return z > 0 ? z + log1pq(expq(-z)) : log1pq(expq(z)); }

// Logistic value at x + t*d with the ray and the sum carried in binary128, so
// the f difference across a step is not buried under the rounding of f itself.
q128 logistic_on_ray(const LogisticObjective& obj, const Vector& x, const Vector& d, q128 t) {
    const SparseDataset& ds = obj.data();
    q128 loss = 0, sq = 0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        q128 m = 0;
        for (SparseRows::InnerIterator it(ds.features, i); it; ++it) {
            m += q128(it.value()) * (q128(x[it.col()]) + t * q128(d[it.col()]));
        }
        loss += softplus_q(-q128(ds.labels[i]) * m);
    }
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const q128 w = q128(x[j]) + t * q128(d[j]);
        sq += w * w;
    }
    return q128(obj.sc_scale()) * (loss + sq / 2) / q128(ds.rows());
}

// 3. Every adaptive step satisfies Armijo with c1 = ½, judged on the exact ray.
Verdict armijo_half() {
    const LogisticObjective& obj = desk_logistic();
    std::size_t checked = 0, bad = 0, bad_binary64 = 0;
    double worst_eta = 0.0;
    for (const auto& [name, tr] : adaptive_runs()) {
        for (const auto& r : tr->records) {
            if (r.step_kind != StepKind::adaptive) {
                continue;
            }
            ++checked;
            if (!armijo_check(r.f, *r.f_next, *r.t, -*r.rho, 0.5)) {
                ++bad_binary64;
            }
            const Vector& x = tr->iterates[r.k];
            const Vector& d = tr->directions[r.k];
            const q128 df = logistic_on_ray(obj, x, d, *r.t) - logistic_on_ray(obj, x, d, 0);
            if (!(df <= -q128(0.5) * q128(*r.t) * q128(*r.rho))) {
                ++bad;
                worst_eta = std::max(worst_eta, *r.eta);
            }
        }
    }
    std::string detail = std::to_string(checked) + " adaptive steps, " + std::to_string(bad) +
                         " fail in binary128 (" + std::to_string(bad_binary64) + " with binary64 f)";
    if (bad > 0) {
        detail += ", failing steps have eta <= " + fmt("%.2g", worst_eta);
    }
    return {bad == 0 && checked > 0, detail};
}

// 4. With c2 = 0.75, every step with η ≤ 1.5 satisfies Wolfe.
Verdict conditional_wolfe() {
    const double c2 = 0.75;
    const double eta_max = c2 / (2.0 * (1.0 - c2));
    std::size_t checked = 0, bad = 0;
    for (const auto& [name, tr] : adaptive_runs()) {
        for (const auto& r : tr->records) {
            if (!r.eta || *r.eta > eta_max) {
                continue;
            }
            ++checked;
            if (!wolfe_check(*r.gd_next, -*r.rho, c2)) {
                ++bad;
            }
        }
    }
    return {bad == 0 && checked > 0,
            std::to_string(checked) + " steps with eta <= 1.5, " + std::to_string(bad) + " fail"};
}

// 5. Grid search over Δ(τ) = (ρ+δ)τ + log(1−δτ) never beats the adaptive step.
Verdict step_optimality() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> expo(-2.0, 2.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 1000; ++trial) {
        const double rho = std::pow(10.0, expo(rng));
        const double delta = std::pow(10.0, expo(rng));
        auto gain = [&](double tau) { return (rho + delta) * tau + std::log1p(-delta * tau); };
        const double best = gain(adaptive_step(rho, delta));
        const int points = 20000;
        for (int i = 1; i < points; ++i) {
            worst = std::max(worst, gain(static_cast<double>(i) / points / delta) - best);
        }
    }
    return {worst <= 1e-8, "1000 pairs x 20000 grid points, max excess " + fmt("%.3g", worst)};
}

// 6. Secant residuals, and two-loop vs dense BFGS directions along one trajectory.
Verdict bfgs_structure() {
    std::mt19937_64 rng(6);
    double worst_secant = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Index n = 2 + i % 19;
        const Matrix h0 = random_spd(n, rng);
        const Vector s = random_vector(n, rng);
        const Vector y = random_spd(n, rng) * s;
        const Matrix h = bfgs_update_dense(h0, s, y);
        worst_secant = std::max(worst_secant, (h * y - s).norm() / (1.0 + s.norm()));
    }

    RunConfig cfg;
    cfg.direction = BfgsDense{};
    cfg.max_iters = 50;
    cfg.keep_iterates = true;
    const LogisticObjective& obj = desk_logistic();
    const Trace tr = run(cfg, obj);
    InverseHessianState loop(BfgsTwoLoopUnlimited{}, obj.dimension());
    double worst_dir = 0.0;
    for (std::size_t k = 0; k < tr.directions.size(); ++k) {
        const Vector g = obj.gradient(tr.iterates[k]);
        const Vector d = loop.compute_direction(obj, tr.iterates[k], g).d;
        worst_dir = std::max(worst_dir, (d - tr.directions[k]).norm() / tr.directions[k].norm());
        loop.ingest_pair(tr.iterates[k + 1] - tr.iterates[k], obj.gradient(tr.iterates[k + 1]) - g);
    }
    const bool pass = worst_secant <= 1e-10 && worst_dir <= 1e-8 && tr.directions.size() == 50;
    return {pass, "max secant residual " + fmt("%.2g", worst_secant) + ", " + std::to_string(tr.directions.size()) +
                      " shared steps, max direction rel diff " + fmt("%.2g", worst_dir)};
}

// 7. BFGS-A: converges, t → 1 over the final 20%, error ratios shrink.
Verdict superlinear_signature() {
    const auto start = Clock::now();
    const Trace& tr = desk_runs().bfgs;
    const SuperlinearReport rep = superlinear_report(tr);
    const double elapsed = seconds_since(start);

    std::vector<double> ts;
    for (const auto& r : tr.records) {
        if (r.t) {
            ts.push_back(*r.t);
        }
    }
    const auto tail = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(ts.size())));
    std::size_t outside = 0;
    double t_lo = INFINITY, t_hi = -INFINITY;
    for (std::size_t i = ts.size() - tail; i < ts.size(); ++i) {
        outside += std::abs(ts[i] - 1.0) >= 0.1;
        t_lo = std::min(t_lo, ts[i]);
        t_hi = std::max(t_hi, ts[i]);
    }
    const bool converged = tr.termination.reason == TerminationReason::grad_tol && tr.last().gnorm < 1e-7;
    const bool final_ratio = !rep.tail_err_ratios.empty() && rep.tail_err_ratios.back() < 0.1;

    std::ostringstream d;
    d << tr.iterations() << " it, gnorm " << fmt("%.2g", tr.last().gnorm) << "; t in [" << fmt("%.3f", t_lo) << ", "
      << fmt("%.3f", t_hi) << "] over last " << tail << " steps (" << outside << " outside band); last ratios";
    const std::size_t show = std::min<std::size_t>(5, rep.tail_err_ratios.size());
    for (std::size_t i = rep.tail_err_ratios.size() - show; i < rep.tail_err_ratios.size(); ++i) {
        d << ' ' << fmt("%.3f", rep.tail_err_ratios[i]);
    }
    d << "; " << fmt("%.2f", elapsed) << " s";
    return {converged && outside == 0 && rep.superlinear && final_ratio && elapsed < 10.0, d.str()};
}

// 8. GD-A has a negative least-squares slope of log(f − f*) against k.
Verdict linear_envelope() {
    const Trace& tr = desk_runs().gd;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (const auto& r : tr.records) {
        if (!r.log_gap) {
            continue;
        }
        const double x = static_cast<double>(r.k);
        sx += x;
        sy += *r.log_gap;
        sxx += x * x;
        sxy += x * *r.log_gap;
        n += 1;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {n > 2 && slope < 0.0, fmt("%.0f", n) + " points, slope " + fmt("%.4f", slope) + " decades/iteration"};
}

// 9. Finite-difference agreement for logistic and sampled online-LS oracles.
Verdict derivatives() {
    std::mt19937_64 rng(9);
    const LogisticObjective& lg = desk_logistic();
    OnlineSampler sampler(synthetic_spd(30, 1.0, 1e4, 7), sparse_beta(30, 8), 1.0 / 30.0, 9);
    double worst_g = 0.0, worst_h = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Vector w = random_vector(50, rng, 0.05);
        const Vector d = random_vector(50, rng);
        worst_g = std::max(worst_g, rel_err(lg.gradient(w), fd_gradient(lg, w)));
        worst_h = std::max(worst_h, rel_err(lg.hess_vec(w, d), fd_hess_vec(lg, w, d)));

        const SampledBatchOracle b = sampler.draw_batch(15);
        const Vector v = random_vector(30, rng);
        const Vector e = random_vector(30, rng);
        worst_g = std::max(worst_g, rel_err(b.gradient(v), fd_gradient(b, v)));
        worst_h = std::max(worst_h, rel_err(b.hess_vec(v, e), fd_hess_vec(b, v, e)));
    }
    return {worst_g <= 1e-5 && worst_h <= 1e-4,
            "40 points, max gradient rel err " + fmt("%.2g", worst_g) + ", max hess_vec rel err " + fmt("%.2g", worst_h)};
}

// 10. The four self-concordant bounds hold on the scaled logistic oracle.
Verdict sc_audit() {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> frac(0.0, 0.95);
    const LogisticObjective& obj = desk_logistic();
    std::size_t bad = 0;
    double worst = -INFINITY;
    for (int i = 0; i < 50; ++i) {
        const Vector x = random_vector(50, rng, 0.05);
        const Vector d = random_vector(50, rng, std::pow(10.0, -3.0 + 3.0 * frac(rng)));
        const double f0 = obj.value(x);
        const double gd = obj.gradient(x).dot(d);
        const double delta = std::sqrt(d.dot(obj.hess_vec(x, d)));
        const double t = frac(rng) / delta;
        const double slack = 1e-8 * (1.0 + std::abs(f0));
        const double f1 = obj.value(x + t * d);
        const double gd1 = obj.gradient(x + t * d).dot(d);
        const double margins[] = {sc_lower_f({f0, gd, delta, t}) - f1, f1 - sc_upper_f({f0, gd, delta, t}),
                                  sc_lower_gd(gd, delta, t) - gd1, gd1 - sc_upper_gd(gd, delta, t)};
        for (double m : margins) {
            worst = std::max(worst, m / (1.0 + std::abs(f0)));
            bad += m > slack;
        }
    }
    return {bad == 0, "200 bound checks, " + std::to_string(bad) + " violations, worst relative margin " +
                          fmt("%.2g", worst)};
}

// 11. SBFGS-A reaches log-gap −6 and beats SGD with α₁ by two decades.
Verdict stochastic_regression() {
    const auto start = Clock::now();
    const Eigen::Index p = 30;
    const std::uint64_t seed = 7;
    const Matrix sigma = synthetic_spd(p, 1.0, 1e4, seed);
    const Vector beta = sparse_beta(p, seed + 1);
    const double lambda = 1.0 / static_cast<double>(p);
    const OnlineLsExpectedObjective expected(sigma, beta, lambda);

    auto go = [&](StochasticMethod m, StepRule step) {
        StochasticConfig cfg;
        cfg.method = m;
        cfg.step = std::move(step);
        cfg.schedule = GrowingBatch{static_cast<std::size_t>((p + 1) / 2), 1.05, 50};
        cfg.max_iters = 3000;
        OnlineSampler sampler(sigma, beta, lambda, seed + 2);
        return stochastic_run(cfg, sampler, expected);
    };
    const Trace sbfgs = go(StochasticMethod::bfgs, Adaptive{});
    const Trace sgd = go(StochasticMethod::sgd, Constant{ConstantStepTable::alpha(1)});
    const double elapsed = seconds_since(start);

    double best = INFINITY;
    for (const auto& r : sbfgs.records) {
        if (r.log_gap) {
            best = std::min(best, *r.log_gap);
        }
    }
    const double final_sbfgs = sbfgs.last().log_gap.value_or(-INFINITY);
    const double final_sgd = sgd.last().log_gap.value_or(-INFINITY);
    const double margin = final_sgd - final_sbfgs;
    std::ostringstream d;
    d << "SBFGS-A best log-gap " << fmt("%.2f", best) << " (final " << fmt("%.2f", final_sbfgs) << "), SGD-alpha1 final "
      << fmt("%.2f", final_sgd) << ", margin " << fmt("%.2f", margin) << " at k=3000, " << fmt("%.1f", elapsed) << " s";
    return {best <= -6.0 && margin >= 2.0 && elapsed < 60.0, d.str()};
}

// 12. BFGS-H needs no more iterations than BFGS-A.
Verdict hybrid_behavior() {
    const DeskRuns& r = desk_runs();
    const bool both = r.hybrid.termination.reason == TerminationReason::grad_tol &&
                      r.bfgs.termination.reason == TerminationReason::grad_tol;
    return {both && r.hybrid.iterations() <= r.bfgs.iterations(),
            "BFGS-H " + std::to_string(r.hybrid.iterations()) + " it, BFGS-A " + std::to_string(r.bfgs.iterations()) +
                " it"};
}

// 13. Parser examples, error cases and round trip.
Verdict parser() {
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) {
            failures.push_back(what);
        }
    };
    auto error_line = [](const std::string& text) -> std::size_t {
        try {
            parse_libsvm(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };

    const SparseDataset one = parse_libsvm("+1 1:0.5 3:-0.2");
    expect(one.rows() == 1 && one.cols() == 3 && one.labels[0] == 1.0 && one.features.coeff(0, 0) == 0.5 &&
               one.features.coeff(0, 2) == -0.2 && one.features.nonZeros() == 2,
           "single record");
    const SparseDataset mapped = parse_libsvm("0 2:1\n1 1:1");
    expect(mapped.rows() == 2 && mapped.cols() == 2 && mapped.labels[0] == -1.0 && mapped.labels[1] == 1.0,
           "0/1 labels");
    expect(error_line("+1 3:1 2:1") == 1, "non-increasing indices");
    expect(error_line("+1 1:1\n# c\n-1 1:x\n") == 3, "non-numeric value line number");
    expect(error_line("+1 1:1\n2 1:1\n") == 2, "bad label");
    expect(error_line("+1 0:1\n") == 1, "zero index");
    expect(parse_libsvm("# only\n\n+1 2:1 # tail\n").rows() == 1, "comments and blank lines");
    expect(parse_libsvm("+1 2:1\n", Eigen::Index{9}).cols() == 9, "dimension override");

    const SparseDataset ds = synth_logistic(60, 12, 3, 1.0);
    std::ostringstream a;
    write_libsvm(a, ds);
    const SparseDataset back = parse_libsvm(a.str(), ds.cols());
    std::ostringstream b;
    write_libsvm(b, back);
    expect(a.str() == b.str() && Matrix(back.features) == Matrix(ds.features) && back.labels == ds.labels,
           "round trip");

    std::string detail = "8 cases + round trip";
    for (const auto& f : failures) {
        detail += "; failed: " + f;
    }
    return {failures.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"damped Newton recursion", damped_newton_recursion},
        {"decrease guarantee", decrease_guarantee},
        {"Armijo with c1 = 1/2", armijo_half},
        {"conditional Wolfe", conditional_wolfe},
        {"step optimality", step_optimality},
        {"BFGS structure", bfgs_structure},
        {"superlinear signature", superlinear_signature},
        {"linear convergence envelope", linear_envelope},
        {"derivative correctness", derivatives},
        {"self-concordance audit", sc_audit},
        {"stochastic regression", stochastic_regression},
        {"hybrid behavior", hybrid_behavior},
        {"parser", parser},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
