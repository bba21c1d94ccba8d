#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"
#include "driftlab/sde.hpp"

namespace driftlab {

/// One diagnostic outcome: the statistic ladder, the fitted trend, and the
/// pass flag of the registered criterion (a pure function of the ladder).
struct DiagnosticVerdict {
    std::string kind;  // divergence | gap | invariance
    std::vector<json> ladder;
    json fitted;
    bool pass = false;

    json to_json() const {
        return json{{"kind", kind}, {"ladder", ladder}, {"fitted", fitted}, {"pass", pass}};
    }
};

namespace counter_detail {

inline std::vector<double> ladder_ratios(const std::vector<double>& values) {
    std::vector<double> r;
    for (std::size_t i = 1; i < values.size(); ++i)
        r.push_back(values[i - 1] > 0 ? values[i] / values[i - 1] : 0.0);
    return r;
}

}  // namespace counter_detail

/// Divergence diagnostic for the drift -t^{-alpha}|x|^{-beta} x/|x| with
/// alpha + beta = 1: ladder of D(h) = E int_0^T s^-alpha |x_s|^-beta ds under
/// mesh refinement. The registered pass rule is ratio >= min_ratio at every
/// halving over >= 4 rungs.
inline DiagnosticVerdict nonexistence_diagnostic(double alpha, double beta,
                                                 const std::vector<double>& h_ladder, double T,
                                                 std::size_t n_paths, std::uint64_t seed,
                                                 bool control_bm = false, int dim = 2,
                                                 double min_ratio = 1.5) {
    if (std::abs(alpha + beta - 1.0) > 1e-12)
        throw ConfigError("alpha", "nonexistence diagnostic requires alpha + beta = 1");
    if (h_ladder.size() < 2) throw ConfigError("h_ladder", "need at least two rungs");
    SimSpec spec;
    spec.sigma.kind = "identity";
    spec.sigma.dim = spec.sigma.dim1 = dim;
    spec.drift.dim = dim;
    if (control_bm) {
        spec.drift.kind = "zero";
    } else {
        spec.drift.kind = "example_3_22_1";
        spec.drift.params["alpha"] = alpha;
        spec.drift.params["beta"] = beta;
    }
    spec.x0 = Vec(dim, 0.0);
    spec.horizon = T;
    spec.n_paths = n_paths;
    spec.seed = seed;
    spec.policy = DriftPolicy::cap_displacement;

    PathFunctional fn;
    fn.kind = "power_st";
    fn.alpha = alpha;
    fn.beta = beta;
    const auto entries = refine_study(spec, fn, h_ladder);

    DiagnosticVerdict v;
    v.kind = "divergence";
    std::vector<double> means;
    for (const auto& e : entries) {
        means.push_back(e.result.mean);
        v.ladder.push_back(json{{"h", e.h},
                                {"value", e.result.mean},
                                {"std_error", e.result.std_error},
                                {"cap_triggers", e.result.cap_triggers},
                                {"n_diverged", e.result.n_diverged}});
    }
    const auto ratios = counter_detail::ladder_ratios(means);
    bool all = ratios.size() >= 3;
    for (double r : ratios) all = all && r >= min_ratio;
    v.pass = all;
    v.fitted = json{{"ratios", ratios}, {"min_ratio", min_ratio}};
    return v;
}

/// Weak-uniqueness gap for the drift t^{-1/q} sign(x^1): p+(delta) - p-(delta)
/// along a delta ladder, with p+- = P(inf_{t<=t0} x^1 >= 0 | start +-delta).
/// Pass iff the finest-rung gap clears min_gap with 3 sigma.
inline DiagnosticVerdict nonuniqueness_gap(double q, const std::vector<double>& delta_ladder,
                                           double t0, double h, std::size_t n_paths,
                                           std::uint64_t seed, bool control_bm = false,
                                           double min_gap = 0.45) {
    if (!(q > 1.0 && q < 2.0)) throw ConfigError("q", "Example 3.22.2 needs q in (1,2)");
    SimSpec spec;
    spec.sigma.kind = "identity";
    spec.sigma.dim = spec.sigma.dim1 = 2;
    spec.drift.dim = 2;
    if (control_bm) {
        spec.drift.kind = "zero";
    } else {
        spec.drift.kind = "example_3_22_2";
        spec.drift.params["q"] = q;
        spec.quadrature = DriftQuadrature::step_integral;
    }
    spec.horizon = t0;
    spec.h = h;
    spec.n_paths = n_paths;
    spec.seed = seed;
    spec.policy = DriftPolicy::none;

    auto stay_prob = [&](double start, int sign_functional) {
        SimSpec local = spec;
        local.x0 = {start, 0.0};
        std::vector<std::size_t> block_ok(kParallelBlocks, 0), block_n(kParallelBlocks, 0);
        for_paths(local, [&](std::size_t bi, std::size_t p) {
            PathWalker w(local, p);
            bool ok = sign_functional > 0 ? w.x[0] >= 0.0 : w.x[0] <= 0.0;
            while (ok && !w.at_end() && !w.diverged) {
                w.advance();
                ok = sign_functional > 0 ? w.x[0] >= 0.0 : w.x[0] <= 0.0;
            }
            ++block_n[bi];
            if (ok) ++block_ok[bi];
        });
        std::size_t okc = 0, n = 0;
        for (std::size_t b = 0; b < kParallelBlocks; ++b) {
            okc += block_ok[b];
            n += block_n[b];
        }
        const double pr = n ? static_cast<double>(okc) / n : 0.0;
        return std::pair<double, double>(pr, std::sqrt(std::max(pr * (1 - pr), 0.25 / n) / n));
    };

    DiagnosticVerdict v;
    v.kind = "gap";
    double last_gap = 0.0, last_se = 1.0;
    for (double delta : delta_ladder) {
        const auto [pp, pp_se] = stay_prob(+delta, +1);
        const auto [pm, pm_se] = stay_prob(-delta, +1);
        last_gap = pp - pm;
        last_se = std::sqrt(pp_se * pp_se + pm_se * pm_se);
        v.ladder.push_back(json{{"delta", delta},
                                {"p_plus", pp},
                                {"p_minus", pm},
                                {"gap", last_gap},
                                {"std_error", last_se}});
    }
    if (control_bm)
        v.pass = std::abs(last_gap) <= std::max(0.05, 3.0 * last_se);  // gap -> 0
    else
        v.pass = last_gap - 3.0 * last_se >= min_gap;
    v.fitted = json{{"gap", last_gap}, {"std_error", last_se}, {"min_gap", min_gap}};
    return v;
}

/// Pilot sizing of t0: largest rung of the ladder with
/// P(inf_{t<=t0}(c_q t^{1-1/q} + w^1_t) >= 0, sup_{t<=t0}|w^2_t| <= 1) >= 3/4.
inline double pilot_gap_t0(double q, const std::vector<double>& t0_ladder, double h,
                           std::size_t n_paths, std::uint64_t seed) {
    const double cq = q / (q - 1.0);  // int_0^t s^{-1/q} ds = cq t^{1-1/q}
    double best = t0_ladder.empty() ? 0.1 : t0_ladder.back();
    for (double t0 : t0_ladder) {
        const long K = static_cast<long>(std::ceil(t0 / h));
        std::vector<std::size_t> block_ok(kParallelBlocks, 0);
        parallel_blocks(n_paths, [&](std::size_t bi, std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) {
                double w1 = 0, w2 = 0;
                bool ok = true;
                for (long k = 0; k < K && ok; ++k) {
                    w1 += std::sqrt(h) * CounterRng::gaussian(seed, p, k, 0);
                    w2 += std::sqrt(h) * CounterRng::gaussian(seed, p, k, 1);
                    const double t = (k + 1) * h;
                    ok = (cq * std::pow(t, 1.0 - 1.0 / q) + w1 >= 0.0) && (std::abs(w2) <= 1.0);
                }
                if (ok) ++block_ok[bi];
            }
        });
        std::size_t okc = 0;
        for (auto c : block_ok) okc += c;
        if (static_cast<double>(okc) / n_paths >= 0.75) {
            best = t0;
            break;  // ladder is descending: first (largest) admissible rung wins
        }
    }
    return best;
}

/// Radial-drift threshold (b = -eps d x/|x|^2, sigma = sqrt(2) I, d = 3):
/// refinement ladder of int |b| ds per eps; divergent when the tail ratio
/// clears div_ratio, bounded when it stays under bnd_ratio.
struct RadialThresholdResult {
    DiagnosticVerdict divergent_case;
    DiagnosticVerdict bounded_case;
    bool separated = false;
    json to_json() const {
        return json{{"divergent", divergent_case.to_json()},
                    {"bounded", bounded_case.to_json()},
                    {"separated", separated}};
    }
};

inline DiagnosticVerdict radial_ladder(double eps, const std::vector<double>& h_ladder, double T,
                                       std::size_t n_paths, std::uint64_t seed, double div_ratio,
                                       double bnd_ratio, bool expect_divergent) {
    SimSpec spec;
    spec.sigma.kind = "identity";
    spec.sigma.dim = spec.sigma.dim1 = 3;
    spec.sigma.params["scale"] = std::sqrt(2.0);
    spec.drift.kind = eps == 0.0 ? "zero" : "radial_inverse";
    spec.drift.dim = 3;
    if (eps != 0.0) spec.drift.params["c"] = eps * 3.0;
    spec.x0 = Vec(3, 0.0);
    spec.horizon = T;
    spec.n_paths = n_paths;
    spec.seed = seed;
    spec.policy = DriftPolicy::cap_displacement;

    PathFunctional fn;
    fn.kind = "abs_drift";
    const auto entries = refine_study(spec, fn, h_ladder);
    DiagnosticVerdict v;
    v.kind = "divergence";
    std::vector<double> means;
    for (const auto& e : entries) {
        means.push_back(e.result.mean);
        v.ladder.push_back(json{{"h", e.h}, {"value", e.result.mean},
                                {"std_error", e.result.std_error},
                                {"cap_triggers", e.result.cap_triggers}});
    }
    const auto ratios = counter_detail::ladder_ratios(means);
    const double tail = ratios.empty() ? 1.0 : ratios.back();
    v.fitted = json{{"ratios", ratios}, {"tail_ratio", tail},
                    {"div_ratio", div_ratio}, {"bnd_ratio", bnd_ratio}};
    v.pass = expect_divergent ? tail >= div_ratio : tail <= bnd_ratio;
    return v;
}

inline RadialThresholdResult radial_drift_threshold(const std::vector<double>& h_ladder, double T,
                                                    std::size_t n_paths, std::uint64_t seed,
                                                    double eps_small = 0.05, double div_ratio = 1.2,
                                                    double bnd_ratio = 1.1) {
    RadialThresholdResult out;
    out.divergent_case =
        radial_ladder(1.0, h_ladder, T, n_paths, seed, div_ratio, bnd_ratio, true);
    out.bounded_case =
        radial_ladder(eps_small, h_ladder, T, n_paths, seed + 1, div_ratio, bnd_ratio, false);
    out.separated = out.divergent_case.pass && out.bounded_case.pass;
    return out;
}

/// Dilation invariance of the nonexistence diagnostic (Remark 12.22.1): the
/// eps-scaled problem over [0, c^2 T] at step c^2 h, viewed through
/// y = x / c with c = eps^{1/alpha}, is the unit problem over [0, T] at step
/// h, and the functional transforms by c^{2 - 2 alpha - beta}. Both runs use
/// the same seed, so agreement is statistical only through fp decoherence.
inline DiagnosticVerdict nonexistence_invariance(double alpha, double beta, double eps,
                                                 const std::vector<double>& h_ladder, double T,
                                                 std::size_t n_paths, std::uint64_t seed,
                                                 double agree_tol = 0.1) {
    const double c = std::pow(eps, 1.0 / alpha);
    SimSpec spec;
    spec.sigma.kind = "identity";
    spec.sigma.dim = spec.sigma.dim1 = 2;
    spec.drift.kind = "example_3_22_1";
    spec.drift.dim = 2;
    spec.drift.params["alpha"] = alpha;
    spec.drift.params["beta"] = beta;
    spec.x0 = Vec(2, 0.0);
    spec.n_paths = n_paths;
    spec.seed = seed;
    spec.policy = DriftPolicy::cap_displacement;

    PathFunctional fn;
    fn.kind = "power_st";
    fn.alpha = alpha;
    fn.beta = beta;

    DiagnosticVerdict v;
    v.kind = "invariance";
    bool all_ok = true;
    for (double h : h_ladder) {
        SimSpec unit_spec = spec;
        unit_spec.horizon = T;
        unit_spec.h = h;
        const auto unit_run = run_functional(unit_spec, fn);

        SimSpec eps_spec = spec;
        eps_spec.drift.params["scale"] = eps;
        eps_spec.horizon = c * c * T;
        eps_spec.h = c * c * h;
        const auto eps_run = run_functional(eps_spec, fn);

        const double rescaled = eps_run.mean / std::pow(c, 2.0 - 2.0 * alpha - beta);
        const double rel =
            unit_run.mean > 0 ? std::abs(unit_run.mean - rescaled) / unit_run.mean : 0.0;
        all_ok = all_ok && rel <= agree_tol;
        v.ladder.push_back(json{{"h", h},
                                {"unit_value", unit_run.mean},
                                {"rescaled_eps_value", rescaled},
                                {"rel_diff", rel}});
    }
    v.pass = all_ok;
    v.fitted = json{{"c", c}, {"tol", agree_tol}};
    return v;
}

}  // namespace driftlab
