#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"
#include "driftlab/grid.hpp"
#include "driftlab/morrey.hpp"
#include "driftlab/sde.hpp"

namespace driftlab {

/// The universal output record: point estimate, statistical error, and the
/// configuration fingerprint that reproduces it.
struct EstimateReport {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_diverged = 0;
    std::string fingerprint;

    json to_json() const {
        return json{{"value", value},
                    {"std_error", std_error},
                    {"n_samples", n_samples},
                    {"n_diverged", n_diverged},
                    {"fingerprint", fingerprint}};
    }
};

/// Empirical surrogates of the regularity constants, with fit diagnostics.
struct RegularityConstants {
    double sb0_hat = 0.0;    // moderated-drift surrogate
    double sp0_hat = 0.0;    // exit-probability surrogate, in (0,1)
    double gamma_hat = 0.0;  // occupation exponent
    double d0_hat = 0.0;     // Fabes-Stroock exponent slot
    json diagnostics;

    json to_json() const {
        return json{{"sb0_hat", sb0_hat},
                    {"sp0_hat", sp0_hat},
                    {"gamma_hat", gamma_hat},
                    {"d0_hat", d0_hat},
                    {"diagnostics", diagnostics}};
    }
};

// ---------------------------------------------------------------------------
// Potentials.
// ---------------------------------------------------------------------------

struct StopRule {
    enum class Kind { horizon, exit } kind = Kind::horizon;
    ExitDomain domain;  // used when kind == exit

    static StopRule horizon() { return {}; }
    static StopRule exit(ExitDomain d) { return {Kind::exit, std::move(d)}; }
};

/// MC estimate of E int_0^stop e^{-lambda s} f(t0+s, x_s) ds by left-endpoint
/// quadrature, matched to the exit convention (the sum never samples a state
/// outside the domain).
inline EstimateReport potential(const SimSpec& spec, const ScalarField& f, double lambda,
                                const StopRule& stop) {
    if (lambda < 0.0) throw ConfigError("lambda", "resolvent weight must be >= 0");
    struct Block {
        double sum = 0, sumsq = 0;
        std::size_t n = 0, diverged = 0;
    };
    std::vector<Block> blocks(kParallelBlocks);
    const double shift = stop.kind == StopRule::Kind::exit
                             ? detail::boundary_shift_amount(spec, stop.domain.center)
                             : 0.0;
    for_paths(spec, [&](std::size_t bi, std::size_t p) {
        PathWalker w(spec, p);
        double acc = 0.0;
        while (!w.at_end() && !w.diverged) {
            const double s = w.elapsed();
            if (stop.kind == StopRule::Kind::exit) {
                const ExitDomain& dom = stop.domain;
                if (dom.kind == ExitDomain::Kind::cylinder && s >= dom.rho * dom.rho) break;
                if (dist2(w.x, dom.center) >= dom.rho - shift) break;
            }
            double fv = 0.0;
            try {
                fv = f.eval(spec.t0 + s, w.x);
            } catch (const SingularityError&) {
                fv = 0.0;  // measure-zero grid hit; the path policy owns floors
            }
            acc += std::exp(-lambda * s) * fv * spec.h;
            w.advance();
        }
        Block& b = blocks[bi];
        if (w.diverged) {
            ++b.diverged;
        } else {
            b.sum += acc;
            b.sumsq += acc * acc;
            ++b.n;
        }
    });
    EstimateReport rep;
    double sum = 0, sumsq = 0;
    for (const auto& b : blocks) {
        sum += b.sum;
        sumsq += b.sumsq;
        rep.n_samples += b.n;
        rep.n_diverged += b.diverged;
    }
    if (rep.n_samples > 0) {
        rep.value = sum / static_cast<double>(rep.n_samples);
        const double var = std::max(0.0, sumsq / static_cast<double>(rep.n_samples) - sq(rep.value));
        rep.std_error = std::sqrt(var / static_cast<double>(rep.n_samples));
    }
    rep.fingerprint = spec.fingerprint();
    return rep;
}

// ---------------------------------------------------------------------------
// Aleksandrov-type ratio: the empirical constant in
//   E int_0^{theta tau_rho} f ds <= N rho^2 avg-norm(f).
// ---------------------------------------------------------------------------

struct RatioEntry {
    std::string label;
    double potential_value = 0, potential_se = 0;
    double normalized = 0;
    double ratio = 0;
};

struct AleksandrovResult {
    double n_hat = 0.0;
    std::vector<RatioEntry> table;
    json to_json() const {
        json rows = json::array();
        for (const auto& r : table)
            rows.push_back({{"label", r.label},
                            {"potential", r.potential_value},
                            {"potential_se", r.potential_se},
                            {"normalized_norm", r.normalized},
                            {"ratio", r.ratio}});
        return json{{"N_hat", n_hat}, {"family", rows}};
    }
};

/// Builds the test family (indicators of random sub-cylinders plus smooth
/// bumps), runs the exit-stopped potential for each member, and reports the
/// sup ratio against rho^2 times the normalized mixed norm.
inline AleksandrovResult aleksandrov_ratio(const SimSpec& spec, double rho,
                                           const MixedNormSpec& norm_spec, int n_members,
                                           std::uint64_t family_seed, int grid_n_t = 16,
                                           int grid_n_x = 33) {
    if (n_members < 1) throw ConfigError("family", "empty test family");
    const int d = spec.dim();
    const Cylinder region{spec.t0, spec.x0, rho};
    AleksandrovResult out;
    SimSpec run = spec;
    run.horizon = rho * rho + run.h;  // theta tau_rho is capped at rho^2 anyway
    const auto stop = StopRule::exit(ExitDomain::cylinder(spec.t0, spec.x0, rho));

    const double margin = 1e-9;
    GridFunction sample_grid(d, region.t0 - margin, region.t1() + margin, grid_n_t,
                             *std::min_element(spec.x0.begin(), spec.x0.end()) - rho - margin,
                             *std::max_element(spec.x0.begin(), spec.x0.end()) + rho + margin,
                             grid_n_x);

    for (int m = 0; m < n_members; ++m) {
        ScalarField f;
        f.dim = d;
        if (m % 2 == 0) {
            // random sub-cylinder indicator inside the region
            const double u = CounterRng::uniform(family_seed, m, 0, 0);
            const double sub_rho = rho * (0.25 + 0.5 * u);
            Vec c(d);
            for (int i = 0; i < d; ++i) {
                const double v = CounterRng::uniform(family_seed, m, 1, i);
                c[i] = spec.x0[i] + (2.0 * v - 1.0) * (rho - sub_rho);
            }
            const double ut = CounterRng::uniform(family_seed, m, 2, 0);
            const double t0 = region.t0 + ut * std::max(0.0, rho * rho - sub_rho * sub_rho);
            f.kind = "indicator_cylinder";
            f.params["rho"] = sub_rho;
            f.params["t0"] = t0;
            f.vec_params["center"] = c;
        } else {
            Vec c(d);
            for (int i = 0; i < d; ++i) {
                const double v = CounterRng::uniform(family_seed, m, 3, i);
                c[i] = spec.x0[i] + (2.0 * v - 1.0) * 0.5 * rho;
            }
            f.kind = "gaussian_bump";
            f.params["amp"] = 1.0;
            f.params["width"] = rho * (0.15 + 0.35 * CounterRng::uniform(family_seed, m, 4, 0));
            f.vec_params["center"] = c;
        }
        sample_grid.sample_field(f);
        const double nn = normalized_norm(sample_grid, norm_spec, region);
        const auto rep = potential(run, f, 0.0, stop);
        RatioEntry e;
        e.label = f.kind + "#" + std::to_string(m);
        e.potential_value = rep.value;
        e.potential_se = rep.std_error;
        e.normalized = nn;
        e.ratio = nn > 0 ? rep.value / (rho * rho * nn) : 0.0;
        out.n_hat = std::max(out.n_hat, e.ratio);
        out.table.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Moderated drift.
// ---------------------------------------------------------------------------

struct ModeratedDriftResult {
    double b_bar = 0.0;  // sup over anchors of rho^{-1} E int |b| ds
    std::vector<json> anchors;
    json to_json() const { return json{{"b_bar", b_bar}, {"anchors", anchors}}; }
};

/// Estimates bar-b_rho = sup over (t, x, y) anchors of
/// rho^{-1} E int_0^{theta tau_rho(y)} |b| ds, with |b| the drift magnitude
/// the policy actually applies.
inline ModeratedDriftResult moderated_drift(const SimSpec& base, double rho,
                                            const std::vector<std::pair<Vec, Vec>>& anchors_xy,
                                            double t_anchor = 0.0) {
    ModeratedDriftResult out;
    for (const auto& [x0, y] : anchors_xy) {
        SimSpec spec = base;
        spec.t0 = t_anchor;
        spec.x0 = x0;
        spec.horizon = rho * rho + spec.h;
        const double shift = detail::boundary_shift_amount(spec, y);
        struct Block {
            double sum = 0, sumsq = 0;
            std::size_t n = 0;
        };
        std::vector<Block> blocks(kParallelBlocks);
        for_paths(spec, [&](std::size_t bi, std::size_t p) {
            PathWalker w(spec, p);
            double acc = 0.0;
            while (!w.at_end() && !w.diverged) {
                if (w.elapsed() >= rho * rho) break;                  // time lid
                if (dist2(w.x, y) >= rho - shift) break;              // ball exit
                acc += norm2(w.drift_displacement());
                w.advance();
            }
            Block& b = blocks[bi];
            if (!w.diverged) {
                b.sum += acc;
                b.sumsq += acc * acc;
                ++b.n;
            }
        });
        double sum = 0, sumsq = 0;
        std::size_t n = 0;
        for (const auto& b : blocks) {
            sum += b.sum;
            sumsq += b.sumsq;
            n += b.n;
        }
        const double mean = n ? sum / n : 0.0;
        const double se = n ? std::sqrt(std::max(0.0, sumsq / n - mean * mean) / n) : 0.0;
        out.anchors.push_back(json{{"x", x0}, {"y", y}, {"t", t_anchor},
                                   {"value", mean / rho}, {"std_error", se / rho}});
        out.b_bar = std::max(out.b_bar, mean / rho);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exit-time tails and Laplace transforms.
// ---------------------------------------------------------------------------

struct ExitTailResult {
    std::vector<double> T_ladder;
    std::vector<double> survival;       // P(theta tau'_rho > T)
    std::vector<std::size_t> counts;
    double fit_rate = 0.0;              // exponential tail fit on log P
    double fit_logN = 0.0;
    double fit_r2 = 0.0;
    double p0_surrogate = 0.0;          // P(tau' < rho^2)
    double small_time_c = 0.0;          // P(tau <= s) <= C exp(-c rho^2/s) fit
    double mean_exit = 0.0;
    double mean_exit_se = 0.0;
    json to_json() const {
        return json{{"T_ladder", T_ladder},   {"survival", survival},
                    {"counts", counts},       {"fit_rate", fit_rate},
                    {"fit_logN", fit_logN},   {"fit_r2", fit_r2},
                    {"p0_surrogate", p0_surrogate}, {"small_time_c", small_time_c},
                    {"mean_exit", mean_exit}, {"mean_exit_se", mean_exit_se}};
    }
};

inline ExitTailResult exit_tail(const SimSpec& spec, double rho, std::vector<double> T_ladder,
                                std::size_t min_tail_count = 10) {
    if (T_ladder.empty()) {
        for (int i = 0; i <= 9; ++i) T_ladder.push_back(rho * rho * (1.0 + i));
    }
    std::sort(T_ladder.begin(), T_ladder.end());
    ExitTailResult out;
    out.T_ladder = T_ladder;
    const ExitDomain dom = ExitDomain::ball(spec.x0, rho);
    std::vector<std::vector<double>> block_times(kParallelBlocks);
    std::vector<std::size_t> block_censored(kParallelBlocks, 0);
    for_paths(spec, [&](std::size_t bi, std::size_t p) {
        const auto rec = first_exit_path(spec, p, dom);
        if (rec.censored)
            ++block_censored[bi];
        else
            block_times[bi].push_back(rec.time);
    });
    std::vector<double> times;
    std::size_t censored = 0;
    for (std::size_t b = 0; b < kParallelBlocks; ++b) {
        times.insert(times.end(), block_times[b].begin(), block_times[b].end());
        censored += block_censored[b];
    }
    if (times.empty()) throw ConfigError("exit_tail", "all paths censored; extend the horizon");
    const std::size_t n = times.size() + censored;

    const auto mv = mean_var(times);
    out.mean_exit = mv.mean;  // biased upward by censoring when censored > 0; reported as-is
    out.mean_exit_se = mv.std_error();

    std::vector<double> fit_x, fit_y;
    out.survival.resize(T_ladder.size());
    out.counts.resize(T_ladder.size());
    for (std::size_t i = 0; i < T_ladder.size(); ++i) {
        std::size_t cnt = censored;  // censored paths exceeded every ladder rung by construction
        for (double t : times)
            if (t > T_ladder[i]) ++cnt;
        out.counts[i] = cnt;
        out.survival[i] = static_cast<double>(cnt) / static_cast<double>(n);
        if (cnt >= min_tail_count) {
            fit_x.push_back(T_ladder[i]);
            fit_y.push_back(std::log(out.survival[i]));
        }
    }
    const auto lf = fit_line(fit_x, fit_y);
    out.fit_rate = -lf.slope;
    out.fit_logN = lf.intercept;
    out.fit_r2 = lf.r2;

    std::size_t below = 0;
    for (double t : times)
        if (t < rho * rho) ++below;
    out.p0_surrogate = static_cast<double>(below) / static_cast<double>(n);

    // small-time tail: fit log P(tau <= s) against rho^2/s
    std::vector<double> sx, sy;
    for (double frac : {0.05, 0.075, 0.1, 0.15, 0.2, 0.3}) {
        const double s = frac * rho * rho;
        std::size_t cnt = 0;
        for (double t : times)
            if (t <= s) ++cnt;
        if (cnt >= min_tail_count && cnt < n) {
            sx.push_back(rho * rho / s);
            sy.push_back(std::log(static_cast<double>(cnt) / static_cast<double>(n)));
        }
    }
    if (sx.size() >= 2) out.small_time_c = -fit_line(sx, sy).slope;
    return out;
}

struct LaplaceExitResult {
    std::vector<double> lambdas;
    std::vector<double> values;     // E e^{-lambda theta tau_rho}
    std::vector<double> envelope;   // -log(value)/sqrt(lambda)
    json to_json() const {
        return json{{"lambda", lambdas}, {"value", values}, {"envelope", envelope}};
    }
};

inline LaplaceExitResult laplace_exit(const SimSpec& spec, double rho, std::vector<double> lambdas) {
    std::sort(lambdas.begin(), lambdas.end());
    const ExitDomain dom = ExitDomain::cylinder(spec.t0, spec.x0, rho);
    std::vector<double> times(spec.n_paths);
    for_paths(spec, [&](std::size_t, std::size_t p) {
        times[p] = first_exit_path(spec, p, dom).time;  // capped at rho^2 by the cylinder lid
    });
    LaplaceExitResult out;
    out.lambdas = lambdas;
    for (double lam : lambdas) {
        double acc = 0.0;
        for (double t : times) acc += std::exp(-lam * t);
        const double v = acc / static_cast<double>(times.size());
        out.values.push_back(v);
        out.envelope.push_back(lam > 0 ? -std::log(v) / std::sqrt(lam) : 0.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Occupation and hitting experiments (Thm 12.21.1 / Cor 10.11.1 shadows).
// ---------------------------------------------------------------------------

/// Gamma subsets of C_R(s,y) realized as seeded unions of grid cells with a
/// target volume fraction; fractions are nested so occupation is monotone in
/// q under coupled paths. `half_space` cuts the cylinder at the center plane
/// instead (exact fraction 1/2 by symmetry).
struct CellSubset {
    Cylinder region;
    int n_t = 8, n_x = 8;
    double fraction = 1.0;
    std::uint64_t seed = 1;
    bool half_space = false;

    /// Membership: the cell rank (a seeded uniform per cell) is below the
    /// fraction. Nested by construction: fraction' < fraction implies subset.
    bool contains(double t, const Vec& x) const {
        if (t < region.t0 || t >= region.t1()) return false;
        if (dist2(x, region.center) >= region.rho) return false;
        if (half_space) return x[0] >= region.center[0];
        if (fraction >= 1.0) return true;
        const double dt = region.rho * region.rho / n_t;
        const double dx = 2.0 * region.rho / n_x;
        const long it = static_cast<long>((t - region.t0) / dt);
        std::uint64_t flat = static_cast<std::uint64_t>(it);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const long k = static_cast<long>((x[i] - (region.center[i] - region.rho)) / dx);
            flat = flat * 4096 + static_cast<std::uint64_t>(k + 1);
        }
        return CounterRng::uniform(seed, flat, 7, 0) < fraction;
    }

    /// Empirical volume fraction |Gamma|/|C_R| on the generating cell grid.
    double measured_fraction(int probe = 40001) const {
        if (fraction >= 1.0) return 1.0;
        std::size_t in_gamma = 0, in_region = 0;
        for (int i = 0; i < probe; ++i) {
            const double t = region.t0 + CounterRng::uniform(99, i, 0, 0) * sq(region.rho);
            Vec x(region.center.size());
            for (std::size_t k = 0; k < x.size(); ++k)
                x[k] = region.center[k] +
                       (2.0 * CounterRng::uniform(99, i, 1, k) - 1.0) * region.rho;
            if (dist2(x, region.center) >= region.rho) continue;
            ++in_region;
            if (contains(t, x)) ++in_gamma;
        }
        return in_region ? static_cast<double>(in_gamma) / in_region : 0.0;
    }
};

struct OccupationResult {
    std::vector<double> fractions;
    std::vector<double> occupation;   // E int 1_Gamma dt (up to exit)
    std::vector<double> std_errors;
    double gamma_hat = 0.0;           // slope of log(occ/R^2) vs log q
    json to_json() const {
        return json{{"q_ladder", fractions}, {"occupation", occupation},
                    {"std_error", std_errors}, {"gamma_hat", gamma_hat}};
    }
};

/// Starts paths at time s - R^2 at seeded points of B_{kappa R}(y) and
/// accumulates time spent in Gamma before exiting B_R(y).
inline OccupationResult occupation_experiment(const SimSpec& base, double R, double kappa,
                                              const Cylinder& target,
                                              const std::vector<double>& q_ladder,
                                              std::uint64_t gamma_seed,
                                              bool half_space_cut = false) {
    OccupationResult out;
    SimSpec spec = base;
    spec.t0 = target.t0 - R * R;
    spec.horizon = 3.0 * R * R;
    const Vec& y = target.center;
    const double shift = detail::boundary_shift_amount(spec, y);
    for (double q : q_ladder) {
        CellSubset gamma{target, 8, 8, q, gamma_seed, half_space_cut};
        struct Block {
            double sum = 0, sumsq = 0;
            std::size_t n = 0;
        };
        std::vector<Block> blocks(kParallelBlocks);
        for_paths(spec, [&](std::size_t bi, std::size_t p) {
            SimSpec local = spec;
            // conditioning set: start exactly at a sampled point of B_{kappa R}(y);
            // odd paths mirror the offset so the start cloud is exactly symmetric
            Vec x0(y.size());
            double r2;
            std::uint64_t draw = 0;
            do {
                r2 = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                    x0[i] =
                        (2.0 * CounterRng::uniform(spec.seed ^ 0xABCD, p / 2, 1000 + draw, i) - 1.0);
                    r2 += sq(x0[i]);
                }
                ++draw;
            } while (r2 >= 1.0);
            if (p % 2 == 1)
                for (double& v : x0) v = -v;
            for (std::size_t i = 0; i < y.size(); ++i) x0[i] = y[i] + kappa * R * x0[i];
            local.x0 = x0;
            PathWalker w(local, p);
            double acc = 0.0;
            while (!w.at_end() && !w.diverged) {
                if (dist2(w.x, y) >= R - shift) break;
                if (gamma.contains(local.t0 + w.elapsed(), w.x)) acc += local.h;
                w.advance();
            }
            Block& b = blocks[bi];
            if (!w.diverged) {
                b.sum += acc;
                b.sumsq += acc * acc;
                ++b.n;
            }
        });
        double sum = 0, sumsq = 0;
        std::size_t n = 0;
        for (const auto& b : blocks) {
            sum += b.sum;
            sumsq += b.sumsq;
            n += b.n;
        }
        const double mean = n ? sum / n : 0.0;
        out.fractions.push_back(q);
        out.occupation.push_back(mean);
        out.std_errors.push_back(n ? std::sqrt(std::max(0.0, sumsq / n - mean * mean) / n) : 0.0);
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < out.fractions.size(); ++i)
        if (out.occupation[i] > 0 && out.fractions[i] > 0 && out.fractions[i] < 1.0 + 1e-12) {
            lx.push_back(std::log(out.fractions[i]));
            ly.push_back(std::log(out.occupation[i] / (R * R)));
        }
    if (lx.size() >= 2) out.gamma_hat = fit_line(lx, ly).slope;
    return out;
}

struct HittingResult {
    std::vector<double> fractions;
    std::vector<double> probability;
    std::vector<double> std_errors;
    json to_json() const {
        return json{{"xi_ladder", fractions}, {"probability", probability},
                    {"std_error", std_errors}};
    }
};

/// P(hit Gamma before s + theta_s tau_R(y)), starting at seeded points of
/// B-bar_{kappa R}(y) at the cylinder's opening time s: the geometry in which
/// the hit probability tends to 1 as |Gamma|/|C_R| does. Coupled paths across
/// the ladder.
inline HittingResult hitting_experiment(const SimSpec& base, double R, double kappa,
                                        const Cylinder& target, const std::vector<double>& xi_ladder,
                                        std::uint64_t gamma_seed) {
    HittingResult out;
    SimSpec spec = base;
    spec.t0 = target.t0;
    spec.horizon = R * R + base.h;
    const Vec& y = target.center;
    const double shift = detail::boundary_shift_amount(spec, y);
    for (double xi : xi_ladder) {
        CellSubset gamma{target, 8, 8, xi, gamma_seed};
        std::vector<std::size_t> block_hits(kParallelBlocks, 0), block_n(kParallelBlocks, 0);
        for_paths(spec, [&](std::size_t bi, std::size_t p) {
            SimSpec local = spec;
            Vec x0(y.size());
            double r2;
            std::uint64_t draw = 0;
            do {
                r2 = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                    x0[i] =
                        (2.0 * CounterRng::uniform(spec.seed ^ 0xABCD, p / 2, 1000 + draw, i) - 1.0);
                    r2 += sq(x0[i]);
                }
                ++draw;
            } while (r2 >= 1.0);
            if (p % 2 == 1)
                for (double& v : x0) v = -v;
            for (std::size_t i = 0; i < y.size(); ++i) x0[i] = y[i] + kappa * R * x0[i];
            local.x0 = x0;
            PathWalker w(local, p);
            bool hit = false;
            while (!w.diverged) {
                const double t_abs = local.t0 + w.elapsed();
                if (gamma.contains(t_abs, w.x)) {
                    hit = true;
                    break;
                }
                if (w.elapsed() >= R * R) break;          // theta tau_R time lid
                if (dist2(w.x, y) >= R - shift) break;    // ball exit
                if (w.at_end()) break;
                w.advance();
            }
            ++block_n[bi];
            if (hit) ++block_hits[bi];
        });
        std::size_t hits = 0, n = 0;
        for (std::size_t b = 0; b < kParallelBlocks; ++b) {
            hits += block_hits[b];
            n += block_n[b];
        }
        const double pr = n ? static_cast<double>(hits) / n : 0.0;
        out.fractions.push_back(xi);
        out.probability.push_back(pr);
        out.std_errors.push_back(n ? std::sqrt(std::max(pr * (1 - pr), 1e-12) / n) : 0.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Caloric functions: Harnack ratios and oscillation decay.
// ---------------------------------------------------------------------------

/// u(t,x) = E_{t,x} f(x_{T-t}) for Brownian motion with sigma = scale I:
/// closed forms for gaussian bumps and half-space indicators.
inline double caloric_bm(const ScalarField& f, double scale, double tau, const Vec& x) {
    const double var = scale * scale * tau;
    if (f.kind == "gaussian_bump") {
        const double amp = f.params.count("amp") ? f.params.at("amp") : 1.0;
        const double w2 = sq(f.params.count("width") ? f.params.at("width") : 1.0);
        const Vec c = f.vec_params.count("center") ? f.vec_params.at("center") : Vec(x.size(), 0.0);
        const int d = static_cast<int>(x.size());
        return amp * std::pow(w2 / (w2 + var), 0.5 * d) *
               std::exp(-0.5 * sq(dist2(x, c)) / (w2 + var));
    }
    if (f.kind == "half_space") {
        const double c = f.params.count("c") ? f.params.at("c") : 0.0;
        if (var == 0.0) return x[0] >= c ? 1.0 : 0.0;
        return 0.5 * std::erfc(-(x[0] - c) / std::sqrt(2.0 * var));
    }
    if (f.kind == "one" || f.kind == "constant")
        return f.params.count("c") ? f.params.at("c") : 1.0;
    throw ConfigError("f.kind", "no closed-form caloric value for '" + f.kind + "'");
}

/// u(t,x) = E_{t,x} f(x_{T-t}) by MC for a general spec.
inline EstimateReport caloric_mc(const SimSpec& base, const ScalarField& f, double T, double t,
                                 const Vec& x, std::uint64_t anchor_salt) {
    SimSpec spec = base;
    spec.t0 = t;
    spec.x0 = x;
    spec.horizon = T - t;
    spec.seed = CounterRng::key(base.seed, anchor_salt, 0, 0);
    struct Block {
        double sum = 0, sumsq = 0;
        std::size_t n = 0;
    };
    std::vector<Block> blocks(kParallelBlocks);
    for_paths(spec, [&](std::size_t bi, std::size_t p) {
        PathWalker w(spec, p);
        while (!w.at_end() && !w.diverged) w.advance();
        if (w.diverged) return;
        double v = 0.0;
        try {
            v = f.eval(T, w.x);
        } catch (const SingularityError&) {
            v = 0.0;
        }
        Block& b = blocks[bi];
        b.sum += v;
        b.sumsq += v * v;
        ++b.n;
    });
    EstimateReport rep;
    double sum = 0, sumsq = 0;
    for (const auto& b : blocks) {
        sum += b.sum;
        sumsq += b.sumsq;
        rep.n_samples += b.n;
    }
    if (rep.n_samples) {
        rep.value = sum / static_cast<double>(rep.n_samples);
        rep.std_error = std::sqrt(
            std::max(0.0, sumsq / static_cast<double>(rep.n_samples) - sq(rep.value)) /
            static_cast<double>(rep.n_samples));
    }
    return rep;
}

struct HarnackResult {
    double n_hat = 0.0;   // sup over basis and |x| <= R/2 of u(R^2,0)/u(0,x)
    std::size_t excluded = 0;
    std::vector<json> rows;
    json to_json() const {
        return json{{"N_hat", n_hat}, {"excluded", excluded}, {"rows", rows}};
    }
};

/// Harnack ratio for caloric u in [0, 2R^2) x B_R: u(R^2, 0) / u(0, x) over
/// |x| <= R/2 and a basis of shifted bumps. Brownian case is quadrature-only.
inline HarnackResult harnack_ratio_bm(double scale, double R, int basis_n, double bump_width,
                                      int x_grid, const Vec& shift_all = {}) {
    HarnackResult out;
    const double T = 2.0 * R * R;
    const int d = 2;
    Vec origin(d, 0.0);
    if (!shift_all.empty())
        for (int i = 0; i < d; ++i) origin[i] = shift_all[i];
    for (int bidx = 0; bidx < basis_n; ++bidx) {
        ScalarField f;
        f.dim = d;
        f.kind = "gaussian_bump";
        f.params["amp"] = 1.0;
        f.params["width"] = bump_width;
        Vec c(d, 0.0);
        // bump centers on a small ring inside B_R
        const double ang = 2.0 * kPi * bidx / std::max(1, basis_n);
        c[0] = origin[0] + 0.4 * R * std::cos(ang);
        c[1] = origin[1] + 0.4 * R * std::sin(ang);
        f.vec_params["center"] = c;
        Vec top(d, 0.0);
        for (int i = 0; i < d; ++i) top[i] = origin[i];
        const double u_top = caloric_bm(f, scale, T - R * R, top);
        double worst = 0.0;
        for (int gx = -x_grid; gx <= x_grid; ++gx)
            for (int gy = -x_grid; gy <= x_grid; ++gy) {
                Vec x{origin[0] + 0.5 * R * gx / x_grid, origin[1] + 0.5 * R * gy / x_grid};
                if (dist2(x, origin) > 0.5 * R + 1e-12) continue;
                const double u_bot = caloric_bm(f, scale, T, x);
                if (u_bot <= 0.0) {
                    ++out.excluded;
                    continue;
                }
                worst = std::max(worst, u_top / u_bot);
            }
        out.rows.push_back(json{{"bump", bidx}, {"ratio", worst}});
        out.n_hat = std::max(out.n_hat, worst);
    }
    return out;
}

struct OscillationResult {
    std::vector<double> radii;
    std::vector<double> osc;
    double alpha_hat = 0.0;
    json to_json() const {
        return json{{"r_ladder", radii}, {"osc", osc}, {"alpha_hat", alpha_hat}};
    }
};

/// Oscillation of u = E f(x_{T-t}) over C_r anchored at (t_c, x_c), fitted as
/// osc(r) ~ r^alpha. `use_mc` switches between the Brownian closed form and
/// per-anchor MC sub-experiments.
inline OscillationResult caloric_oscillation(const SimSpec& base, const ScalarField& f, double T,
                                             double t_c, const Vec& x_c,
                                             const std::vector<double>& radii, bool use_mc,
                                             int probe = 3) {
    OscillationResult out;
    out.radii = radii;
    const double scale =
        base.sigma.kind == "identity"
            ? (base.sigma.params.count("scale") ? base.sigma.params.at("scale") : 1.0)
            : 1.0;
    std::uint64_t salt = 0;
    for (double r : radii) {
        double lo = 1e300, hi = -1e300;
        for (int it = 0; it <= probe; ++it)
            for (int ix = -probe; ix <= probe; ++ix)
                for (int iy = -probe; iy <= probe; ++iy) {
                    Vec x = x_c;
                    x[0] += r * ix / probe;
                    if (x.size() > 1) x[1] += r * iy / probe;
                    if (dist2(x, x_c) >= r) continue;
                    const double t = t_c + r * r * it / probe * (1.0 - 1e-9);
                    double u;
                    if (use_mc)
                        u = caloric_mc(base, f, T, t, x, ++salt).value;
                    else
                        u = caloric_bm(f, scale, T - t, x);
                    lo = std::min(lo, u);
                    hi = std::max(hi, u);
                }
        out.osc.push_back(std::max(0.0, hi - lo));
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < radii.size(); ++i)
        if (out.osc[i] > 0) {
            lx.push_back(std::log(radii[i]));
            ly.push_back(std::log(out.osc[i]));
        }
    if (lx.size() >= 2) out.alpha_hat = fit_line(lx, ly).slope;
    return out;
}

// ---------------------------------------------------------------------------
// Resolvent norm scan.
// ---------------------------------------------------------------------------

struct ResolventScanResult {
    std::vector<double> lambdas;
    std::vector<double> ratios;  // ||R_lambda f|| / ||f||
    double slope = 0.0;          // d log ratio / d log lambda
    json to_json() const {
        return json{{"lambda", lambdas}, {"ratio", ratios}, {"slope", slope}};
    }
};

/// Estimates R_lambda f on a spatial anchor grid by per-anchor seeded MC,
/// takes the mixed norm over a reference cylinder, and fits the decay in
/// lambda. f is spatial (time-homogeneous scan).
inline ResolventScanResult resolvent_norm_scan(const SimSpec& base, const ScalarField& f,
                                               std::vector<double> lambdas,
                                               const MixedNormSpec& norm_spec, double box_halfwidth,
                                               int n_anchor) {
    std::sort(lambdas.begin(), lambdas.end());
    ResolventScanResult out;
    out.lambdas = lambdas;
    const int d = base.dim();
    // reference region for the norm ratio; the scan is time-homogeneous so a
    // single t-row carries the anchor values
    const Cylinder region{0.0, Vec(d, 0.0), box_halfwidth * 0.9};
    GridFunction rf(d, 0.0, sq(box_halfwidth * 0.9) + 0.01, 1, -box_halfwidth, box_halfwidth,
                    n_anchor);
    GridFunction ff = rf;
    ff.sample_field(f);
    const double f_norm = mixed_norm(ff, norm_spec, region);
    for (double lam : lambdas) {
        SimSpec spec = base;
        spec.horizon = std::max(spec.horizon, 8.0 / lam);
        std::vector<double> vals(rf.n_cells_space());
        parallel_blocks(rf.n_cells_space(), [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t ix = b; ix < e; ++ix) {
                SimSpec local = spec;
                local.x0 = rf.x_center(ix);
                local.seed = CounterRng::key(spec.seed, ix, 17, 0);
                local.n_paths = spec.n_paths;
                double acc = 0.0;
                for (std::size_t p = 0; p < local.n_paths; ++p) {
                    PathWalker w(local, p);
                    double pa = 0.0;
                    while (!w.at_end() && !w.diverged) {
                        double fv = 0.0;
                        try {
                            fv = f.eval(0.0, w.x);
                        } catch (const SingularityError&) {
                        }
                        pa += std::exp(-lam * w.elapsed()) * fv * local.h;
                        w.advance();
                    }
                    acc += pa;
                }
                vals[ix] = acc / static_cast<double>(local.n_paths);
            }
        });
        for (std::size_t ix = 0; ix < vals.size(); ++ix) rf.at(0, ix) = vals[ix];
        const double rnorm = mixed_norm(rf, norm_spec, region);
        out.ratios.push_back(f_norm > 0 ? rnorm / f_norm : 0.0);
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        if (out.ratios[i] > 0) {
            lx.push_back(std::log(lambdas[i]));
            ly.push_back(std::log(out.ratios[i]));
        }
    if (lx.size() >= 2) out.slope = fit_line(lx, ly).slope;
    return out;
}

}  // namespace driftlab
