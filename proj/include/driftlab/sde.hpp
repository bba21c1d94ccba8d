#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"
#include "driftlab/fields.hpp"
#include "driftlab/geometry.hpp"
#include "driftlab/rng.hpp"

namespace driftlab {

/// Singular-drift handling inside the stepper. The policy is part of every
/// result fingerprint: the nonexistence examples manifest as policy-dependent
/// divergence, so results are only comparable at equal policy.
enum class DriftPolicy { none, cap_displacement, floor_radius };

/// Per-step drift quadrature. `left_point` is h * b(t_k, x_k). `step_integral`
/// integrates the drift's time profile exactly over [t_k, t_k+h] with the
/// state frozen; entries without a closed-form profile fall back to left_point.
enum class DriftQuadrature { left_point, step_integral };

inline constexpr double kBgkShift = 0.5826;  // discrete-exit boundary constant

struct SimSpec {
    MatrixField sigma;
    VectorField drift;
    double t0 = 0.0;
    Vec x0;
    double horizon = 1.0;
    double h = 1e-3;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    DriftPolicy policy = DriftPolicy::cap_displacement;
    double kappa_cap = 4.0;   // displacement cap kappa_cap * sqrt(h)
    double r_floor = 1e-3;    // |x| floor under floor_radius
    DriftQuadrature quadrature = DriftQuadrature::left_point;
    bool boundary_shift = true;  // shift exit/hitting boundaries by 0.5826 sigma_n sqrt(h)

    int dim() const { return sigma.dim; }
    long n_steps() const { return static_cast<long>(std::ceil(horizon / h - 1e-12)); }

    void validate() const {
        if (!(h > 0.0)) throw ConfigError("sim.h", "step must be positive");
        if (!(horizon >= h)) throw ConfigError("sim.horizon", "horizon must be >= h");
        if (n_paths < 1) throw ConfigError("sim.n_paths", "need at least one path");
        if (static_cast<int>(x0.size()) != dim()) throw ConfigError("sim.x0", "dimension mismatch");
        if (drift.dim != dim()) throw ConfigError("sim.drift", "dimension mismatch");
    }

    json to_json() const {
        json j{{"sigma", sigma.to_json()},
               {"drift", drift.to_json()},
               {"t0", t0},
               {"x0", x0},
               {"horizon", horizon},
               {"h", h},
               {"n_paths", n_paths},
               {"seed", seed},
               {"kappa_cap", kappa_cap},
               {"r_floor", r_floor},
               {"boundary_shift", boundary_shift}};
        j["policy"] = policy == DriftPolicy::none              ? "none"
                      : policy == DriftPolicy::cap_displacement ? "cap_displacement"
                                                                : "floor_radius";
        j["quadrature"] =
            quadrature == DriftQuadrature::left_point ? "left_point" : "step_integral";
        return j;
    }

    static SimSpec from_json(const json& j) {
        SimSpec s;
        s.sigma = MatrixField::from_json(j.at("sigma"));
        s.drift = j.contains("drift") ? VectorField::from_json(j["drift"]) : VectorField{};
        s.drift.dim = s.sigma.dim;
        if (!j.contains("drift")) s.drift.kind = "zero";
        s.t0 = j.value("t0", 0.0);
        s.x0 = j.contains("x0") ? j["x0"].get<Vec>() : Vec(s.sigma.dim, 0.0);
        s.horizon = j.value("horizon", 1.0);
        s.h = j.value("h", 1e-3);
        s.n_paths = j.value("n_paths", std::size_t{1000});
        s.seed = j.value("seed", std::uint64_t{1});
        s.kappa_cap = j.value("kappa_cap", 4.0);
        s.r_floor = j.value("r_floor", 1e-3);
        s.boundary_shift = j.value("boundary_shift", true);
        const std::string pol = j.value("policy", std::string("cap_displacement"));
        if (pol == "none")
            s.policy = DriftPolicy::none;
        else if (pol == "cap_displacement")
            s.policy = DriftPolicy::cap_displacement;
        else if (pol == "floor_radius")
            s.policy = DriftPolicy::floor_radius;
        else
            throw ConfigError("sim.policy", "unknown policy '" + pol + "'");
        const std::string qd = j.value("quadrature", std::string("left_point"));
        if (qd == "left_point")
            s.quadrature = DriftQuadrature::left_point;
        else if (qd == "step_integral")
            s.quadrature = DriftQuadrature::step_integral;
        else
            throw ConfigError("sim.quadrature", "unknown quadrature '" + qd + "'");
        s.validate();
        return s;
    }

    std::string fingerprint() const { return fingerprint_hex(to_json().dump()); }
};

/// One path of the Euler scheme, generated lazily from (seed, path, step)
/// counters. Identical state sequence regardless of worker count.
class PathWalker {
public:
    PathWalker(const SimSpec& spec, std::uint64_t path) : spec_(&spec), path_(path) {
        x = spec.x0;
        t = spec.t0;
    }

    Vec x;
    double t = 0.0;
    long step_index = 0;
    bool diverged = false;
    std::size_t cap_triggers = 0;

    bool at_end() const { return step_index >= spec_->n_steps(); }
    double elapsed() const { return static_cast<double>(step_index) * spec_->h; }

    /// One Euler step x_{k+1} = x_k + sigma sqrt(h) xi + drift displacement.
    void advance() {
        if (diverged) {
            ++step_index;
            t += spec_->h;
            return;
        }
        const SimSpec& s = *spec_;
        const int d = s.dim();
        const double h = s.h;
        const auto sig = s.sigma.eval(t, x);
        const int d1 = s.sigma.dim1;
        Vec disp = drift_displacement();
        for (int k = 0; k < d1; ++k) {
            const double xi =
                CounterRng::gaussian(s.seed, path_, static_cast<std::uint64_t>(step_index), k);
            const double w = std::sqrt(h) * xi;
            for (int i = 0; i < d; ++i) disp[i] += sig[i * d1 + k] * w;
        }
        bool ok = true;
        for (int i = 0; i < d; ++i) {
            x[i] += disp[i];
            ok = ok && std::isfinite(x[i]);
        }
        if (!ok) diverged = true;  // flagged, never silently dropped
        ++step_index;
        t += s.h;
    }

    /// The drift displacement actually applied this step (policy included).
    Vec drift_displacement() {
        const SimSpec& s = *spec_;
        const double floor = s.policy == DriftPolicy::floor_radius ? s.r_floor : 0.0;
        Vec disp = s.quadrature == DriftQuadrature::step_integral
                       ? s.drift.step_displacement(t, s.h, x, floor)
                       : [&] {
                             Vec b = s.drift.eval_floored(t, x, floor);
                             for (double& v : b) v *= s.h;
                             return b;
                         }();
        if (s.policy == DriftPolicy::cap_displacement) {
            const double cap = s.kappa_cap * std::sqrt(s.h);
            const double mag = norm2(disp);
            if (mag > cap) {
                for (double& v : disp) v *= cap / mag;
                ++cap_triggers;
            }
        }
        return disp;
    }

private:
    const SimSpec* spec_;
    std::uint64_t path_;
};

/// Runs fn(block_index, path_index) over all paths with the deterministic
/// block layout; per-block accumulators must be combined in block order.
template <class Fn>
void for_paths(const SimSpec& spec, Fn&& fn) {
    parallel_blocks(spec.n_paths, [&](std::size_t block, std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) fn(block, p);
    });
}

// ---------------------------------------------------------------------------
// Exit and hitting bookkeeping.
// ---------------------------------------------------------------------------

/// Exit/hitting domain. Balls are spatial; cylinders add the rho^2 time lid
/// (tau_rho = rho^2 /\ tau'_rho).
struct ExitDomain {
    enum class Kind { ball, cylinder, ball_complement } kind = Kind::ball;
    Vec center;
    double rho = 1.0;
    double t_anchor = 0.0;  // cylinders: [t_anchor, t_anchor + rho^2)

    static ExitDomain ball(Vec c, double r) { return {Kind::ball, std::move(c), r, 0.0}; }
    static ExitDomain cylinder(double t0, Vec c, double r) {
        return {Kind::cylinder, std::move(c), r, t0};
    }
};

struct ExitRecord {
    std::uint64_t path = 0;
    long step = -1;
    double time = 0.0;       // elapsed time at the recorded step
    Vec state;
    bool censored = false;   // no exit before the horizon
    bool capped = false;     // cylinder time lid reached first
    bool diverged = false;
};

namespace detail {

/// Discrete-exit boundary correction (Broadie-Glasserman-Kou): the detection
/// surface is shifted by 0.5826 sigma_n sqrt(h) toward the domain interior
/// (exits) or outward (hitting), with sigma_n read off a at the anchor.
inline double boundary_shift_amount(const SimSpec& spec, const Vec& anchor) {
    if (!spec.boundary_shift) return 0.0;
    const auto a = spec.sigma.eval_a(spec.t0, anchor);
    double tr = 0.0;
    for (int i = 0; i < spec.dim(); ++i) tr += a[i * spec.dim() + i];
    return kBgkShift * std::sqrt(tr / spec.dim()) * std::sqrt(spec.h);
}

}  // namespace detail

/// First step index at which the state leaves the domain. Grid-time detection
/// only; overshoot is not interpolated (documented O(sqrt(h)) convention).
inline ExitRecord first_exit_path(const SimSpec& spec, std::uint64_t path, const ExitDomain& dom) {
    const double shift = detail::boundary_shift_amount(spec, dom.center);
    const double r_detect = std::max(dom.rho - shift, 0.5 * dom.rho);
    PathWalker w(spec, path);
    ExitRecord rec;
    rec.path = path;
    while (true) {
        const double elapsed = w.elapsed();
        if (dom.kind == ExitDomain::Kind::cylinder && elapsed >= dom.rho * dom.rho) {
            rec.step = w.step_index;
            rec.time = elapsed;
            rec.state = w.x;
            rec.capped = true;
            return rec;
        }
        const bool outside = dom.kind == ExitDomain::Kind::ball_complement
                                 ? dist2(w.x, dom.center) <= dom.rho + shift
                                 : dist2(w.x, dom.center) >= r_detect;
        if (outside || w.diverged) {
            rec.step = w.step_index;
            rec.time = elapsed;
            rec.state = w.x;
            rec.diverged = w.diverged;
            return rec;
        }
        if (w.at_end()) {
            rec.step = w.step_index;
            rec.time = elapsed;
            rec.state = w.x;
            rec.censored = true;
            return rec;
        }
        w.advance();
    }
}

/// First step index at which the state enters the closed set (a closed ball,
/// or the closed complement of a ball); grid-crossing granularity.
inline ExitRecord hitting_time_path(const SimSpec& spec, std::uint64_t path, const ExitDomain& dom) {
    const double shift = detail::boundary_shift_amount(spec, dom.center);
    PathWalker w(spec, path);
    ExitRecord rec;
    rec.path = path;
    while (true) {
        const bool hit = dom.kind == ExitDomain::Kind::ball_complement
                             ? dist2(w.x, dom.center) >= dom.rho - shift
                             : dist2(w.x, dom.center) <= dom.rho + shift;
        if (hit || w.diverged) {
            rec.step = w.step_index;
            rec.time = w.elapsed();
            rec.state = w.x;
            rec.diverged = w.diverged;
            return rec;
        }
        if (w.at_end()) {
            rec.step = w.step_index;
            rec.time = w.elapsed();
            rec.state = w.x;
            rec.censored = true;
            return rec;
        }
        w.advance();
    }
}

// ---------------------------------------------------------------------------
// Materialized batches (exports, replay checks, small studies).
// ---------------------------------------------------------------------------

class PathBatch {
public:
    explicit PathBatch(SimSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        const long n_states = spec_.n_steps() + 1;
        states_.assign(spec_.n_paths * static_cast<std::size_t>(n_states) * spec_.dim(), 0.0);
        diverged_.assign(spec_.n_paths, 0);
        cap_triggers_.assign(spec_.n_paths, 0);
        for_paths(spec_, [&](std::size_t, std::size_t p) {
            PathWalker w(spec_, p);
            store(p, 0, w.x);
            for (long k = 1; k < n_states; ++k) {
                w.advance();
                store(p, k, w.x);
            }
            diverged_[p] = w.diverged ? 1 : 0;
            cap_triggers_[p] = w.cap_triggers;
        });
    }

    const SimSpec& spec() const { return spec_; }
    long n_states() const { return spec_.n_steps() + 1; }

    Vec state(std::size_t path, long k) const {
        const int d = spec_.dim();
        Vec x(d);
        const std::size_t base = (path * static_cast<std::size_t>(n_states()) +
                                  static_cast<std::size_t>(k)) * d;
        for (int i = 0; i < d; ++i) x[i] = states_[base + i];
        return x;
    }

    bool diverged(std::size_t path) const { return diverged_[path] != 0; }
    std::size_t cap_triggers(std::size_t path) const { return cap_triggers_[path]; }

    std::vector<ExitRecord> first_exit(const ExitDomain& dom) const {
        std::vector<ExitRecord> recs(spec_.n_paths);
        for_paths(spec_, [&](std::size_t, std::size_t p) { recs[p] = first_exit_path(spec_, p, dom); });
        return recs;
    }

    std::vector<ExitRecord> hitting_time(const ExitDomain& dom) const {
        std::vector<ExitRecord> recs(spec_.n_paths);
        for_paths(spec_, [&](std::size_t, std::size_t p) { recs[p] = hitting_time_path(spec_, p, dom); });
        return recs;
    }

    /// CSV summary: path_id, diverged, cap_triggers, final state.
    void write_summary_csv(std::ostream& os) const {
        const int d = spec_.dim();
        os << "path_id,diverged,cap_triggers";
        for (int i = 0; i < d; ++i) os << ",x" << i + 1 << "_final";
        os << "\n";
        char buf[64];
        for (std::size_t p = 0; p < spec_.n_paths; ++p) {
            os << p << "," << int(diverged_[p]) << "," << cap_triggers_[p];
            const Vec xf = state(p, n_states() - 1);
            for (int i = 0; i < d; ++i) {
                std::snprintf(buf, sizeof(buf), ",%.17g", xf[i]);
                os << buf;
            }
            os << "\n";
        }
    }

    /// Flat binary trajectory dump. Header: magic "DLTRAJ1\0", then int64
    /// {d, n_paths, n_states}, float64 {t0, h}; body: per path, row-major
    /// n_states x d float64 states.
    void write_binary(std::ostream& os) const {
        const char magic[8] = {'D', 'L', 'T', 'R', 'A', 'J', '1', '\0'};
        os.write(magic, 8);
        const std::int64_t dims[3] = {spec_.dim(), static_cast<std::int64_t>(spec_.n_paths),
                                      n_states()};
        os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
        const double meta[2] = {spec_.t0, spec_.h};
        os.write(reinterpret_cast<const char*>(meta), sizeof(meta));
        os.write(reinterpret_cast<const char*>(states_.data()),
                 static_cast<std::streamsize>(states_.size() * sizeof(double)));
    }

private:
    void store(std::size_t path, long k, const Vec& x) {
        const int d = spec_.dim();
        const std::size_t base =
            (path * static_cast<std::size_t>(n_states()) + static_cast<std::size_t>(k)) * d;
        for (int i = 0; i < d; ++i) states_[base + i] = x[i];
    }

    SimSpec spec_;
    std::vector<double> states_;
    std::vector<std::uint8_t> diverged_;
    std::vector<std::size_t> cap_triggers_;
};

// ---------------------------------------------------------------------------
// Registered path functionals and the mesh-refinement harness.
// ---------------------------------------------------------------------------

/// Path functionals for refine_study. Values use the drift magnitude actually
/// applied by the policy (abs_drift) or left-endpoint sums skipping the t = t0
/// endpoint when the integrand is singular there.
struct PathFunctional {
    std::string kind = "abs_drift";  // abs_drift | power_st | sup_norm | occupation
    double alpha = 0.5, beta = 0.5;  // power_st: int s^-alpha |x_s|^-beta ds
    Vec center;                      // occupation ball
    double radius = 1.0;

    static PathFunctional from_json(const json& j) {
        PathFunctional f;
        f.kind = j.value("kind", std::string("abs_drift"));
        f.alpha = j.value("alpha", 0.5);
        f.beta = j.value("beta", 0.5);
        if (j.contains("center")) f.center = j["center"].get<Vec>();
        f.radius = j.value("radius", 1.0);
        return f;
    }
};

struct FunctionalResult {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_diverged = 0;
    std::size_t cap_triggers = 0;
};

inline FunctionalResult run_functional(const SimSpec& spec, const PathFunctional& fn) {
    struct Block {
        double sum = 0, sumsq = 0;
        std::size_t n = 0, diverged = 0, caps = 0;
    };
    std::vector<Block> blocks(kParallelBlocks);
    for_paths(spec, [&](std::size_t bi, std::size_t p) {
        PathWalker w(spec, p);
        double acc = 0.0;
        double sup = 0.0;
        while (!w.at_end() && !w.diverged) {
            const double s = w.elapsed();
            if (fn.kind == "abs_drift") {
                acc += norm2(w.drift_displacement());
            } else if (fn.kind == "power_st") {
                if (s > 0.0) {
                    const double r = std::max(
                        norm2(w.x), spec.policy == DriftPolicy::floor_radius ? spec.r_floor : 1e-12);
                    acc += spec.h * std::pow(s, -fn.alpha) * std::pow(r, -fn.beta);
                }
            } else if (fn.kind == "occupation") {
                Vec c = fn.center.empty() ? Vec(spec.dim(), 0.0) : fn.center;
                if (dist2(w.x, c) < fn.radius) acc += spec.h;
            } else if (fn.kind == "sup_norm") {
                sup = std::max(sup, dist2(w.x, spec.x0));
            } else {
                throw ConfigError("functional.kind", "unknown functional '" + fn.kind + "'");
            }
            w.advance();
        }
        if (fn.kind == "sup_norm") {
            sup = std::max(sup, dist2(w.x, spec.x0));
            acc = sup;
        }
        Block& b = blocks[bi];
        if (w.diverged) {
            ++b.diverged;  // excluded and counted
        } else {
            b.sum += acc;
            b.sumsq += acc * acc;
            ++b.n;
        }
        b.caps += w.cap_triggers;
    });
    double sum = 0, sumsq = 0;
    std::size_t n = 0;
    FunctionalResult out;
    for (const auto& b : blocks) {
        sum += b.sum;
        sumsq += b.sumsq;
        n += b.n;
        out.n_diverged += b.diverged;
        out.cap_triggers += b.caps;
    }
    if (n > 0) {
        out.mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sumsq / static_cast<double>(n) - sq(out.mean));
        out.std_error = std::sqrt(var / static_cast<double>(n));
    }
    return out;
}

/// One report per ladder entry, identical seeds across entries for variance
/// coupling.
struct RefineEntry {
    double h;
    FunctionalResult result;
};

inline std::vector<RefineEntry> refine_study(SimSpec spec, const PathFunctional& fn,
                                             const std::vector<double>& h_ladder) {
    if (h_ladder.empty()) throw ConfigError("h_ladder", "refinement ladder is empty");
    std::vector<RefineEntry> out;
    for (double h : h_ladder) {
        spec.h = h;
        out.push_back({h, run_functional(spec, fn)});
    }
    return out;
}

}  // namespace driftlab
