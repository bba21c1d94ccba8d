#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"
#include "driftlab/fields.hpp"

namespace driftlab {

/// Square spatial grid (d = 2) used by the semigroup calculus; values at cell
/// centers, x0 pinned to the center cell (n odd).
struct Plane {
    int n = 129;
    double cx = 0.0, cy = 0.0;  // grid center
    double half = 6.0;          // half-width
    std::vector<double> v;

    Plane() = default;
    Plane(int n_, double cx_, double cy_, double half_)
        : n(n_), cx(cx_), cy(cy_), half(half_), v(static_cast<std::size_t>(n_) * n_, 0.0) {}

    double dx() const { return 2.0 * half / n; }
    double x(int i) const { return cx - half + (i + 0.5) * dx(); }
    double y(int j) const { return cy - half + (j + 0.5) * dx(); }
    double& at(int i, int j) { return v[static_cast<std::size_t>(j) * n + i]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(j) * n + i]; }
    double max_abs() const {
        double m = 0.0;
        for (double a : v) m = std::max(m, std::abs(a));
        return m;
    }
    double sum() const {
        double s = 0.0;
        for (double a : v) s += a;
        return s;
    }
};

namespace chaos_detail {

/// Discrete 1-D Gaussian kernel of variance var on spacing dx. Midpoint
/// samples (renormalized) when sigma >= dx, cell-integrated otherwise; both
/// nonnegative with unit mass up to the 6-sigma truncation tail.
inline std::vector<double> gauss_kernel(double var, double dx, int& half_out) {
    const double sigma = std::sqrt(std::max(var, 0.0));
    if (sigma < 1e-14) {
        half_out = 0;
        return {1.0};
    }
    const int half = std::max(1, static_cast<int>(std::ceil(6.0 * sigma / dx)));
    std::vector<double> k(2 * half + 1);
    if (sigma >= dx) {
        double mass = 0.0;
        for (int j = -half; j <= half; ++j) {
            k[j + half] = std::exp(-0.5 * sq(j * dx / sigma));
            mass += k[j + half];
        }
        for (double& w : k) w /= mass;
    } else {
        auto cdf = [&](double z) { return 0.5 * std::erfc(-z / (sigma * std::sqrt(2.0))); };
        for (int j = -half; j <= half; ++j)
            k[j + half] = cdf((j + 0.5) * dx) - cdf((j - 0.5) * dx);
    }
    half_out = half;
    return k;
}

inline void convolve_axis(const Plane& in, Plane& out, const std::vector<double>& k, int half,
                          bool along_x) {
    const int n = in.n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            if (along_x) {
                const int lo = std::max(-half, -i), hi = std::min(half, n - 1 - i);
                for (int s = lo; s <= hi; ++s) acc += k[s + half] * in.at(i + s, j);
            } else {
                const int lo = std::max(-half, -j), hi = std::min(half, n - 1 - j);
                for (int s = lo; s <= hi; ++s) acc += k[s + half] * in.at(i, j + s);
            }
            out.at(i, j) = acc;
        }
}

}  // namespace chaos_detail

/// Transition semigroup T_{t,s} f(x) = E_{t,x} f(x_{s-t}) for the constant
/// diffusion a = a_scale I (zero drift): Gaussian convolution with covariance
/// a_scale (s-t) per axis, f extended by zero outside the padded grid.
class SemigroupEngine {
public:
    SemigroupEngine(double a_scale, int n, double cx, double cy, double half)
        : a_scale_(a_scale), proto_(n, cx, cy, half) {
        if (!(a_scale > 0.0)) throw ConfigError("a", "diffusion scale must be positive");
        if (n % 2 == 0) throw ConfigError("grid.n", "use an odd cell count so x0 is a center");
    }

    const Plane& proto() const { return proto_; }
    double a_scale() const { return a_scale_; }

    Plane sample(const ScalarField& f) const {
        Plane g = proto_;
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                try {
                    g.at(i, j) = f.eval(0.0, {g.x(i), g.y(j)});
                } catch (const SingularityError&) {
                    g.at(i, j) = f.eval(0.0, {g.x(i) + 0.5 * g.dx(), g.y(j) + 0.5 * g.dx()});
                }
            }
        return g;
    }

    /// T over a time gap tau >= 0.
    Plane apply_T(const Plane& f, double tau) const {
        if (tau < 0.0) throw ConfigError("apply_T", "negative time gap");
        if (tau == 0.0) return f;
        int half = 0;
        const auto k = chaos_detail::gauss_kernel(a_scale_ * tau, f.dx(), half);
        Plane tmp(f.n, f.cx, f.cy, f.half), out(f.n, f.cx, f.cy, f.half);
        chaos_detail::convolve_axis(f, tmp, k, half, true);
        chaos_detail::convolve_axis(tmp, out, k, half, false);
        return out;
    }

    /// Q^k_{t,s} f(x) = sigma^{ik}(t,x) D_i T_{t,s} f(x); centered differences
    /// on the smoothed grid, one-sided at the boundary. Requires s > t.
    Plane apply_Q(int k, const Plane& f, double t, double s, const MatrixField& sigma,
                  double gap_floor = 0.0) const {
        if (!(s > t)) throw ConfigError("apply_Q", "Q requires a strictly positive smoothing gap");
        const double gap = std::max(s - t, gap_floor);
        Plane sm = apply_T(f, gap);
        return contract_gradient(k, sm, t, sigma);
    }

    Plane contract_gradient(int k, const Plane& sm, double t, const MatrixField& sigma) const {
        Plane out(sm.n, sm.cx, sm.cy, sm.half);
        const int n = sm.n;
        const double inv2 = 1.0 / (2.0 * sm.dx()), inv1 = 1.0 / sm.dx();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double gx = i == 0       ? (sm.at(1, j) - sm.at(0, j)) * inv1
                                  : i == n - 1 ? (sm.at(n - 1, j) - sm.at(n - 2, j)) * inv1
                                               : (sm.at(i + 1, j) - sm.at(i - 1, j)) * inv2;
                const double gy = j == 0       ? (sm.at(i, 1) - sm.at(i, 0)) * inv1
                                  : j == n - 1 ? (sm.at(i, n - 1) - sm.at(i, n - 2)) * inv1
                                               : (sm.at(i, j + 1) - sm.at(i, j - 1)) * inv2;
                const auto sg = sigma.eval(t, {sm.x(i), sm.y(j)});
                out.at(i, j) = sg[0 * sigma.dim1 + k] * gx + sg[1 * sigma.dim1 + k] * gy;
            }
        return out;
    }

    /// T_{0,tau} f evaluated at a single point (kernel-weighted sum).
    double point_T(const Plane& f, double tau, double px, double py) const {
        int half = 0;
        const auto k = chaos_detail::gauss_kernel(a_scale_ * tau, f.dx(), half);
        const double dx = f.dx();
        const int i0 = static_cast<int>(std::floor((px - (f.cx - f.half)) / dx));
        const int j0 = static_cast<int>(std::floor((py - (f.cy - f.half)) / dx));
        double acc = 0.0;
        for (int sj = -half; sj <= half; ++sj) {
            const int j = j0 + sj;
            if (j < 0 || j >= f.n) continue;
            double row = 0.0;
            for (int si = -half; si <= half; ++si) {
                const int i = i0 + si;
                if (i < 0 || i >= f.n) continue;
                row += k[si + half] * f.at(i, j);
            }
            acc += k[sj + half] * row;
        }
        return acc;
    }

private:
    double a_scale_;
    Plane proto_;
};

/// Per-order chaos terms at (t0, x0):
///   S_m = int_{t0 > t1 > ... > tm > 0} sum_k [T_{0,tm} Q^{km}...Q^{k1} f(x0)]^2 dt,
///   V = T f^2(x0) - (T f(x0))^2,  remainder_m = V - sum_{j<=m} S_j.
struct ChaosTermTable {
    double t0 = 1.0;
    Vec x0;
    double V = 0.0;
    std::vector<double> S;           // S_1..S_m
    std::vector<double> remainder;   // remainder_1..remainder_m
    double gap_floor = 0.0;
    double richardson_delta = 0.0;   // extrapolation shift of S_mmax toward floor -> 0

    json to_json() const {
        return json{{"t0", t0},       {"x0", x0},
                    {"V", V},         {"S", S},
                    {"remainder", remainder}, {"gap_floor", gap_floor},
                    {"richardson_delta", richardson_delta}};
    }
};

struct ChaosConfig {
    int m_max = 3;
    int nodes = 8;               // Gauss-Legendre nodes per simplex level
    int grid_n = 129;
    double grid_pad = 6.0;       // half-width = pad * sqrt(t0) + |x0|
    double gap_floor_rel = 1e-3; // innermost Q gap floor, relative to t0
    bool richardson = true;

    void validate() const {
        if (m_max < 1 || m_max > 3) throw ConfigError("chaos.m_max", "supported orders: 1..3");
        if (nodes < 2 || nodes > 32) throw ConfigError("chaos.nodes", "node count out of range");
    }
};

namespace chaos_detail {

struct Accum {
    std::vector<double> S;
    explicit Accum(int m) : S(m, 0.0) {}
};

/// Depth-first evaluation over the nested Gauss-Legendre simplex rule with
/// identically-zero subtrees pruned.
inline void descend(const SemigroupEngine& eng, const MatrixField& sigma,
                    const std::vector<int>& cols, const Plane& g, double t_upper, int level,
                    int m_max, double weight_so_far, const std::vector<double>& nodes,
                    const std::vector<double>& weights, double px, double py, double gap_floor,
                    Accum& acc) {
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const double t = t_upper * nodes[q];
        const double w = weight_so_far * weights[q] * t_upper;
        const double gap = std::max(t_upper - t, gap_floor);
        const Plane sm = eng.apply_T(g, gap);
        for (int k : cols) {
            const Plane qk = eng.contract_gradient(k, sm, t, sigma);
            const double val = eng.point_T(qk, t, px, py);
            acc.S[level - 1] += w * val * val;
            if (level < m_max && qk.max_abs() > 1e-100)
                descend(eng, sigma, cols, qk, t, level + 1, m_max, w, nodes, weights, px, py,
                        gap_floor, acc);
        }
    }
}

inline std::vector<double> chaos_sums(const SemigroupEngine& eng, const MatrixField& sigma,
                                      const Plane& f0, double t0, double px, double py,
                                      const ChaosConfig& cfg, double gap_floor) {
    std::vector<double> nodes, weights;
    gauss_legendre_01(cfg.nodes, nodes, weights);
    const auto cols = sigma.nonzero_columns();
    // parallel over the top-level nodes; per-node accumulators combined in order
    std::vector<Accum> parts(nodes.size(), Accum(cfg.m_max));
    parallel_blocks(nodes.size(), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            const double t1 = t0 * nodes[q];
            const double w1 = weights[q] * t0;
            const double gap = std::max(t0 - t1, gap_floor);
            const Plane sm = eng.apply_T(f0, gap);
            for (int k : cols) {
                const Plane qk = eng.contract_gradient(k, sm, t1, sigma);
                const double val = eng.point_T(qk, t1, px, py);
                parts[q].S[0] += w1 * val * val;
                if (cfg.m_max > 1 && qk.max_abs() > 1e-100)
                    descend(eng, sigma, cols, qk, t1, 2, cfg.m_max, w1, nodes, weights, px, py,
                            gap_floor, parts[q]);
            }
        }
    });
    std::vector<double> S(cfg.m_max, 0.0);
    for (const auto& part : parts)
        for (int m = 0; m < cfg.m_max; ++m) S[m] += part.S[m];
    return S;
}

}  // namespace chaos_detail

/// Variance oracle V = T_{0,t0} f^2 (x0) - (T_{0,t0} f (x0))^2.
inline double variance_oracle(const SemigroupEngine& eng, const Plane& f, double t0, double px,
                              double py) {
    Plane f2 = f;
    for (double& v : f2.v) v *= v;
    const double m2 = eng.point_T(f2, t0, px, py);
    const double m1 = eng.point_T(f, t0, px, py);
    return m2 - m1 * m1;
}

inline ChaosTermTable chaos_terms(const SemigroupEngine& eng, const MatrixField& sigma,
                                  const Plane& f, double t0, double px, double py,
                                  const ChaosConfig& cfg) {
    cfg.validate();
    if (!(t0 > 0.0)) throw ConfigError("t0", "chaos horizon must be positive");
    ChaosTermTable table;
    table.t0 = t0;
    table.x0 = {px, py};
    table.gap_floor = cfg.gap_floor_rel * t0;
    table.V = variance_oracle(eng, f, t0, px, py);
    auto S = chaos_detail::chaos_sums(eng, sigma, f, t0, px, py, cfg, table.gap_floor);
    if (cfg.richardson) {
        const auto S_half = chaos_detail::chaos_sums(eng, sigma, f, t0, px, py, cfg,
                                                     0.5 * table.gap_floor);
        table.richardson_delta = S_half.back() - S.back();
        for (std::size_t m = 0; m < S.size(); ++m) S[m] = 2.0 * S_half[m] - S[m];
    }
    table.S = S;
    double cum = 0.0;
    for (double s : S) {
        cum += s;
        table.remainder.push_back(table.V - cum);
    }
    return table;
}

/// Remainder signature across starting points for a fixed sigma. The strong
/// solution criterion: the remainder ratio stays away from zero exactly where
/// strong solutions fail to exist.
struct RotationExperimentResult {
    std::vector<json> rows;  // per (x0, sigma kind): V, S, remainder ratios
    json to_json() const { return json{{"rows", rows}}; }
};

inline RotationExperimentResult rotation_experiment(const std::vector<Vec>& x0_list, double t0,
                                                    const ScalarField& f, const ChaosConfig& cfg,
                                                    const std::vector<MatrixField>& sigmas) {
    RotationExperimentResult out;
    for (const auto& sigma : sigmas) {
        for (const auto& x0 : x0_list) {
            const double half = cfg.grid_pad * std::sqrt(t0) + norm2(x0);
            SemigroupEngine eng(1.0, cfg.grid_n, x0[0], x0[1], half);
            const Plane fg = eng.sample(f);
            const auto table = chaos_terms(eng, sigma, fg, t0, x0[0], x0[1], cfg);
            std::vector<double> ratios;
            for (double r : table.remainder) ratios.push_back(table.V > 0 ? r / table.V : 0.0);
            out.rows.push_back(json{{"sigma", sigma.kind},
                                    {"x0", x0},
                                    {"V", table.V},
                                    {"S", table.S},
                                    {"remainder_ratio", ratios}});
        }
    }
    return out;
}

}  // namespace driftlab
