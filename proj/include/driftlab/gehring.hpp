#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"

namespace driftlab {

/// Dyadic parabolic box D_{k0,...,kd}(n) inside D0 = [0,4) x [-1,1)^d:
/// time side 4^{-n} starting at k0 4^{-n}, space sides 2^{-n}. Spatial indices
/// are stored shifted to [0, 2^{n+1}). Size of the box is 2^{-n}.
struct DyadicBox {
    int level = 0;
    std::int64_t kt = 0;             // in [0, 4^{n+1})
    std::vector<std::int64_t> kx;    // shifted, each in [0, 2^{n+1})

    double t_lo() const { return static_cast<double>(kt) * std::pow(4.0, -level); }
    double t_hi() const { return static_cast<double>(kt + 1) * std::pow(4.0, -level); }
    double x_lo(int i) const { return (static_cast<double>(kx[i]) - (1LL << level)) * std::pow(2.0, -level); }
    double size() const { return std::pow(2.0, -level); }

    /// 3-dilate fits in D0: [S, S+9T) x concentric 3Q inside [0,4) x [-1,1)^d.
    bool three_dilate_fits() const {
        if (kt + 9 > (std::int64_t(1) << (2 * (level + 1)))) return false;
        const std::int64_t hi = std::int64_t(1) << (level + 1);
        for (std::int64_t k : kx)
            if (k < 1 || k + 2 > hi) return false;
        return true;
    }

    json to_json() const { return json{{"n", level}, {"k0", kt}, {"k", kx}}; }
};

/// Cell grid of D0 at a fixed depth with the per-level conditional averages
/// g_{|n} cached (each parent is the mean of its 2^{d+2} children).
class BoxFunction {
public:
    BoxFunction(int dim, int depth) : d_(dim), depth_(depth) {
        if (dim < 1 || depth < 1 || depth > 12) throw ConfigError("box", "unsupported dimension/depth");
        levels_.resize(depth + 1);
        for (int n = 0; n <= depth; ++n) levels_[n].assign(atom_count(n), 0.0);
    }

    int dim() const { return d_; }
    int depth() const { return depth_; }

    std::size_t atom_count(int n) const {
        std::size_t c = std::size_t(1) << (2 * (n + 1));  // time atoms
        for (int i = 0; i < d_; ++i) c *= std::size_t(1) << (n + 1);
        return c;
    }

    std::size_t nt(int n) const { return std::size_t(1) << (2 * (n + 1)); }
    std::size_t nx(int n) const { return std::size_t(1) << (n + 1); }

    std::size_t flat(int n, std::int64_t kt, const std::vector<std::int64_t>& kx) const {
        std::size_t f = static_cast<std::size_t>(kt);
        for (int i = 0; i < d_; ++i) f = f * nx(n) + static_cast<std::size_t>(kx[i]);
        return f;
    }

    double& cell(std::int64_t kt, const std::vector<std::int64_t>& kx) {
        return levels_[depth_][flat(depth_, kt, kx)];
    }
    const std::vector<double>& cells() const { return levels_[depth_]; }
    std::vector<double>& cells() { return levels_[depth_]; }

    double level_avg(int n, std::int64_t kt, const std::vector<std::int64_t>& kx) const {
        return levels_[n][flat(n, kt, kx)];
    }

    double cell_volume() const {
        return std::pow(4.0, -depth_) * std::pow(std::pow(2.0, -depth_), d_);
    }

    /// Samples f at cell centers.
    void sample(const std::function<double(double, const std::vector<double>&)>& f) {
        std::vector<std::int64_t> kx(d_, 0);
        const double ts = std::pow(4.0, -depth_), xs = std::pow(2.0, -depth_);
        const std::size_t total = atom_count(depth_);
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t rest = idx;
            for (int i = d_ - 1; i >= 0; --i) {
                kx[i] = static_cast<std::int64_t>(rest % nx(depth_));
                rest /= nx(depth_);
            }
            const std::int64_t kt = static_cast<std::int64_t>(rest);
            std::vector<double> x(d_);
            for (int i = 0; i < d_; ++i) x[i] = (kx[i] - double(1LL << depth_) + 0.5) * xs;
            const double t = (kt + 0.5) * ts;
            levels_[depth_][idx] = f(t, x);
        }
        rebuild();
    }

    /// Bottom-up conditional averages; establishes g_{|n} <= 2^{d+2} g_{|n-1}.
    void rebuild() {
        for (int n = depth_ - 1; n >= 0; --n) {
            auto& up = levels_[n];
            const auto& lo = levels_[n + 1];
            std::fill(up.begin(), up.end(), 0.0);
            const std::size_t nxl = nx(n + 1);
            std::vector<std::int64_t> kx(d_, 0);
            const std::size_t total = atom_count(n + 1);
            for (std::size_t idx = 0; idx < total; ++idx) {
                std::size_t rest = idx;
                for (int i = d_ - 1; i >= 0; --i) {
                    kx[i] = static_cast<std::int64_t>(rest % nxl);
                    rest /= nxl;
                }
                const std::int64_t kt = static_cast<std::int64_t>(rest);
                std::vector<std::int64_t> pkx(d_);
                for (int i = 0; i < d_; ++i) pkx[i] = kx[i] / 2;
                up[flat(n, kt / 4, pkx)] += lo[idx];
            }
            const double inv = 1.0 / (1 << (d_ + 2));
            for (double& v : up) v *= inv;
        }
    }

private:
    int d_, depth_;
    std::vector<std::vector<double>> levels_;
};

/// gamma(t,x): least n >= 0 with 3 Gamma_n(t,x) inside D0; constant on the
/// level-n atoms where it equals n.
inline int gamma_stop(const BoxFunction& g, std::int64_t cell_kt,
                      const std::vector<std::int64_t>& cell_kx) {
    for (int n = 0; n <= g.depth(); ++n) {
        DyadicBox b;
        b.level = n;
        b.kt = cell_kt >> (2 * (g.depth() - n));
        b.kx.resize(g.dim());
        for (int i = 0; i < g.dim(); ++i) b.kx[i] = cell_kx[i] >> (g.depth() - n);
        if (b.three_dilate_fits()) return n;
    }
    return g.depth() + 1;  // does not fit at any cached level (boundary cells)
}

struct SelectionResult {
    double lambda = 0.0;
    double g_bar = 0.0;                  // max of g_{|gamma}
    std::vector<DyadicBox> stopped;      // the Gamma_i (maximal stopped boxes)
    std::vector<std::size_t> greedy;     // indices into `stopped` (the tilde boxes)
    double stopped_measure = 0.0;        // |{tau_lambda < infty}|
    double greedy_measure = 0.0;         // sum |tilde Gamma_i|
    bool cover_verified = false;         // cellwise union check of the hat boxes
    std::size_t cover_misses = 0;

    json to_json() const {
        json boxes = json::array();
        for (const auto& b : stopped) boxes.push_back(b.to_json());
        json chosen = json::array();
        for (std::size_t i : greedy) chosen.push_back(stopped[i].to_json());
        return json{{"lambda", lambda},
                    {"g_bar", g_bar},
                    {"stopped", boxes},
                    {"greedy", chosen},
                    {"stopped_measure", stopped_measure},
                    {"greedy_measure", greedy_measure},
                    {"cover_verified", cover_verified},
                    {"cover_misses", cover_misses}};
    }
};

namespace gehring_detail {

inline double box_measure(int d, int level) {
    return std::pow(4.0, -level) * std::pow(std::pow(2.0, -level), d);
}

struct Walker {
    const BoxFunction* g;
    double lambda;
    double g_bar = 0.0;
    std::vector<DyadicBox>* out;

    void visit(int n, std::int64_t kt, std::vector<std::int64_t>& kx, bool fit_seen) {
        DyadicBox b;
        b.level = n;
        b.kt = kt;
        b.kx = kx;
        const bool fits_here = b.three_dilate_fits();
        const double avg = g->level_avg(n, kt, kx);
        if (!fit_seen && fits_here) g_bar = std::max(g_bar, avg);  // first-fit atom: g_{|gamma}
        const bool now_seen = fit_seen || fits_here;
        if (now_seen && avg > lambda && out) {
            out->push_back(b);  // maximal: tau_lambda equals n on this atom
            return;
        }
        if (n == g->depth()) return;
        std::vector<std::int64_t> ckx(g->dim());
        for (int ct = 0; ct < 4; ++ct)
            for (int cx = 0; cx < (1 << g->dim()); ++cx) {
                for (int i = 0; i < g->dim(); ++i) ckx[i] = 2 * kx[i] + ((cx >> i) & 1);
                visit(n + 1, 4 * kt + ct, ckx, now_seen);
            }
    }

    void run() {
        // level 0: kt in [0, 4), kx in [0, 2) per axis
        for (std::int64_t kt = 0; kt < 4; ++kt) {
            std::vector<std::int64_t> kxv(g->dim(), 0);
            enumerate_space(kt, 0, kxv);
        }
    }

    void enumerate_space(std::int64_t kt, int axis, std::vector<std::int64_t>& kxv) {
        if (axis == g->dim()) {
            visit(0, kt, kxv, false);
            return;
        }
        for (std::int64_t k = 0; k < 2; ++k) {
            kxv[axis] = k;
            enumerate_space(kt, axis + 1, kxv);
        }
    }
};

/// Exact integer extent of a box in doubled depth-units (so that half-cells
/// used by the concentric doubles stay integral).
struct IExtent {
    std::int64_t t_lo, t_hi;  // units of 4^{-L}
    std::vector<std::int64_t> x_lo, x_hi;  // units of 2^{-L-1}
};

inline IExtent extent(const DyadicBox& b, int L) {
    IExtent e;
    const std::int64_t wt = std::int64_t(1) << (2 * (L - b.level));
    e.t_lo = b.kt * wt;
    e.t_hi = e.t_lo + wt;
    const std::int64_t wx = std::int64_t(1) << (L - b.level + 1);
    e.x_lo.resize(b.kx.size());
    e.x_hi.resize(b.kx.size());
    for (std::size_t i = 0; i < b.kx.size(); ++i) {
        e.x_lo[i] = b.kx[i] * wx;
        e.x_hi[i] = e.x_lo[i] + wx;
    }
    return e;
}

/// 2D = [S, S+4T) x concentric 2Q.
inline IExtent double_extent(const DyadicBox& b, int L) {
    IExtent e = extent(b, L);
    const std::int64_t wt = e.t_hi - e.t_lo;
    e.t_hi = e.t_lo + 4 * wt;
    for (std::size_t i = 0; i < e.x_lo.size(); ++i) {
        const std::int64_t w = e.x_hi[i] - e.x_lo[i];
        e.x_lo[i] -= w / 2;
        e.x_hi[i] += w / 2;
    }
    return e;
}

/// hat box: 5-dilate [S, S+25T) x 5Q union its reflection in the lower base,
/// i.e. [S - 25T, S + 25T) x 5Q.
inline IExtent hat_extent(const DyadicBox& b, int L) {
    IExtent e = extent(b, L);
    const std::int64_t wt = e.t_hi - e.t_lo;
    e.t_hi = e.t_lo + 25 * wt;
    e.t_lo -= 25 * wt;
    for (std::size_t i = 0; i < e.x_lo.size(); ++i) {
        const std::int64_t w = e.x_hi[i] - e.x_lo[i];
        e.x_lo[i] -= 2 * w;
        e.x_hi[i] += 3 * w;
    }
    return e;
}

inline bool disjoint(const IExtent& a, const IExtent& b) {
    if (a.t_hi <= b.t_lo || b.t_hi <= a.t_lo) return true;
    for (std::size_t i = 0; i < a.x_lo.size(); ++i)
        if (a.x_hi[i] <= b.x_lo[i] || b.x_hi[i] <= a.x_lo[i]) return true;
    return false;
}

}  // namespace gehring_detail

/// Stage one of the decomposition: the maximal boxes {Gamma_i} on which
/// tau_lambda(t,x) = inf{m >= gamma : g_{|m} > lambda} equals the box level.
/// Requires lambda > bar g = max g_{|gamma}.
inline SelectionResult tau_lambda_decompose(const BoxFunction& g, double lambda) {
    gehring_detail::Walker probe{&g, lambda, 0.0, nullptr};
    probe.run();
    SelectionResult res;
    res.lambda = lambda;
    res.g_bar = probe.g_bar;
    if (!(lambda > probe.g_bar))
        throw ConfigError("lambda", "tau_lambda requires lambda > bar g = " +
                                        std::to_string(probe.g_bar));
    gehring_detail::Walker w{&g, lambda, 0.0, &res.stopped};
    w.run();
    for (const auto& b : res.stopped)
        res.stopped_measure += gehring_detail::box_measure(g.dim(), b.level);
    return res;
}

/// Stage two: size-descending greedy subfamily with pairwise-disjoint doubles,
/// hat covers, and the cellwise cover verification at the grid depth.
inline SelectionResult greedy_select(const BoxFunction& g, SelectionResult res) {
    const int L = g.depth();
    std::vector<std::size_t> order(res.stopped.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& A = res.stopped[a];
        const auto& B = res.stopped[b];
        if (A.level != B.level) return A.level < B.level;  // larger size first
        if (A.kt != B.kt) return A.kt < B.kt;
        return A.kx < B.kx;
    });
    std::vector<gehring_detail::IExtent> kept_doubles;
    for (std::size_t i : order) {
        const auto dbl = gehring_detail::double_extent(res.stopped[i], L);
        bool ok = true;
        for (const auto& kd : kept_doubles)
            if (!gehring_detail::disjoint(dbl, kd)) {
                ok = false;
                break;
            }
        if (ok) {
            kept_doubles.push_back(dbl);
            res.greedy.push_back(i);
            res.greedy_measure += gehring_detail::box_measure(g.dim(), res.stopped[i].level);
        }
    }

    // cellwise cover check: every cell of {tau_lambda < infty} lies in some hat box
    const std::size_t nt = g.nt(L), nxa = g.nx(L);
    std::size_t total_cells = nt;
    for (int i = 0; i < g.dim(); ++i) total_cells *= nxa;
    std::vector<std::uint8_t> covered(total_cells, 0);
    auto ceil_div2 = [](std::int64_t v) { return v >= 0 ? (v + 1) / 2 : -((-v) / 2); };
    auto floor_div2 = [](std::int64_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
    auto mark = [&](const gehring_detail::IExtent& e) {
        // t units: 4^{-L}; x units: 2^{-L-1} (cell width = 2 units). A cell is
        // marked only when fully contained, matching the subset cover claim.
        const std::int64_t t0 = std::max<std::int64_t>(0, e.t_lo);
        const std::int64_t t1 = std::min<std::int64_t>(static_cast<std::int64_t>(nt), e.t_hi);
        std::vector<std::int64_t> lo(g.dim()), hi(g.dim());
        for (int i = 0; i < g.dim(); ++i) {
            lo[i] = std::max<std::int64_t>(0, ceil_div2(e.x_lo[i]));
            hi[i] = std::min<std::int64_t>(static_cast<std::int64_t>(nxa), floor_div2(e.x_hi[i]));
            if (lo[i] >= hi[i]) return;
        }
        if (t0 >= t1) return;
        std::vector<std::int64_t> idx(lo);
        for (std::int64_t kt = t0; kt < t1; ++kt) {
            idx = lo;
            while (true) {
                std::size_t f = static_cast<std::size_t>(kt);
                for (int i = 0; i < g.dim(); ++i) f = f * nxa + static_cast<std::size_t>(idx[i]);
                covered[f] = 1;
                int i = g.dim() - 1;
                while (i >= 0 && ++idx[i] >= hi[i]) idx[i] = lo[i], --i;
                if (i < 0) break;
            }
        }
    };
    for (std::size_t i : res.greedy) mark(gehring_detail::hat_extent(res.stopped[i], L));
    res.cover_misses = 0;
    for (const auto& b : res.stopped) {
        const auto e = gehring_detail::extent(b, L);
        std::vector<std::int64_t> idx(g.dim());
        std::vector<std::int64_t> lo(g.dim()), hi(g.dim());
        for (int i = 0; i < g.dim(); ++i) {
            lo[i] = e.x_lo[i] / 2;
            hi[i] = e.x_hi[i] / 2;
        }
        for (std::int64_t kt = e.t_lo; kt < e.t_hi; ++kt) {
            idx = lo;
            while (true) {
                std::size_t f = static_cast<std::size_t>(kt);
                for (int i = 0; i < g.dim(); ++i) f = f * nxa + static_cast<std::size_t>(idx[i]);
                if (!covered[f]) ++res.cover_misses;
                int i = g.dim() - 1;
                while (i >= 0 && ++idx[i] >= hi[i]) idx[i] = lo[i], --i;
                if (i < 0) break;
            }
        }
    }
    res.cover_verified = res.cover_misses == 0;
    return res;
}

/// phi(t,x) = [(4-t)^{1/2} /\ min_i (1-|x^i|)]^{d+2}: the proof's weight,
/// exposed so the inequality chain can be replayed in tests.
inline double gehring_weight(double t, const std::vector<double>& x) {
    double m = std::sqrt(std::max(0.0, 4.0 - t));
    for (double xi : x) m = std::min(m, 1.0 - std::abs(xi));
    m = std::max(0.0, m);
    return std::pow(m, static_cast<int>(x.size()) + 2);
}

// ---------------------------------------------------------------------------
// Reverse-Holder constant and the improved exponent (time-independent f
// specialization: all box averages reduce to spatial cube averages, computed
// exactly via prefix sums on the 2D0 spatial grid).
// ---------------------------------------------------------------------------

/// f(x) sampled at depth `depth` on the spatial square of 2D0 = [-2,2)^2
/// (d = 2): 2^{depth+2} cells per axis, with exact prefix-sum cube averages.
class SpatialDyadic {
public:
    SpatialDyadic(int depth, const std::function<double(const std::vector<double>&)>& f)
        : depth_(depth), n_(1 << (depth + 2)) {
        cells_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
        const double dx = 4.0 / n_;
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i) {
                const std::vector<double> x{-2.0 + (i + 0.5) * dx, -2.0 + (j + 0.5) * dx};
                cells_[static_cast<std::size_t>(j) * n_ + i] = f(x);
            }
    }

    int depth() const { return depth_; }
    int n() const { return n_; }
    double cell(int i, int j) const { return cells_[static_cast<std::size_t>(j) * n_ + i]; }

    /// Average of pow(f, e) over the index rectangle [i0,i1) x [j0,j1).
    double rect_avg_pow(int i0, int i1, int j0, int j1, double e) const {
        ensure_prefix(e);
        const auto& P = prefix_;
        const std::size_t w = static_cast<std::size_t>(n_) + 1;
        const double s = P[static_cast<std::size_t>(j1) * w + i1] -
                         P[static_cast<std::size_t>(j0) * w + i1] -
                         P[static_cast<std::size_t>(j1) * w + i0] +
                         P[static_cast<std::size_t>(j0) * w + i0];
        return s / (static_cast<double>(i1 - i0) * (j1 - j0));
    }

private:
    void ensure_prefix(double e) const {
        if (prefix_exp_ == e && !prefix_.empty()) return;
        const std::size_t w = static_cast<std::size_t>(n_) + 1;
        prefix_.assign(w * w, 0.0);
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i) {
                const double v = e == 1.0 ? cell(i, j) : std::pow(cell(i, j), e);
                prefix_[(j + 1) * w + (i + 1)] = v + prefix_[j * w + (i + 1)] +
                                                 prefix_[(j + 1) * w + i] - prefix_[j * w + i];
            }
        prefix_exp_ = e;
    }

    int depth_, n_;
    std::vector<double> cells_;
    mutable std::vector<double> prefix_;
    mutable double prefix_exp_ = 0.0;
};

struct ReverseHolderConstant {
    double A = 0.0;
    DyadicBox argmax;
    json to_json() const { return json{{"A", A}, {"argmax", argmax.to_json()}}; }
};

/// A = max over dyadic D inside D0 (levels 0..depth) of
/// (avg_D f^p)^{1/p} / avg_{2D} f, with 2D inside the sampled 2D0. For
/// time-independent f the time direction drops out exactly.
inline ReverseHolderConstant reverse_holder_constant(const SpatialDyadic& f, double p) {
    if (!(p > 1.0)) throw ConfigError("p", "exponent must be > 1");
    ReverseHolderConstant out;
    const int L = f.depth();
    for (int n = 0; n <= L; ++n) {
        const int cells_per_side = 1 << (L - n);  // cube side in depth-L cells
        const int n_cubes = 1 << (n + 1);
        for (int cj = 0; cj < n_cubes; ++cj)
            for (int ci = 0; ci < n_cubes; ++ci) {
                // cube [ci,cj] of side cells_per_side, offset: D0 spatial = middle half
                const int off = f.n() / 4;  // [-1,1) starts a quarter in
                const int i0 = off + ci * cells_per_side, i1 = i0 + cells_per_side;
                const int j0 = off + cj * cells_per_side, j1 = j0 + cells_per_side;
                const double hi = std::pow(f.rect_avg_pow(i0, i1, j0, j1, p), 1.0 / p);
                // concentric double, integral cell bounds since cells_per_side >= 1
                const int e = cells_per_side / 2;
                int di0 = i0 - e, di1 = i1 + e, dj0 = j0 - e, dj1 = j1 + e;
                if (cells_per_side == 1) {  // half-cell doubles: conservative one-cell margin
                    di0 = i0 - 1;
                    di1 = i1 + 1;
                    dj0 = j0 - 1;
                    dj1 = j1 + 1;
                }
                di0 = std::max(di0, 0);
                dj0 = std::max(dj0, 0);
                di1 = std::min(di1, f.n());
                dj1 = std::min(dj1, f.n());
                const double lo = f.rect_avg_pow(di0, di1, dj0, dj1, 1.0);
                if (lo > 0.0 && hi / lo > out.A) {
                    out.A = hi / lo;
                    out.argmax.level = n;
                    out.argmax.kx = {ci, cj};
                }
            }
    }
    return out;
}

struct ImprovedExponent {
    double theory_q = 0.0;      // p(1+alpha) from the smallness condition
    double empirical_q = 0.0;   // largest depth-stable exponent on the grid
    double n_hat = 0.0;         // achieved ratio at empirical_q
    double alpha = 0.0;
    std::size_t violations = 0; // boxes violating (3.21.5) at the given A
    json violating_box;
    json to_json() const {
        return json{{"theory_q", theory_q}, {"empirical_q", empirical_q}, {"N_hat", n_hat},
                    {"alpha", alpha},       {"violations", violations},
                    {"violating_box", violating_box}};
    }
};

/// Theory route: alpha <= 1 with N3 alpha (alpha+1-1/p)^{-1} B^{2p} <= 1/2,
/// q = p(1+alpha). Empirical route: the largest q on a bisection grid whose
/// D1 average is stable between `f` and the refined sample `f_fine`
/// (growth of the q-th root <= growth_tol), reported with the achieved
/// constant N_hat = (avg_{D1} f^q)^{1/q} / (A avg_{2D0} f).
inline ImprovedExponent improved_exponent(const SpatialDyadic& f, const SpatialDyadic& f_fine,
                                          double p, double A, double B, double N3 = 1.0,
                                          double growth_tol = 1.02, double q_grid_max = 12.0) {
    if (B < A) throw ConfigError("B", "requires B >= A");
    ImprovedExponent out;
    const double c = 1.0 / (2.0 * N3 * std::pow(B, 2.0 * p));
    out.alpha = c < 1.0 ? std::min(1.0, c * (1.0 - 1.0 / p) / (1.0 - c)) : 1.0;
    out.theory_q = p * (1.0 + out.alpha);

    // verify (3.21.5) at the given A over all sampled boxes
    const auto check = reverse_holder_constant(f, p);
    if (check.A > A * (1.0 + 1e-9)) {
        out.violations = 1;
        out.violating_box = check.argmax.to_json();
        throw ConfigError("A", "input violates the reverse Holder hypothesis at box n=" +
                                   std::to_string(check.argmax.level));
    }

    auto d1_avg_root = [](const SpatialDyadic& s, double q) {
        // D1 spatial part = [-1/2, 1/2): the middle eighth band of [-2,2)
        const int n = s.n();
        const int i0 = (3 * n) / 8, i1 = (5 * n) / 8;
        return std::pow(s.rect_avg_pow(i0, i1, i0, i1, q), 1.0 / q);
    };
    const double f_2d0 = f.rect_avg_pow(0, f.n(), 0, f.n(), 1.0);

    double q_ok = p;
    for (double q = p + 0.1; q <= q_grid_max + 1e-9; q += 0.1) {
        const double coarse = d1_avg_root(f, q);
        const double fine = d1_avg_root(f_fine, q);
        if (fine <= coarse * growth_tol)
            q_ok = q;
        else
            break;
    }
    out.empirical_q = q_ok;
    out.n_hat = d1_avg_root(f, q_ok) / (A * f_2d0);
    return out;
}

}  // namespace driftlab
