#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"
#include "driftlab/grid.hpp"

namespace driftlab {

inline constexpr double kInfExp = std::numeric_limits<double>::infinity();

/// Order of the iterated integral. `bracket` is the L_{(q,p)} convention:
/// time-outer when p > q, space-outer when q >= p.
enum class NormOrder { time_outer, space_outer, bracket };

/// Exponents and weights for every norm computation in this module.
struct MixedNormSpec {
    double q = 2.0;              // time exponent, in (1, inf]
    double p = 2.0;              // space exponent, in (1, inf]
    NormOrder order = NormOrder::bracket;
    double beta = 0.0;           // Morrey weight
    double rho_max = 1.0;        // 1 for E_{q,p,beta}, inf for the dotted variant
    bool nonnegative = false;    // reject negative samples when set

    NormOrder resolved_order() const {
        if (order != NormOrder::bracket) return order;
        return p > q ? NormOrder::time_outer : NormOrder::space_outer;
    }

    void validate(const std::string& where = "spec") const {
        if (!(q > 1.0)) throw ConfigError(where + ".q", "time exponent must be > 1 or inf");
        if (!(p > 1.0)) throw ConfigError(where + ".p", "space exponent must be > 1 or inf");
        if (beta < 0.0) throw ConfigError(where + ".beta", "Morrey weight must be >= 0");
        if (!(rho_max > 0.0)) throw ConfigError(where + ".rho_max", "radius cap must be > 0");
    }

    json to_json() const {
        json j{{"q", q == kInfExp ? json("inf") : json(q)},
               {"p", p == kInfExp ? json("inf") : json(p)},
               {"beta", beta},
               {"rho_max", rho_max == kInfExp ? json("inf") : json(rho_max)}};
        j["order"] = order == NormOrder::time_outer    ? "time_outer"
                     : order == NormOrder::space_outer ? "space_outer"
                                                       : "bracket";
        return j;
    }

    static double exp_from_json(const json& j, const std::string& where) {
        if (j.is_string()) {
            if (j.get<std::string>() == "inf") return kInfExp;
            throw ConfigError(where, "expected a number or \"inf\"");
        }
        return j.get<double>();
    }

    static MixedNormSpec from_json(const json& j, const std::string& where = "spec") {
        MixedNormSpec s;
        if (j.contains("q")) s.q = exp_from_json(j["q"], where + ".q");
        if (j.contains("p")) s.p = exp_from_json(j["p"], where + ".p");
        if (j.contains("beta")) s.beta = j["beta"].get<double>();
        if (j.contains("rho_max")) s.rho_max = exp_from_json(j["rho_max"], where + ".rho_max");
        if (j.contains("order")) {
            const auto o = j["order"].get<std::string>();
            if (o == "time_outer")
                s.order = NormOrder::time_outer;
            else if (o == "space_outer")
                s.order = NormOrder::space_outer;
            else if (o == "bracket")
                s.order = NormOrder::bracket;
            else
                throw ConfigError(where + ".order", "unknown order '" + o + "'");
        }
        s.validate(where);
        return s;
    }
};

/// nu = 1 - mu/p - 1/q; properly tight iff nu >= 0 (Definition-style check
/// with mu = d, or mu = the Fabes-Stroock exponent when so instantiated).
struct TightnessTriple {
    double mu = 0, q = 0, p = 0;
    double nu = 0;
    bool tight = false;
};

inline TightnessTriple tightness(double mu, double q, double p) {
    if (!(q >= 1.0) || !(p >= 1.0)) throw ConfigError("tightness", "exponents must be in [1, inf]");
    TightnessTriple t{mu, q, p, 0.0, false};
    const double inv_p = p == kInfExp ? 0.0 : 1.0 / p;
    const double inv_q = q == kInfExp ? 0.0 : 1.0 / q;
    t.nu = 1.0 - mu * inv_p - inv_q;
    t.tight = t.nu >= 0.0;
    return t;
}

namespace detail {

/// Cells of a grid meeting a cylinder, grouped by time row.
struct CylinderCells {
    std::vector<int> t_rows;
    std::vector<std::size_t> space_cells;  // spatial flat indices inside the ball
};

inline CylinderCells collect_cells(const GridFunction& f, const Cylinder& region) {
    CylinderCells cc;
    const double dt = f.dt();
    for (int it = 0; it < f.n_t(); ++it) {
        const double tc = f.t_lo() + (it + 0.5) * dt;
        if (tc >= region.t0 && tc < region.t1()) cc.t_rows.push_back(it);
    }
    // bounding box scan in space
    const int d = f.dim();
    const double dx = f.dx();
    std::vector<int> lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        lo[i] = std::max(0, static_cast<int>(std::floor((region.center[i] - region.rho - f.x_lo()) / dx)));
        hi[i] = std::min(f.n_x() - 1,
                         static_cast<int>(std::floor((region.center[i] + region.rho - f.x_lo()) / dx)));
        if (lo[i] > hi[i]) return cc;
    }
    std::vector<int> idx(lo);
    while (true) {
        Vec x(d);
        std::size_t flat = 0;
        for (int i = 0; i < d; ++i) {
            x[i] = f.x_lo() + (idx[i] + 0.5) * dx;
            flat = flat * f.n_x() + static_cast<std::size_t>(idx[i]);
        }
        if (dist2(x, region.center) < region.rho) cc.space_cells.push_back(flat);
        int i = d - 1;
        while (i >= 0 && ++idx[i] > hi[i]) idx[i] = lo[i], --i;
        if (i < 0) break;
    }
    return cc;
}

inline bool region_inside_grid(const GridFunction& f, const Cylinder& region) {
    if (region.t0 < f.t_lo() - 1e-12 || region.t1() > f.t_hi() + 1e-12) return false;
    for (int i = 0; i < f.dim(); ++i)
        if (region.center[i] - region.rho < f.x_lo() - 1e-12 ||
            region.center[i] + region.rho > f.x_hi() + 1e-12)
            return false;
    return true;
}

/// Midpoint-rule iterated norm over the region's cells. With `of_one` the
/// integrand is replaced by 1 on the same cell set (the normalizer).
inline double iterated_norm(const GridFunction& f, const MixedNormSpec& spec, const CylinderCells& cc,
                            bool of_one) {
    if (cc.t_rows.empty() || cc.space_cells.empty()) return 0.0;
    const double dVx = f.space_cell_volume();
    const double dt = f.dt();
    const NormOrder order = spec.resolved_order();
    auto cell = [&](int it, std::size_t ix) {
        const double v = of_one ? 1.0 : f.at(it, ix);
        if (spec.nonnegative && v < 0.0)
            throw ConfigError("grid", "negative sample under a nonnegativity flag");
        return std::abs(v);
    };
    if (order == NormOrder::time_outer) {
        double outer = 0.0, outer_max = 0.0;
        for (int it : cc.t_rows) {
            double inner = 0.0, inner_max = 0.0;
            for (std::size_t ix : cc.space_cells) {
                const double v = cell(it, ix);
                if (spec.p == kInfExp)
                    inner_max = std::max(inner_max, v);
                else
                    inner += std::pow(v, spec.p) * dVx;
            }
            const double s = spec.p == kInfExp ? inner_max : std::pow(inner, 1.0 / spec.p);
            if (spec.q == kInfExp)
                outer_max = std::max(outer_max, s);
            else
                outer += std::pow(s, spec.q) * dt;
        }
        return spec.q == kInfExp ? outer_max : std::pow(outer, 1.0 / spec.q);
    }
    double outer = 0.0, outer_max = 0.0;
    for (std::size_t ix : cc.space_cells) {
        double inner = 0.0, inner_max = 0.0;
        for (int it : cc.t_rows) {
            const double v = cell(it, ix);
            if (spec.q == kInfExp)
                inner_max = std::max(inner_max, v);
            else
                inner += std::pow(v, spec.q) * dt;
        }
        const double s = spec.q == kInfExp ? inner_max : std::pow(inner, 1.0 / spec.q);
        if (spec.p == kInfExp)
            outer_max = std::max(outer_max, s);
        else
            outer += std::pow(s, spec.p) * dVx;
    }
    return spec.p == kInfExp ? outer_max : std::pow(outer, 1.0 / spec.p);
}

}  // namespace detail

/// Mixed norm ||f||_{L_{q,p}(region)} by midpoint discretization.
inline double mixed_norm(const GridFunction& f, const MixedNormSpec& spec, const Cylinder& region) {
    spec.validate();
    if (!detail::region_inside_grid(f, region))
        throw ConfigError("region", "cylinder is not contained in the sampled grid box");
    const auto cc = detail::collect_cells(f, region);
    return detail::iterated_norm(f, spec, cc, false);
}

/// Volume-normalized norm: ||f|| / ||1|| over the same cell set.
inline double normalized_norm(const GridFunction& f, const MixedNormSpec& spec,
                              const Cylinder& region) {
    spec.validate();
    if (!detail::region_inside_grid(f, region))
        throw ConfigError("region", "cylinder is not contained in the sampled grid box");
    const auto cc = detail::collect_cells(f, region);
    const double denom = detail::iterated_norm(f, spec, cc, true);
    if (denom == 0.0) return 0.0;
    return detail::iterated_norm(f, spec, cc, false) / denom;
}

/// Result of the Morrey sup search: a certified lower bound of the true sup
/// plus the cylinder attaining it.
struct MorreyResult {
    double value = 0.0;
    Cylinder argmax;
    std::size_t cylinders_searched = 0;

    json to_json() const {
        return json{{"value", value},
                    {"argmax_cylinder",
                     {{"t", argmax.t0}, {"x", argmax.center}, {"rho", argmax.rho}}},
                    {"cylinders_searched", cylinders_searched}};
    }
};

/// Cylinder search family: radius ladder rho_max 2^{-j}, j = 0..levels, dyadic
/// anchors at 3 offsets per axis per level, then one golden-section refinement
/// pass in rho around the running argmax.
struct SearchPolicy {
    int levels = 8;
    int offsets = 3;
    bool refine = true;

    static SearchPolicy from_json(const json& j) {
        SearchPolicy s;
        s.levels = j.value("levels", 8);
        s.offsets = j.value("offsets", 3);
        s.refine = j.value("refine", true);
        if (s.levels < 0 || s.offsets < 1) throw ConfigError("search", "invalid search policy");
        return s;
    }
};

inline MorreyResult morrey_norm(const GridFunction& f, const MixedNormSpec& spec,
                                const SearchPolicy& policy = {}) {
    spec.validate();
    const int d = f.dim();
    const double t_extent = f.t_hi() - f.t_lo();
    const double x_extent = f.x_hi() - f.x_lo();
    const double rho_grid = std::min(std::sqrt(t_extent), 0.5 * x_extent);
    const double rho_top = std::min(spec.rho_max, rho_grid);
    if (!(rho_top > 0.0)) throw ConfigError("search", "empty search family");

    MorreyResult best;
    auto consider = [&](const Cylinder& c) {
        if (!detail::region_inside_grid(f, c)) return;
        ++best.cylinders_searched;
        const double v = std::pow(c.rho, spec.beta) * normalized_norm(f, spec, c);
        if (v > best.value) {
            best.value = v;
            best.argmax = c;
        }
    };

    for (int j = 0; j <= policy.levels; ++j) {
        const double rho = rho_top * std::pow(2.0, -j);
        if (rho < std::max(f.dx(), std::sqrt(f.dt()))) break;  // sub-cell cylinders carry no cells
        const double step_x = rho / policy.offsets;
        const double step_t = rho * rho / policy.offsets;
        std::vector<double> tpos;
        for (double t = f.t_lo(); t + rho * rho <= f.t_hi() + 1e-12; t += step_t) tpos.push_back(t);
        if (tpos.empty()) continue;
        std::vector<std::vector<double>> xpos(d);
        for (int i = 0; i < d; ++i)
            for (double x = f.x_lo() + rho; x <= f.x_hi() - rho + 1e-12; x += step_x)
                xpos[i].push_back(x);
        if (xpos[0].empty()) continue;
        std::vector<std::size_t> idx(d + 1, 0);
        while (true) {
            Cylinder c;
            c.t0 = tpos[idx[0]];
            c.rho = rho;
            c.center.resize(d);
            for (int i = 0; i < d; ++i) c.center[i] = xpos[i][idx[i + 1]];
            consider(c);
            int i = d;
            while (i >= 0) {
                ++idx[i];
                const std::size_t limit = i == 0 ? tpos.size() : xpos[i - 1].size();
                if (idx[i] < limit) break;
                idx[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
    }

    if (policy.refine && best.value > 0.0) {
        // golden-section pass over rho with the anchor pinned at the argmax
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double lo = 0.5 * best.argmax.rho;
        double hi = std::min(2.0 * best.argmax.rho, rho_top);
        auto eval_rho = [&](double rho) {
            Cylinder c{best.argmax.t0, best.argmax.center, rho};
            if (!detail::region_inside_grid(f, c)) return -1.0;
            ++best.cylinders_searched;
            return std::pow(rho, spec.beta) * normalized_norm(f, spec, c);
        };
        double a = hi - gr * (hi - lo), bpt = lo + gr * (hi - lo);
        double fa = eval_rho(a), fb = eval_rho(bpt);
        for (int it = 0; it < 12; ++it) {
            if (fa < fb) {
                lo = a;
                a = bpt;
                fa = fb;
                bpt = lo + gr * (hi - lo);
                fb = eval_rho(bpt);
            } else {
                hi = bpt;
                bpt = a;
                fb = fa;
                a = hi - gr * (hi - lo);
                fa = eval_rho(a);
            }
        }
        const double rho_star = 0.5 * (lo + hi);
        const double v = eval_rho(rho_star);
        if (v > best.value) {
            best.value = v;
            best.argmax.rho = rho_star;
        }
    }
    return best;
}

/// Admissibility constant: sup over r <= rho_b and cylinders of
/// r * normalized norm of |b|; equals the Morrey sup with beta = 1.
inline MorreyResult hat_b(const GridFunction& abs_b, MixedNormSpec spec, double rho_b,
                          const SearchPolicy& policy = {}) {
    spec.beta = 1.0;
    spec.rho_max = rho_b;
    spec.nonnegative = true;
    return morrey_norm(abs_b, spec, policy);
}

/// Parabolic beta-maximal function on the grid: at each cell, the sup over
/// the searched dyadic cylinder family (members containing the cell) of
/// rho^beta times the cell average.
inline GridFunction maximal_function(const GridFunction& f, double beta = 0.0, int levels = 6,
                                     int offsets = 3) {
    for (double v : f.values())
        if (v < 0.0) throw ConfigError("maximal_function", "input must be nonnegative");
    GridFunction m = f;  // M f >= f pointwise: start from f itself
    const int d = f.dim();
    const double t_extent = f.t_hi() - f.t_lo();
    const double x_extent = f.x_hi() - f.x_lo();
    const double rho_top = std::min(std::sqrt(t_extent), 0.5 * x_extent);
    for (int j = 0; j <= levels; ++j) {
        const double rho = rho_top * std::pow(2.0, -j);
        if (rho < std::max(f.dx(), std::sqrt(f.dt()))) break;
        const double step_x = rho / offsets;
        const double step_t = rho * rho / offsets;
        for (double t0 = f.t_lo(); t0 + rho * rho <= f.t_hi() + 1e-12; t0 += step_t) {
            std::vector<std::vector<double>> xpos(d);
            for (int i = 0; i < d; ++i)
                for (double x = f.x_lo() + rho; x <= f.x_hi() - rho + 1e-12; x += step_x)
                    xpos[i].push_back(x);
            if (xpos[0].empty()) continue;
            std::vector<std::size_t> idx(d, 0);
            while (true) {
                Cylinder c;
                c.t0 = t0;
                c.rho = rho;
                c.center.resize(d);
                for (int i = 0; i < d; ++i) c.center[i] = xpos[i][idx[i]];
                const auto cc = detail::collect_cells(f, c);
                if (!cc.t_rows.empty() && !cc.space_cells.empty()) {
                    double sum = 0.0;
                    for (int it : cc.t_rows)
                        for (std::size_t ix : cc.space_cells) sum += f.at(it, ix);
                    const double avg =
                        std::pow(rho, beta) * sum /
                        (static_cast<double>(cc.t_rows.size()) * cc.space_cells.size());
                    for (int it : cc.t_rows)
                        for (std::size_t ix : cc.space_cells)
                            if (avg > m.at(it, ix)) m.at(it, ix) = avg;
                }
                int i = d - 1;
                while (i >= 0 && ++idx[i] >= xpos[i].size()) idx[i] = 0, --i;
                if (i < 0) break;
            }
        }
    }
    m.set_provenance("maximal:" + f.provenance());
    return m;
}

/// Heat-potential operator P_{alpha,k} f(t,x) =
///   int int s^{-(d+2-alpha)/2} e^{-|y|^2/(k s)} f(t+s, x+y) dy ds,
/// realized as a geometric ladder in s with separable Gaussian space kernels.
inline GridFunction heat_potential(const GridFunction& f, double alpha, double k,
                                   double ladder_ratio = 1.12) {
    if (!(alpha > 0.0)) throw ConfigError("alpha", "heat potential requires alpha > 0");
    if (!(k > 0.0)) throw ConfigError("k", "heat potential requires k > 0");
    const int d = f.dim();
    const double dt = f.dt(), dx = f.dx();
    const double s_min = std::max(1e-7, dt / 1024.0);
    const double s_max = f.t_hi() - f.t_lo();
    GridFunction out(d, f.t_lo(), f.t_hi(), f.n_t(), f.x_lo(), f.x_hi(), f.n_x());

    // s in [0, s_min): exact point-mass weight
    // int_0^{s_min} s^{-(d+2-alpha)/2} (pi k s)^{d/2} ds = (pi k)^{d/2} (2/alpha) s_min^{alpha/2}
    const double point_mass = std::pow(kPi * k, 0.5 * d) * (2.0 / alpha) * std::pow(s_min, 0.5 * alpha);

    struct Slab {
        double s_mid;
        double weight;  // int over the slab of s^{-(d+2-alpha)/2} ds
    };
    std::vector<Slab> slabs;
    const double ex = 0.5 * (d + 2.0 - alpha);
    for (double s0 = s_min; s0 < s_max; s0 *= ladder_ratio) {
        const double s1 = std::min(s0 * ladder_ratio, s_max);
        double w;
        if (std::abs(ex - 1.0) < 1e-12)
            w = std::log(s1 / s0);
        else
            w = (std::pow(s1, 1.0 - ex) - std::pow(s0, 1.0 - ex)) / (1.0 - ex);
        slabs.push_back({std::sqrt(s0 * s1), w});
    }

    const std::size_t nx_all = f.n_cells_space();

    // strides for separable passes
    std::vector<std::size_t> stride(d, 1);
    for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * static_cast<std::size_t>(f.n_x());

    parallel_blocks(static_cast<std::size_t>(out.n_t()), [&](std::size_t, std::size_t rb, std::size_t re) {
        std::vector<double> slice(nx_all), tmp(nx_all);
        for (std::size_t row = rb; row < re; ++row) {
            const int it = static_cast<int>(row);
            const double t = out.t_center(it);
            for (std::size_t ix = 0; ix < nx_all; ++ix) out.at(it, ix) = point_mass * f.at(it, ix);
            for (const auto& slab : slabs) {
                const double ts = t + slab.s_mid;
                if (ts >= f.t_hi()) continue;  // f is compactly supported on the grid
                // linear interpolation between neighbouring rows of f at time ts
                const double pos = (ts - f.t_lo()) / dt - 0.5;
                const int i0 = std::clamp(static_cast<int>(std::floor(pos)), 0, f.n_t() - 1);
                const int i1 = std::min(i0 + 1, f.n_t() - 1);
                const double w1 = std::clamp(pos - i0, 0.0, 1.0);
                for (std::size_t ix = 0; ix < nx_all; ++ix)
                    slice[ix] = (1.0 - w1) * f.at(i0, ix) + w1 * f.at(i1, ix);
                // separable kernel e^{-y^2/(k s)} per axis, cell-integrated so the
                // discrete mass stays exact even when the kernel is sub-cell
                const double sigma2 = 0.5 * k * slab.s_mid;  // gaussian variance ks/2
                const int half = std::min(
                    f.n_x(), static_cast<int>(std::ceil(6.0 * std::sqrt(sigma2) / dx)) + 1);
                const double root = std::sqrt(k * slab.s_mid);
                const double mass_factor = 0.5 * std::sqrt(kPi) * root;
                std::vector<double> kern(2 * half + 1);
                for (int j = -half; j <= half; ++j)
                    kern[j + half] = mass_factor * (std::erf((j + 0.5) * dx / root) -
                                                    std::erf((j - 0.5) * dx / root));
                for (int axis = 0; axis < d; ++axis) {
                    const std::size_t st = stride[axis];
                    for (std::size_t ix = 0; ix < nx_all; ++ix) {
                        const int pos_axis =
                            static_cast<int>((ix / st) % static_cast<std::size_t>(f.n_x()));
                        double acc = 0.0;
                        const int jlo = std::max(-half, -pos_axis);
                        const int jhi = std::min(half, f.n_x() - 1 - pos_axis);
                        const long base = static_cast<long>(ix);
                        for (int j = jlo; j <= jhi; ++j)
                            acc += kern[j + half] *
                                   slice[static_cast<std::size_t>(base + j * static_cast<long>(st))];
                        tmp[ix] = acc;
                    }
                    slice.swap(tmp);
                }
                for (std::size_t ix = 0; ix < nx_all; ++ix)
                    out.at(it, ix) += slab.weight * slice[ix];
            }
        }
    });
    out.set_provenance("heat_potential(alpha=" + std::to_string(alpha) + ",k=" + std::to_string(k) +
                       "):" + f.provenance());
    return out;
}

}  // namespace driftlab
