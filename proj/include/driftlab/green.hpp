#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"
#include "driftlab/grid.hpp"
#include "driftlab/morrey.hpp"
#include "driftlab/sde.hpp"

namespace driftlab {

/// e^{-lambda t}-weighted occupation density estimate on a space-time grid,
/// with its spatial marginal g(x) = sum_t G dt.
struct GreenGrid {
    double lambda = 1.0;
    GridFunction density;             // G(t,x): cell mass / cell volume / n_paths
    GridFunction std_error;           // per-cell batch-means standard error (MC only)
    std::vector<double> marginal;     // g(x), flat spatial index
    std::size_t n_paths = 0;

    double total_mass() const {
        double acc = 0.0;
        for (double v : density.values()) acc += v;
        return acc * density.cell_volume();
    }

    double marginal_mass(const std::vector<double>& cell_weights) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < marginal.size(); ++i) acc += marginal[i] * cell_weights[i];
        return acc;
    }

    json summary_json() const {
        return json{{"lambda", lambda},
                    {"mass", total_mass()},
                    {"n_paths", n_paths},
                    {"grid",
                     {{"n_t", density.n_t()},
                      {"n_x", density.n_x()},
                      {"t_hi", density.t_hi()},
                      {"x_lo", density.x_lo()},
                      {"x_hi", density.x_hi()}}}};
    }

    void write_csv(std::ostream& os) const {
        const int d = density.dim();
        os << "t";
        for (int i = 0; i < d; ++i) os << ",x" << i + 1;
        os << ",G\n";
        char buf[64];
        for (int it = 0; it < density.n_t(); ++it)
            for (std::size_t ix = 0; ix < density.n_cells_space(); ++ix) {
                std::snprintf(buf, sizeof(buf), "%.17g", density.t_center(it));
                os << buf;
                const Vec x = density.x_center(ix);
                for (int i = 0; i < d; ++i) {
                    std::snprintf(buf, sizeof(buf), ",%.17g", x[i]);
                    os << buf;
                }
                std::snprintf(buf, sizeof(buf), ",%.17g", density.at(it, ix));
                os << buf << "\n";
            }
    }
};

/// Histogram estimate of the Green's density of (s, x_s - x_0): per-cell
/// occupation weighted by the exact per-step integral of e^{-lambda t}, so
/// the batch mass bound  total_mass <= 1/lambda  holds exactly.
inline GreenGrid green_histogram(const SimSpec& spec, double lambda, int n_t, int n_x,
                                 double x_halfwidth) {
    if (!(lambda > 0.0)) throw ConfigError("lambda", "Green weight must be positive");
    if (n_t < 1 || n_x < 1) throw ConfigError("grid", "empty grid");
    GreenGrid gg;
    gg.lambda = lambda;
    gg.n_paths = spec.n_paths;
    gg.density = GridFunction(spec.dim(), 0.0, spec.horizon, n_t, -x_halfwidth, x_halfwidth, n_x);
    gg.std_error = gg.density;

    const std::size_t ncells = gg.density.size();
    std::vector<std::vector<double>> block_mass(kParallelBlocks);
    std::vector<std::size_t> block_paths(kParallelBlocks, 0);
    for (auto& bm : block_mass) bm.assign(ncells, 0.0);

    const double wstep = (1.0 - std::exp(-lambda * spec.h)) / lambda;
    for_paths(spec, [&](std::size_t bi, std::size_t p) {
        PathWalker w(spec, p);
        auto& mass = block_mass[bi];
        Vec rel(spec.dim());
        while (!w.at_end() && !w.diverged) {
            for (int i = 0; i < spec.dim(); ++i) rel[i] = w.x[i] - spec.x0[i];
            const long ci = gg.density.cell_index(w.elapsed(), rel);
            if (ci >= 0) mass[static_cast<std::size_t>(ci)] += std::exp(-lambda * w.elapsed()) * wstep;
            w.advance();
        }
        ++block_paths[bi];
    });

    const double cv = gg.density.cell_volume();
    std::vector<double> total(ncells, 0.0);
    std::size_t n = 0;
    for (std::size_t b = 0; b < kParallelBlocks; ++b) {
        for (std::size_t c = 0; c < ncells; ++c) total[c] += block_mass[b][c];
        n += block_paths[b];
    }
    for (std::size_t c = 0; c < ncells; ++c)
        gg.density.values()[c] = total[c] / (static_cast<double>(n) * cv);
    // batch-means standard error of the per-cell density
    for (std::size_t c = 0; c < ncells; ++c) {
        double m = 0.0, s2 = 0.0;
        std::size_t nb = 0;
        for (std::size_t b = 0; b < kParallelBlocks; ++b)
            if (block_paths[b] > 0) ++nb;
        for (std::size_t b = 0; b < kParallelBlocks; ++b)
            if (block_paths[b] > 0) m += block_mass[b][c] / (block_paths[b] * cv);
        m /= nb;
        for (std::size_t b = 0; b < kParallelBlocks; ++b)
            if (block_paths[b] > 0) s2 += sq(block_mass[b][c] / (block_paths[b] * cv) - m);
        gg.std_error.values()[c] = nb > 1 ? std::sqrt(s2 / (nb * (nb - 1.0))) : 0.0;
    }
    gg.density.set_provenance("green_mc:" + spec.fingerprint());

    gg.marginal.assign(gg.density.n_cells_space(), 0.0);
    for (int it = 0; it < n_t; ++it)
        for (std::size_t ix = 0; ix < gg.density.n_cells_space(); ++ix)
            gg.marginal[ix] += gg.density.at(it, ix) * gg.density.dt();
    return gg;
}

/// Analytic Brownian oracle: cell averages of
/// e^{-lambda t} (2 pi scale^2 t)^{-d/2} exp(-|x|^2/(2 scale^2 t)).
inline GreenGrid analytic_green_bm(double lambda, double scale, int d, double horizon, int n_t,
                                   int n_x, double x_halfwidth, int sub = 3) {
    GreenGrid gg;
    gg.lambda = lambda;
    gg.density = GridFunction(d, 0.0, horizon, n_t, -x_halfwidth, x_halfwidth, n_x);
    gg.std_error = gg.density;
    const double s2 = scale * scale;
    auto kernel = [&](double t, const Vec& x) {
        if (t <= 0.0) return 0.0;
        double q = 0.0;
        for (double v : x) q += v * v;
        return std::exp(-lambda * t) * std::pow(2.0 * kPi * s2 * t, -0.5 * d) *
               std::exp(-0.5 * q / (s2 * t));
    };
    const double dt = gg.density.dt(), dx = gg.density.dx();
    parallel_blocks(static_cast<std::size_t>(n_t), [&](std::size_t, std::size_t rb, std::size_t re) {
        for (std::size_t row = rb; row < re; ++row) {
            const int it = static_cast<int>(row);
            for (std::size_t ix = 0; ix < gg.density.n_cells_space(); ++ix) {
                const Vec xc = gg.density.x_center(ix);
                double acc = 0.0;
                std::size_t cnt = 0;
                // tensor sub-sampling in (t, x) for a genuine cell average
                std::vector<int> sidx(d + 1, 0);
                while (true) {
                    double t = gg.density.t_center(it) + (sidx[0] + 0.5) * dt / sub - 0.5 * dt;
                    Vec x = xc;
                    for (int i = 0; i < d; ++i)
                        x[i] += (sidx[i + 1] + 0.5) * dx / sub - 0.5 * dx;
                    acc += kernel(t, x);
                    ++cnt;
                    int i = d;
                    while (i >= 0 && ++sidx[i] >= sub) sidx[i] = 0, --i;
                    if (i < 0) break;
                }
                gg.density.at(it, ix) = acc / static_cast<double>(cnt);
            }
        }
    });
    gg.density.set_provenance("green_analytic");
    gg.marginal.assign(gg.density.n_cells_space(), 0.0);
    for (int it = 0; it < n_t; ++it)
        for (std::size_t ix = 0; ix < gg.density.n_cells_space(); ++ix)
            gg.marginal[ix] += gg.density.at(it, ix) * dt;
    return gg;
}

// ---------------------------------------------------------------------------
// Reverse Holder scan on the density.
// ---------------------------------------------------------------------------

struct ReverseHolderRow {
    Cylinder c;
    double ratio = 0.0;
};

struct ReverseHolderResult {
    double sup_ratio = 0.0;
    std::vector<ReverseHolderRow> table;
    json to_json() const {
        json rows = json::array();
        for (const auto& r : table)
            rows.push_back({{"t", r.c.t0}, {"x", r.c.center}, {"rho", r.c.rho}, {"ratio", r.ratio}});
        return json{{"sup_ratio", sup_ratio}, {"cylinders", rows}};
    }
};

/// sup over dyadic cylinders C (with 2C = C_{2 rho}(t,x) inside the grid) of
///   (avg_C G^{p/(p-1)})^{(p-1)/p} / avg_{2C} G.
inline ReverseHolderResult reverse_holder_scan(const GridFunction& G, double p, int levels = 4,
                                               int offsets = 3, std::size_t max_cylinders = 4000) {
    if (!(p > 1.0)) throw ConfigError("p", "reverse Holder exponent must be > 1");
    const double expo = p / (p - 1.0);
    ReverseHolderResult out;
    const double t_extent = G.t_hi() - G.t_lo();
    const double x_extent = G.x_hi() - G.x_lo();
    const double rho_top = 0.5 * std::min(std::sqrt(t_extent), 0.5 * x_extent);
    const int d = G.dim();
    for (int j = 0; j < levels; ++j) {
        const double rho = rho_top * std::pow(2.0, -j);
        if (rho < 2.0 * G.dx()) break;
        const double step_x = 2.0 * rho / offsets;
        const double step_t = 4.0 * rho * rho / offsets;
        for (double t0 = G.t_lo(); t0 + 4.0 * rho * rho <= G.t_hi() + 1e-12; t0 += step_t) {
            std::vector<std::vector<double>> xpos(d);
            for (int i = 0; i < d; ++i)
                for (double x = G.x_lo() + 2.0 * rho; x <= G.x_hi() - 2.0 * rho + 1e-12;
                     x += step_x)
                    xpos[i].push_back(x);
            if (xpos[0].empty()) continue;
            std::vector<std::size_t> idx(d, 0);
            while (true) {
                Cylinder c;
                c.t0 = t0;
                c.rho = rho;
                c.center.resize(d);
                for (int i = 0; i < d; ++i) c.center[i] = xpos[i][idx[i]];
                if (out.table.size() < max_cylinders) {
                    const auto cc = detail::collect_cells(G, c);
                    const auto cc2 = detail::collect_cells(G, c.scaled(2.0));
                    if (!cc.t_rows.empty() && !cc.space_cells.empty() && !cc2.t_rows.empty()) {
                        double hi = 0.0;
                        std::size_t nhi = 0;
                        for (int it : cc.t_rows)
                            for (std::size_t ix : cc.space_cells) {
                                hi += std::pow(std::max(G.at(it, ix), 0.0), expo);
                                ++nhi;
                            }
                        double lo = 0.0;
                        std::size_t nlo = 0;
                        for (int it : cc2.t_rows)
                            for (std::size_t ix : cc2.space_cells) {
                                lo += G.at(it, ix);
                                ++nlo;
                            }
                        hi = std::pow(hi / nhi, 1.0 / expo);
                        lo /= nlo;
                        if (lo > 0.0) {
                            ReverseHolderRow row{c, hi / lo};
                            out.table.push_back(row);
                            out.sup_ratio = std::max(out.sup_ratio, row.ratio);
                        }
                    }
                }
                int i = d - 1;
                while (i >= 0 && ++idx[i] >= xpos[i].size()) idx[i] = 0, --i;
                if (i < 0) break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Doubling and A_infty on the spatial marginal. Balls are realized as
// l-infinity boxes with exact cell-overlap weights so that constant g gives
// exactly 2^d.
// ---------------------------------------------------------------------------

namespace detail {

/// Integral of the marginal over the axis box of half-width r at center c,
/// with exact per-axis cell overlap.
inline double box_mass(const GridFunction& geom, const std::vector<double>& marginal, const Vec& c,
                       double r) {
    const int d = geom.dim();
    const double dx = geom.dx();
    double acc = 0.0;
    // iterate cells in the bounding index range, weight = product of overlaps
    std::vector<int> lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        lo[i] = std::max(0, static_cast<int>(std::floor((c[i] - r - geom.x_lo()) / dx)));
        hi[i] = std::min(geom.n_x() - 1, static_cast<int>(std::floor((c[i] + r - geom.x_lo()) / dx)));
        if (lo[i] > hi[i]) return 0.0;
    }
    std::vector<int> idx(lo);
    while (true) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int i = 0; i < d; ++i) {
            const double cell_lo = geom.x_lo() + idx[i] * dx;
            const double cell_hi = cell_lo + dx;
            w *= std::max(0.0, std::min(cell_hi, c[i] + r) - std::max(cell_lo, c[i] - r));
            flat = flat * geom.n_x() + static_cast<std::size_t>(idx[i]);
        }
        acc += w * marginal[flat];
        int i = d - 1;
        while (i >= 0 && ++idx[i] > hi[i]) idx[i] = lo[i], --i;
        if (i < 0) break;
    }
    return acc;
}

}  // namespace detail

struct DoublingResult {
    double sup_ratio = 0.0;
    std::size_t balls = 0;
    json to_json() const { return json{{"sup_ratio", sup_ratio}, {"balls", balls}}; }
};

/// sup over the family of g(2B)/g(B) with 2B inside the grid.
inline DoublingResult doubling_scan(const GridFunction& geom, const std::vector<double>& marginal,
                                    int levels = 3, int offsets = 3) {
    DoublingResult out;
    const int d = geom.dim();
    const double half_extent = 0.5 * (geom.x_hi() - geom.x_lo());
    for (int j = 1; j <= levels; ++j) {
        const double r = half_extent * std::pow(2.0, -j - 1);
        if (r < geom.dx()) break;
        const double step = 2.0 * r / offsets;
        std::vector<double> centers;
        for (double c = geom.x_lo() + 2.0 * r; c <= geom.x_hi() - 2.0 * r + 1e-12; c += step)
            centers.push_back(c);
        if (centers.empty()) continue;
        std::vector<std::size_t> idx(d, 0);
        while (true) {
            Vec c(d);
            for (int i = 0; i < d; ++i) c[i] = centers[idx[i]];
            const double m1 = detail::box_mass(geom, marginal, c, r);
            const double m2 = detail::box_mass(geom, marginal, c, 2.0 * r);
            if (m1 > 0.0) {
                out.sup_ratio = std::max(out.sup_ratio, m2 / m1);
                ++out.balls;
            }
            int i = d - 1;
            while (i >= 0 && ++idx[i] >= centers.size()) idx[i] = 0, --i;
            if (i < 0) break;
        }
    }
    return out;
}

struct AInftyResult {
    double mu_hat = 0.0;
    double n_hat = 0.0;
    std::size_t violations = 0;  // at the fitted (mu_hat, N_hat); zero by construction
    std::vector<json> samples;
    json to_json() const {
        return json{{"mu_hat", mu_hat}, {"N_hat", n_hat}, {"violations", violations},
                    {"samples", samples}};
    }
};

/// Fits (mu, N) with N g(Gamma)/g(B) >= (|Gamma|/|B|)^mu over seeded sub-boxes
/// Gamma of the box B; N_hat is the achieved worst ratio at mu_hat.
inline AInftyResult a_infty_check(const GridFunction& geom, const std::vector<double>& marginal,
                                  const Vec& center, double r, int n_samples, std::uint64_t seed) {
    AInftyResult out;
    const int d = geom.dim();
    const double gB = detail::box_mass(geom, marginal, center, r);
    if (gB <= 0.0) throw ConfigError("a_infty", "base box carries no mass");
    std::vector<double> lv, lr;
    for (int s = 0; s < n_samples; ++s) {
        const double frac = 0.1 + 0.9 * CounterRng::uniform(seed, s, 0, 0);
        const double rr = r * std::pow(frac, 1.0 / d);  // sub-box with |Gamma|/|B| = frac^..
        Vec c(d);
        for (int i = 0; i < d; ++i) {
            const double u = CounterRng::uniform(seed, s, 1, i);
            c[i] = center[i] + (2.0 * u - 1.0) * (r - rr);
        }
        const double v = std::pow(rr / r, d);
        const double g = detail::box_mass(geom, marginal, c, rr) / gB;
        if (g <= 0.0) continue;
        lv.push_back(std::log(v));
        lr.push_back(std::log(g));
        out.samples.push_back(json{{"volume_fraction", v}, {"mass_fraction", g}});
    }
    if (lv.size() < 2) throw ConfigError("a_infty", "not enough usable samples");
    out.mu_hat = std::max(fit_line(lv, lr).slope, 1e-6);
    double worst = 1.0;
    for (std::size_t i = 0; i < lv.size(); ++i)
        worst = std::max(worst, std::exp(out.mu_hat * lv[i] - lr[i]));
    out.n_hat = worst;
    out.violations = 0;
    for (std::size_t i = 0; i < lv.size(); ++i)
        if (out.n_hat * std::exp(lr[i]) < std::exp(out.mu_hat * lv[i]) - 1e-12) ++out.violations;
    return out;
}

struct NegativePowerResult {
    double integral = 0.0;
    std::size_t cells_used = 0;
    std::size_t cells_starved = 0;  // estimated G == 0 inside the region
    json to_json() const {
        return json{{"integral", integral}, {"cells_used", cells_used},
                    {"cells_starved", cells_starved}};
    }
};

/// int over the region (a cylinder minus {t < eps}) of G^{-mu}; cells with no
/// MC mass are excluded and counted as a starvation diagnostic.
inline NegativePowerResult negative_power_integral(const GridFunction& G, double mu,
                                                   const Cylinder& region, double t_eps) {
    if (mu < 0.0) throw ConfigError("mu", "negative-power exponent must be >= 0");
    NegativePowerResult out;
    const auto cc = detail::collect_cells(G, region);
    const double cv = G.cell_volume();
    for (int it : cc.t_rows) {
        if (G.t_center(it) < t_eps) continue;
        for (std::size_t ix : cc.space_cells) {
            const double v = G.at(it, ix);
            if (v > 0.0) {
                out.integral += std::pow(v, -mu) * cv;
                ++out.cells_used;
            } else {
                ++out.cells_starved;
            }
        }
    }
    return out;
}

}  // namespace driftlab
