#include <catch_amalgamated.hpp>

#include <cmath>

#include "driftlab/fields.hpp"
#include "driftlab/grid.hpp"
#include "driftlab/morrey.hpp"

using namespace driftlab;

namespace {

GridFunction sampled(const ScalarField& f, double t_hi, int n_t, double x_half, int n_x) {
    GridFunction g(f.dim, 0.0, t_hi, n_t, -x_half, x_half, n_x);
    g.sample_field(f);
    return g;
}

ScalarField inv_norm(int d, double a = 1.0) {
    ScalarField f;
    f.kind = "inv_norm";
    f.dim = d;
    f.params["a"] = a;
    return f;
}

}  // namespace

TEST_CASE("tightness triples") {
    CHECK(tightness(3, kInfExp, 3).nu == Catch::Approx(0.0));
    CHECK(tightness(3, kInfExp, 3).tight);
    CHECK(tightness(3, 2, 6).nu == Catch::Approx(0.0));
    CHECK(tightness(3, 2, 6).tight);
    CHECK(tightness(3, 2, 2).nu == Catch::Approx(-1.0));
    CHECK_FALSE(tightness(3, 2, 2).tight);
}

TEST_CASE("bracket order resolves by comparing p and q") {
    MixedNormSpec s;
    s.order = NormOrder::bracket;
    s.p = 4;
    s.q = 2;
    CHECK(s.resolved_order() == NormOrder::time_outer);  // p > q
    s.p = 2;
    s.q = 4;
    CHECK(s.resolved_order() == NormOrder::space_outer);  // q >= p
    s.p = 3;
    s.q = 3;
    CHECK(s.resolved_order() == NormOrder::space_outer);  // tie -> space-outer
}

TEST_CASE("normalized norm of a constant is the constant") {
    ScalarField f;
    f.kind = "constant";
    f.dim = 2;
    f.params["c"] = 2.5;
    const auto g = sampled(f, 1.0, 8, 1.1, 33);
    for (auto order : {NormOrder::time_outer, NormOrder::space_outer}) {
        MixedNormSpec s;
        s.q = 3;
        s.p = 2;
        s.order = order;
        CHECK(normalized_norm(g, s, Cylinder{0.0, {0, 0}, 1.0}) == Catch::Approx(2.5).epsilon(1e-12));
    }
}

TEST_CASE("mixed norm of |x|^{-1} on C_1 matches the 4 pi closed form") {
    // int_{B_1} |x|^{-2} dx = 4 pi in d = 3, times unit time extent
    const auto g = sampled(inv_norm(3), 1.0, 4, 1.01, 81);
    MixedNormSpec s;
    s.q = 2;
    s.p = 2;
    s.order = NormOrder::time_outer;
    const double v = mixed_norm(g, s, Cylinder{0.0, {0, 0, 0}, 1.0});
    CHECK(v == Catch::Approx(std::sqrt(4.0 * kPi)).epsilon(0.02));
}

TEST_CASE("separable product factorizes in both orders") {
    // f(t,x) = (1+t) exp(-|x|^2/2): iterated midpoint norms factor exactly
    const int d = 2, n_t = 10, n_x = 25;
    GridFunction g(d, 0.0, 1.0, n_t, -1.2, 1.2, n_x);
    g.sample([](double t, const Vec& x) {
        return (1.0 + t) * std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1]));
    });
    MixedNormSpec st;
    st.q = 3;
    st.p = 2;
    st.order = NormOrder::time_outer;
    MixedNormSpec sx = st;
    sx.order = NormOrder::space_outer;
    const Cylinder region{0.0, {0, 0}, 1.0};
    // 1-D midpoint factors
    double tq = 0.0;
    for (int it = 0; it < n_t; ++it) tq += std::pow(1.0 + g.t_center(it), 3.0) * g.dt();
    tq = std::pow(tq, 1.0 / 3.0);
    const auto cells = detail::collect_cells(g, region);
    double xp = 0.0;
    for (std::size_t ix : cells.space_cells) {
        const Vec x = g.x_center(ix);
        xp += std::pow(std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1])), 2.0) * g.space_cell_volume();
    }
    xp = std::pow(xp, 0.5);
    CHECK(mixed_norm(g, st, region) == Catch::Approx(tq * xp).epsilon(1e-10));
    CHECK(mixed_norm(g, sx, region) == Catch::Approx(tq * xp).epsilon(1e-10));
}

TEST_CASE("radial closed form: r * normalized norm = (d/(d-p))^{1/p}") {
    // d = 3, p = 2, q = inf (space norm): sqrt(3) within 1%
    const auto g = sampled(inv_norm(3), 1.0, 4, 1.01, 81);
    MixedNormSpec s;
    s.q = kInfExp;
    s.p = 2;
    s.order = NormOrder::space_outer;
    const double r = 1.0;
    const double v = normalized_norm(g, s, Cylinder{0.0, {0, 0, 0}, r});
    CHECK(r * v == Catch::Approx(std::sqrt(3.0)).epsilon(0.01));
}

TEST_CASE("off-center balls obey the pointwise bound |x|^{-1} <= 1/r") {
    const auto g = sampled(inv_norm(3), 1.0, 4, 1.6, 65);
    MixedNormSpec s;
    s.q = kInfExp;
    s.p = 2;
    s.order = NormOrder::space_outer;
    const double r = 0.4;
    const Vec x0{1.0, 0.0, 0.0};  // |x0| >= 2r
    const double v = normalized_norm(g, s, Cylinder{0.0, x0, r});
    CHECK(v <= 1.0 / r + 1e-9);
}

TEST_CASE("Morrey sup of a constant attains 1 at the radius cap") {
    ScalarField f;
    f.kind = "one";
    f.dim = 2;
    const auto g = sampled(f, 1.0, 8, 1.1, 33);
    MixedNormSpec s;
    s.q = 3;
    s.p = 2;
    s.beta = 0.5;
    s.rho_max = 1.0;
    const auto res = morrey_norm(g, s, SearchPolicy{4, 3, true});
    CHECK(res.value == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(res.argmax.rho == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Morrey sup of |x|^{-1} is sqrt(3) anchored at the singularity") {
    const auto g = sampled(inv_norm(3), 1.0, 12, 1.05, 41);
    MixedNormSpec s;
    s.q = kInfExp;
    s.p = 2;
    s.order = NormOrder::space_outer;
    s.beta = 1.0;
    s.rho_max = 1.0;
    const auto res = morrey_norm(g, s, SearchPolicy{4, 3, true});
    CHECK(res.value == Catch::Approx(std::sqrt(3.0)).epsilon(0.02));
    CHECK(norm2(res.argmax.center) < 0.2);
}

TEST_CASE("Morrey sup is monotone under search refinement") {
    const auto g = sampled(inv_norm(2), 1.0, 8, 1.1, 33);
    MixedNormSpec s;
    s.q = 4;
    s.p = 1.5;
    s.beta = 1.0;
    s.rho_max = 1.0;
    double prev = 0.0;
    for (int levels : {1, 2, 3, 4}) {
        const auto res = morrey_norm(g, s, SearchPolicy{levels, 3, false});
        CHECK(res.value >= prev - 1e-12);
        prev = res.value;
    }
}

TEST_CASE("mixed norm is positively homogeneous and monotone in |f|") {
    GridFunction g(2, 0.0, 1.0, 6, -1.1, 1.1, 21);
    g.sample([](double t, const Vec& x) { return std::sin(3 * x[0]) + t + x[1]; });
    MixedNormSpec s;
    s.q = 2.5;
    s.p = 3.5;
    const Cylinder region{0.0, {0, 0}, 1.0};
    const double base = mixed_norm(g, s, region);
    GridFunction g3 = g;
    for (double& v : g3.values()) v *= 3.0;
    CHECK(mixed_norm(g3, s, region) == Catch::Approx(3.0 * base).epsilon(1e-12));
    GridFunction gbig = g;
    for (double& v : gbig.values()) v = std::abs(v) + 0.25;
    CHECK(mixed_norm(gbig, s, region) >= base);
}

TEST_CASE("Holder monotonicity in the time exponent") {
    // normalized norm with exponent q/2 <= with exponent q on every cylinder
    const auto g = sampled(inv_norm(2), 1.0, 8, 1.1, 33);
    for (double q : {2.4, 4.0}) {
        MixedNormSpec lo, hi;
        lo.q = q / 2;
        hi.q = q;
        lo.p = hi.p = 1.8;
        lo.order = hi.order = NormOrder::time_outer;
        for (double rho : {0.3, 0.6, 1.0}) {
            const Cylinder c{0.0, {0.05, -0.05}, rho};
            CHECK(normalized_norm(g, lo, c) <= normalized_norm(g, hi, c) + 1e-12);
        }
    }
}

TEST_CASE("hat_b of a bounded drift is capped by M rho") {
    VectorField b;
    b.kind = "constant";
    b.dim = 2;
    b.vec_params["v"] = {0.6, 0.8};  // |b| = 1
    GridFunction g(2, 0.0, 1.0, 8, -1.1, 1.1, 33);
    g.sample_drift_magnitude(b);
    MixedNormSpec s;
    s.q = 3;
    s.p = 3;
    const double rho_b = 0.8;
    const auto res = hat_b(g, s, rho_b, SearchPolicy{4, 3, true});
    CHECK(res.value <= 1.0 * rho_b + 1e-9);
    CHECK(res.value == Catch::Approx(rho_b).epsilon(0.02));  // constant |b|: sup at the cap
}

TEST_CASE("example 3.22.2 admissibility blows up with the derived exponent") {
    // r * normalized norm on centered cylinders ~ r^{1 - 2/q}; q = 1.5 -> -1/3.
    // The t^{-1/q} profile is too singular for midpoint sampling, so the
    // oracle grid carries exact t-cell means of |b|.
    const double q = 1.5, q_b = 1.05, p_b = 4.0;
    GridFunction g(2, 0.0, 1.0, 4096, -0.5, 0.5, 8);
    const double dt = g.dt();
    g.sample([&](double t, const Vec& x) {
        if (std::abs(x[0]) > 1.0) return 0.0;
        const double t0 = t - 0.5 * dt, t1 = t + 0.5 * dt;
        const double e = 1.0 - 1.0 / q;
        return (std::pow(t1, e) - std::pow(std::max(t0, 0.0), e)) / (e * dt);
    });
    MixedNormSpec s;
    s.q = q_b;
    s.p = p_b;
    s.order = NormOrder::bracket;  // p_b > q_b -> time-outer
    std::vector<double> lx, ly;
    for (double rho : {0.25, 0.33, 0.41, 0.5}) {
        const double v = rho * normalized_norm(g, s, Cylinder{0.0, {0, 0}, rho});
        lx.push_back(std::log(rho));
        ly.push_back(std::log(v));
    }
    const auto fit = fit_line(lx, ly);
    CHECK(fit.slope == Catch::Approx(1.0 - 2.0 / q).margin(0.05));
    CHECK(fit.slope < 0.0);  // blows up as r -> 0
}

TEST_CASE("hat_b dilation covariance on exactly corresponding grids") {
    // hat_b(dilate(b,c), rho) = hat_b(b, c rho) with the base sampled on the
    // c-scaled box so the cylinder families correspond one-to-one.
    std::vector<VectorField> drifts;
    {
        VectorField b;
        b.kind = "example_3_22_2";
        b.dim = 2;
        b.params["q"] = 1.5;
        drifts.push_back(b);
    }
    {
        VectorField b;
        b.kind = "example_5_23_1";
        b.dim = 2;
        b.params["alpha"] = 0.7;
        drifts.push_back(b);
    }
    {
        VectorField b;
        b.kind = "smooth_bump";
        b.dim = 2;
        b.params["width"] = 0.5;
        b.vec_params["v"] = {1.0, 0.5};
        drifts.push_back(b);
    }
    {
        VectorField b;
        b.kind = "remark_1_28_1";
        b.dim = 2;
        b.params["c"] = 1.0;
        b.params["gamma"] = 0.8;
        drifts.push_back(b);
    }
    const double rho = 0.4;
    MixedNormSpec s;
    s.q = 5.0;
    s.p = 2.5;
    const SearchPolicy policy{3, 3, false};
    for (const auto& b : drifts) {
        for (double c : {0.5, 0.25}) {
            GridFunction gd(2, 0.0, 1.0, 96, -1.0, 1.0, 48);
            gd.sample_drift_magnitude(parabolic_dilate(b, c));
            GridFunction gb(2, 0.0, c * c, 96, -c, c, 48);
            gb.sample_drift_magnitude(b);
            const double lhs = hat_b(gd, s, rho, policy).value;
            const double rhs = hat_b(gb, s, c * rho, policy).value;
            INFO(b.kind << " c=" << c);
            CHECK(lhs == Catch::Approx(rhs).epsilon(0.03));
        }
    }
}

TEST_CASE("maximal function basics") {
    ScalarField f;
    f.kind = "constant";
    f.dim = 2;
    f.params["c"] = 1.7;
    const auto g = sampled(f, 1.0, 8, 1.1, 17);
    const auto m = maximal_function(g, 0.0, 4);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.values()[i] == Catch::Approx(1.7));

    GridFunction spike(2, 0.0, 1.0, 8, -1.1, 1.1, 17);
    spike.values()[spike.size() / 2] = 1.0;
    const auto ms = maximal_function(spike, 0.0, 4);
    for (std::size_t i = 0; i < ms.size(); ++i) CHECK(ms.values()[i] >= spike.values()[i]);
    // scaling M(cf) = c M(f)
    GridFunction spike2 = spike;
    for (double& v : spike2.values()) v *= 4.0;
    const auto ms2 = maximal_function(spike2, 0.0, 4);
    for (std::size_t i = 0; i < ms.size(); ++i)
        CHECK(ms2.values()[i] == Catch::Approx(4.0 * ms.values()[i]).margin(1e-12));
}

TEST_CASE("maximal function is Morrey bounded with a finite fitted constant") {
    // truncated |x|^{-1}
    GridFunction g(2, 0.0, 1.0, 8, -1.1, 1.1, 33);
    g.sample([](double, const Vec& x) { return std::min(50.0, 1.0 / std::max(norm2(x), 1e-9)); });
    const auto m = maximal_function(g, 0.0, 5);
    MixedNormSpec s;
    s.q = 4;
    s.p = 1.5;
    s.beta = 1.0;
    s.rho_max = 1.0;
    const SearchPolicy policy{3, 3, false};
    const double nf = morrey_norm(g, s, policy).value;
    const double nm = morrey_norm(m, s, policy).value;
    REQUIRE(nf > 0.0);
    const double N_fitted = nm / nf;
    CHECK(std::isfinite(N_fitted));
    CHECK(N_fitted >= 1.0 - 1e-9);  // M f >= f
    CHECK(N_fitted < 20.0);         // empirical constant, reported not asserted
    INFO("fitted maximal-function Morrey constant: " << N_fitted);
}

TEST_CASE("heat potential composition P_1 P_1 = c P_2") {
    // fit c on one bump, verify on another; analytic c = (pi k)^{d/2} B(1/2,1/2)
    const int d = 2;
    auto bump = [&](double width) {
        GridFunction g(d, 0.0, 1.0, 40, -2.0, 2.0, 64);
        g.sample([width](double t, const Vec& x) {
            const double tprof = std::exp(-0.5 * sq((t - 0.3) / 0.08));
            return tprof * std::exp(-0.5 * sq(norm2(x) / width));
        });
        return g;
    };
    const double k = 4.0;
    auto center_value = [](const GridFunction& g) {
        const long ci = g.cell_index(0.1, Vec(2, 0.0));
        REQUIRE(ci >= 0);
        return g.values()[static_cast<std::size_t>(ci)];
    };
    const auto fA = bump(0.35);
    const double cA = center_value(heat_potential(heat_potential(fA, 1.0, k), 1.0, k)) /
                      center_value(heat_potential(fA, 2.0, k));
    const auto fB = bump(0.5);
    const double cB = center_value(heat_potential(heat_potential(fB, 1.0, k), 1.0, k)) /
                      center_value(heat_potential(fB, 2.0, k));
    CHECK(cB == Catch::Approx(cA).epsilon(0.01));
    // analytic scalar: (pi k)^{d/2} Beta(alpha/2, beta/2) = 4 pi * pi
    CHECK(cA == Catch::Approx(4.0 * kPi * kPi).epsilon(0.05));
}

TEST_CASE("heat potential inverts the backward heat operator") {
    // u = c(d) P_{2,4}(dt u + lap u); c fitted once, checked against -(4pi)^{-d/2}
    const int d = 2;
    const double st = 0.1, sx = 0.3;
    GridFunction u(d, 0.0, 1.0, 96, -1.4, 1.4, 72);
    u.sample([&](double t, const Vec& x) {
        return std::exp(-0.5 * sq((t - 0.5) / st)) * std::exp(-0.5 * sq(norm2(x) / sx));
    });
    GridFunction g(d, 0.0, 1.0, 96, -1.4, 1.4, 72);
    g.sample([&](double t, const Vec& x) {
        const double r2 = sq(norm2(x));
        const double uval = std::exp(-0.5 * sq((t - 0.5) / st)) * std::exp(-0.5 * r2 / (sx * sx));
        const double ut = -(t - 0.5) / (st * st) * uval;
        const double lap = (r2 / std::pow(sx, 4) - d / (sx * sx)) * uval;
        return ut + lap;
    });
    const auto Pg = heat_potential(g, 2.0, 4.0, 1.03);
    double num = 0.0, den = 0.0, umax = 0.0;
    for (double v : u.values()) umax = std::max(umax, v);
    std::vector<std::size_t> used;
    for (int it = 12; it < u.n_t() - 12; ++it)
        for (std::size_t ix = 0; ix < u.n_cells_space(); ++ix) {
            const Vec x = u.x_center(ix);
            if (norm2(x) > 0.9) continue;
            if (u.at(it, ix) < 0.2 * umax) continue;
            num += Pg.at(it, ix) * u.at(it, ix);
            den += Pg.at(it, ix) * Pg.at(it, ix);
            used.push_back(static_cast<std::size_t>(it) * u.n_cells_space() + ix);
        }
    REQUIRE(den > 0.0);
    const double c_fit = num / den;
    CHECK(c_fit == Catch::Approx(-std::pow(4.0 * kPi, -0.5 * d)).epsilon(0.05));
    REQUIRE(used.size() > 100);
    for (std::size_t cell : used)
        CHECK(c_fit * Pg.values()[cell] == Catch::Approx(u.values()[cell]).epsilon(0.02));
}

TEST_CASE("norm report serializes with an argmax cylinder") {
    const auto g = sampled(inv_norm(2), 1.0, 8, 1.1, 33);
    MixedNormSpec s;
    s.q = 4;
    s.p = 1.5;
    s.beta = 1.0;
    const auto res = morrey_norm(g, s, SearchPolicy{3, 3, true});
    const auto j = res.to_json();
    CHECK(j.contains("value"));
    CHECK(j["argmax_cylinder"].contains("rho"));
}
