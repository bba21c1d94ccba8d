#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "driftlab/sde.hpp"

using namespace driftlab;

namespace {

SimSpec bm_spec(int d, double h, std::size_t n_paths, std::uint64_t seed, double scale = 1.0) {
    SimSpec s;
    s.sigma.kind = "identity";
    s.sigma.dim = s.sigma.dim1 = d;
    s.sigma.params["scale"] = scale;
    s.drift.kind = "zero";
    s.drift.dim = d;
    s.x0 = Vec(d, 0.0);
    s.h = h;
    s.n_paths = n_paths;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("one Euler step has mean zero and variance h per coordinate") {
    auto spec = bm_spec(2, 1e-3, 100000, 42);
    spec.horizon = spec.h;
    double sum[2] = {0, 0}, sumsq[2] = {0, 0};
    for (std::size_t p = 0; p < spec.n_paths; ++p) {
        PathWalker w(spec, p);
        w.advance();
        for (int i = 0; i < 2; ++i) {
            sum[i] += w.x[i];
            sumsq[i] += w.x[i] * w.x[i];
        }
    }
    const double n = static_cast<double>(spec.n_paths);
    for (int i = 0; i < 2; ++i) {
        const double mean = sum[i] / n;
        const double var = sumsq[i] / n - mean * mean;
        const double se_mean = std::sqrt(spec.h / n);
        const double se_var = spec.h * std::sqrt(2.0 / n);
        CHECK(std::abs(mean) <= 4.0 * se_mean);
        CHECK(std::abs(var - spec.h) <= 4.0 * se_var);
    }
}

TEST_CASE("pure drift integrates exactly") {
    SimSpec spec = bm_spec(2, 0.01, 3, 1, 0.0);  // sigma = 0
    spec.drift.kind = "constant";
    spec.drift.vec_params["v"] = {0.3, -0.7};
    spec.horizon = 1.0;
    spec.policy = DriftPolicy::none;
    PathWalker w(spec, 0);
    while (!w.at_end()) w.advance();
    CHECK(w.x[0] == Catch::Approx(0.3).margin(1e-12));
    CHECK(w.x[1] == Catch::Approx(-0.7).margin(1e-12));
}

TEST_CASE("bit-exact replay at any thread budget") {
    auto spec = bm_spec(2, 1e-2, 300, 7);
    spec.drift.kind = "smooth_bump";
    spec.drift.vec_params["v"] = {0.5, 0.0};
    spec.drift.params["width"] = 1.0;
    spec.horizon = 0.5;
    const int saved = thread_budget();
    set_thread_budget(1);
    PathBatch one(spec);
    set_thread_budget(4);
    PathBatch four(spec);
    set_thread_budget(saved);
    for (std::size_t p = 0; p < spec.n_paths; ++p)
        for (long k = 0; k <= spec.n_steps(); ++k) {
            const Vec a = one.state(p, k), b = four.state(p, k);
            REQUIRE(a[0] == b[0]);
            REQUIRE(a[1] == b[1]);
        }
}

TEST_CASE("brownian exit mean from the unit disk is rho^2/d") {
    auto spec = bm_spec(2, 1e-3, 20000, 11);
    spec.horizon = 40.0;
    const ExitDomain dom = ExitDomain::ball(Vec(2, 0.0), 1.0);
    double acc = 0.0, accsq = 0.0;
    std::size_t n = 0;
    for_paths(spec, [&](std::size_t, std::size_t) {});  // structure smoke
    std::vector<double> times(spec.n_paths);
    for_paths(spec, [&](std::size_t, std::size_t p) { times[p] = first_exit_path(spec, p, dom).time; });
    for (double t : times) {
        acc += t;
        accsq += t * t;
        ++n;
    }
    const double mean = acc / n;
    const double se = std::sqrt((accsq / n - mean * mean) / n);
    CHECK(mean == Catch::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(mean - 0.5) <= 0.01 + 3.0 * se);
}

TEST_CASE("exit records: immediate exits, deterministic crossings, censoring") {
    // start outside -> exit at step 0
    auto spec = bm_spec(2, 1e-2, 4, 3);
    spec.x0 = {2.0, 0.0};
    spec.horizon = 0.2;
    const ExitDomain dom = ExitDomain::ball(Vec(2, 0.0), 1.0);
    const auto rec = first_exit_path(spec, 0, dom);
    CHECK(rec.step == 0);
    CHECK_FALSE(rec.censored);

    // deterministic crossing of |x| = 0.5 at t = 0.5 with unit speed
    SimSpec det = bm_spec(2, 1e-2, 1, 5, 0.0);
    det.drift.kind = "constant";
    det.drift.vec_params["v"] = {1.0, 0.0};
    det.horizon = 1.0;
    det.policy = DriftPolicy::none;
    const auto cross = first_exit_path(det, 0, ExitDomain::ball(Vec(2, 0.0), 0.5));
    CHECK(std::abs(cross.time - 0.5) <= det.h + 1e-12);

    // short horizon censors almost everything
    auto shorty = bm_spec(2, 1e-4, 2000, 13);
    shorty.horizon = 0.01;  // rho^2 / 100
    std::size_t censored = 0;
    for_paths(shorty, [&](std::size_t, std::size_t p) {
        if (first_exit_path(shorty, p, dom).censored) ++censored;
    });
    CHECK(static_cast<double>(censored) / shorty.n_paths >= 0.9);
}

TEST_CASE("cylinder exits respect the time lid rho^2") {
    auto spec = bm_spec(2, 1e-3, 500, 17);
    spec.horizon = 2.0;
    const double rho = 0.6;
    const auto dom = ExitDomain::cylinder(0.0, Vec(2, 0.0), rho);
    for_paths(spec, [&](std::size_t, std::size_t p) {
        const auto rec = first_exit_path(spec, p, dom);
        REQUIRE(rec.time <= rho * rho + spec.h + 1e-12);
        if (rec.capped) REQUIRE(rec.time >= rho * rho - 1e-12);
    });
}

TEST_CASE("hitting basics and the exit identity") {
    auto spec = bm_spec(2, 1e-3, 300, 19);
    spec.horizon = 2.0;
    // start inside the target -> hit at step 0
    const auto target = ExitDomain::ball(Vec(2, 0.0), 0.5);
    CHECK(hitting_time_path(spec, 0, target).step == 0);
    // hitting the complement of the ball == exiting the ball
    const auto comp = ExitDomain{ExitDomain::Kind::ball_complement, Vec(2, 0.0), 1.0, 0.0};
    const auto ball = ExitDomain::ball(Vec(2, 0.0), 1.0);
    for (std::size_t p = 0; p < 50; ++p) {
        const auto h1 = hitting_time_path(spec, p, comp);
        const auto e1 = first_exit_path(spec, p, ball);
        CHECK(h1.step == e1.step);
    }
}

TEST_CASE("hitting a small ball before exit is h-stable") {
    // B.M. from 0 hitting closed B_{1/16}((1/4,0)) before exiting B_1
    auto prob_at = [&](double h, std::uint64_t seed) {
        auto spec = bm_spec(2, h, 8000, seed);
        spec.horizon = 6.0;
        const auto target = ExitDomain::ball({0.25, 0.0}, 1.0 / 16.0);
        const auto ball = ExitDomain::ball(Vec(2, 0.0), 1.0);
        std::size_t hits = 0;
        for_paths(spec, [&](std::size_t, std::size_t p) {
            const auto ht = hitting_time_path(spec, p, target);
            const auto ex = first_exit_path(spec, p, ball);
            if (!ht.censored && ht.step < ex.step) ++hits;
        });
        const double pr = static_cast<double>(hits) / spec.n_paths;
        return std::pair<double, double>(pr, std::sqrt(pr * (1 - pr) / spec.n_paths));
    };
    const auto [p1, se1] = prob_at(2e-3, 23);
    const auto [p2, se2] = prob_at(1e-3, 29);
    CHECK(p1 > 0.1);
    CHECK(std::abs(p1 - p2) <= 2.0 * std::sqrt(se1 * se1 + se2 * se2) + 0.01);
}

TEST_CASE("refine study: brownian supremum is ladder-stable, bounded drift is capped") {
    auto spec = bm_spec(2, 1e-2, 4000, 31);
    spec.horizon = 1.0;
    PathFunctional sup;
    sup.kind = "sup_norm";
    const auto entries = refine_study(spec, sup, {4e-3, 2e-3, 1e-3});
    for (std::size_t i = 1; i < entries.size(); ++i) {
        const double se = std::hypot(entries[i].result.std_error, entries[i - 1].result.std_error);
        CHECK(std::abs(entries[i].result.mean - entries[i - 1].result.mean) <= 3.0 * se + 0.02);
    }

    SimSpec bounded = bm_spec(2, 1e-2, 200, 37);
    bounded.drift.kind = "constant";
    bounded.drift.vec_params["v"] = {0.4, 0.3};  // |b| = 0.5
    bounded.horizon = 1.0;
    PathFunctional fn;
    fn.kind = "abs_drift";
    const auto res = run_functional(bounded, fn);
    CHECK(res.mean <= 0.5 * bounded.horizon + 1e-9);
    CHECK(res.mean == Catch::Approx(0.5 * bounded.horizon).epsilon(1e-6));
}

TEST_CASE("moment bound shape: E sup |x - x0|^4 <= N (t^2 + t^4)") {
    SimSpec spec = bm_spec(2, 1e-3, 3000, 41);
    spec.drift.kind = "remark_1_28_1";
    spec.drift.params["c"] = 0.2;
    spec.drift.params["gamma"] = 0.8;
    spec.policy = DriftPolicy::cap_displacement;
    double n_fit = 0.0;
    for (double t : {0.1, 0.5, 1.0}) {
        spec.horizon = t;
        PathFunctional fn;
        fn.kind = "sup_norm";
        const auto res = run_functional(spec, fn);
        // res.mean is E sup |x - x0|; bound the 4th moment surrogate
        SimSpec s4 = spec;
        std::vector<double> block_sum(kParallelBlocks, 0.0);
        for_paths(s4, [&](std::size_t bi, std::size_t p) {
            PathWalker w(s4, p);
            double sup = 0.0;
            while (!w.at_end() && !w.diverged) {
                w.advance();
                sup = std::max(sup, dist2(w.x, s4.x0));
            }
            block_sum[bi] += std::pow(sup, 4.0);
        });
        double m4 = 0.0;
        for (double b : block_sum) m4 += b;
        m4 /= static_cast<double>(s4.n_paths);
        n_fit = std::max(n_fit, m4 / (t * t + t * t * t * t));
        (void)res;
    }
    CHECK(std::isfinite(n_fit));
    CHECK(n_fit < 50.0);
    INFO("fitted moment-bound constant: " << n_fit);
}

TEST_CASE("diverged paths are flagged, not dropped") {
    // uncapped huge constant drift overflows the state to inf within two steps
    SimSpec spec = bm_spec(2, 1.0, 8, 43);
    spec.drift.kind = "constant";
    spec.drift.vec_params["v"] = {1.5e308, 0.0};
    spec.policy = DriftPolicy::none;
    spec.horizon = 4.0;
    PathFunctional fn;
    fn.kind = "sup_norm";
    const auto res = run_functional(spec, fn);
    CHECK(res.n_diverged == spec.n_paths);
}

TEST_CASE("csv and binary exports carry the documented layout") {
    auto spec = bm_spec(2, 0.05, 3, 47);
    spec.horizon = 0.2;
    PathBatch batch(spec);
    std::ostringstream csv;
    batch.write_summary_csv(csv);
    const std::string text = csv.str();
    CHECK(text.rfind("path_id,diverged,cap_triggers,x1_final,x2_final\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 paths

    std::ostringstream bin(std::ios::binary);
    batch.write_binary(bin);
    const std::string blob = bin.str();
    REQUIRE(blob.size() == 8 + 3 * 8 + 2 * 8 + spec.n_paths * (spec.n_steps() + 1) * 2 * 8);
    CHECK(blob.compare(0, 7, "DLTRAJ1") == 0);
    std::int64_t dims[3];
    std::memcpy(dims, blob.data() + 8, sizeof(dims));
    CHECK(dims[0] == 2);
    CHECK(dims[1] == 3);
    CHECK(dims[2] == spec.n_steps() + 1);
}

TEST_CASE("spec JSON round trip preserves the fingerprint") {
    auto spec = bm_spec(2, 1e-2, 10, 53);
    spec.drift.kind = "example_3_22_2";
    spec.drift.params["q"] = 1.5;
    spec.quadrature = DriftQuadrature::step_integral;
    const auto spec2 = SimSpec::from_json(spec.to_json());
    CHECK(spec2.fingerprint() == spec.fingerprint());
}
