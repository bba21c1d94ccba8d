#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/chaos.hpp"
#include "driftlab/counterexamples.hpp"
#include "driftlab/estimators.hpp"
#include "driftlab/fields.hpp"
#include "driftlab/gehring.hpp"
#include "driftlab/green.hpp"
#include "driftlab/grid.hpp"
#include "driftlab/morrey.hpp"
#include "driftlab/sde.hpp"

namespace driftlab {

/// Result of one CLI experiment: exit code (0 ok, 2 diagnostic fail, 1 error),
/// the JSON report, and named CSV artifacts.
struct RunResult {
    int exit_code = 0;
    json report;
    std::vector<std::pair<std::string, std::string>> artifacts;
};

namespace run_detail {

inline GridFunction grid_from_json(const json& j, int dim) {
    const int n_t = j.value("n_t", 8);
    const int n_x = j.value("n_x", 33);
    const double t_lo = j.value("t_lo", 0.0), t_hi = j.value("t_hi", 1.0);
    const double x_lo = j.value("x_lo", -1.0), x_hi = j.value("x_hi", 1.0);
    return GridFunction(dim, t_lo, t_hi, n_t, x_lo, x_hi, n_x);
}

inline Cylinder cylinder_from_json(const json& j, int dim) {
    Cylinder c;
    c.t0 = j.value("t", 0.0);
    c.rho = j.value("rho", 1.0);
    c.center = j.contains("x") ? j["x"].get<Vec>() : Vec(dim, 0.0);
    if (static_cast<int>(c.center.size()) != dim) throw ConfigError("region.x", "dimension mismatch");
    return c;
}

inline std::string curve_csv(const std::vector<std::string>& headers,
                             const std::vector<std::vector<double>>& cols) {
    std::ostringstream os;
    for (std::size_t i = 0; i < headers.size(); ++i) os << (i ? "," : "") << headers[i];
    os << "\n";
    char buf[64];
    const std::size_t rows = cols.empty() ? 0 : cols[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", cols[c][r]);
            os << (c ? "," : "") << buf;
        }
        os << "\n";
    }
    return os.str();
}

inline json fingerprinted(const json& config, json body) {
    body["fingerprint"] = fingerprint_hex(config.dump());
    return body;
}

}  // namespace run_detail

inline RunResult run_experiment(const std::string& op, const json& cfg) {
    using namespace run_detail;
    RunResult rr;

    if (op == "tightness") {
        const auto t = tightness(cfg.value("mu", 2.0), MixedNormSpec::exp_from_json(cfg.at("q"), "q"),
                                 MixedNormSpec::exp_from_json(cfg.at("p"), "p"));
        rr.report = fingerprinted(cfg, json{{"mu", t.mu}, {"nu", t.nu}, {"tight", t.tight}});
        return rr;
    }

    if (op == "mixed-norm" || op == "normalized-norm") {
        const auto f = ScalarField::from_json(cfg.at("field"));
        auto grid = grid_from_json(cfg.value("grid", json::object()), f.dim);
        grid.sample_field(f);
        const auto spec = MixedNormSpec::from_json(cfg.value("spec", json::object()));
        const auto region = cylinder_from_json(cfg.value("region", json::object()), f.dim);
        const double v = op == "mixed-norm" ? mixed_norm(grid, spec, region)
                                            : normalized_norm(grid, spec, region);
        rr.report = fingerprinted(
            cfg, json{{"value", v}, {"spec", spec.to_json()}, {"grid_fingerprint", grid.grid_fingerprint()}});
        return rr;
    }

    if (op == "morrey-norm" || op == "hat-b") {
        MixedNormSpec spec = MixedNormSpec::from_json(cfg.value("spec", json::object()));
        const auto policy = SearchPolicy::from_json(cfg.value("search", json::object()));
        GridFunction grid = [&] {
            if (op == "hat-b") {
                const auto b = VectorField::from_json(cfg.at("drift"));
                auto g = grid_from_json(cfg.value("grid", json::object()), b.dim);
                g.sample_drift_magnitude(b);
                return g;
            }
            const auto f = ScalarField::from_json(cfg.at("field"));
            auto g = grid_from_json(cfg.value("grid", json::object()), f.dim);
            g.sample_field(f);
            return g;
        }();
        MorreyResult res;
        if (op == "hat-b")
            res = hat_b(grid, spec, cfg.value("rho_b", 1.0), policy);
        else
            res = morrey_norm(grid, spec, policy);
        json body = res.to_json();
        body["spec"] = spec.to_json();
        body["grid_fingerprint"] = grid.grid_fingerprint();
        rr.report = fingerprinted(cfg, body);
        return rr;
    }

    if (op == "maximal-function") {
        const auto f = ScalarField::from_json(cfg.at("field"));
        auto grid = grid_from_json(cfg.value("grid", json::object()), f.dim);
        grid.sample_field(f);
        const auto m = maximal_function(grid, cfg.value("beta", 0.0), cfg.value("levels", 6));
        double sup = 0.0;
        bool dominates = true;
        for (std::size_t i = 0; i < m.size(); ++i) {
            sup = std::max(sup, m.values()[i]);
            dominates = dominates && m.values()[i] >= grid.values()[i] - 1e-12;
        }
        rr.report = fingerprinted(cfg, json{{"sup", sup}, {"dominates_pointwise", dominates}});
        return rr;
    }

    if (op == "heat-potential") {
        const auto f = ScalarField::from_json(cfg.at("field"));
        auto grid = grid_from_json(cfg.value("grid", json::object()), f.dim);
        grid.sample_field(f);
        const auto out = heat_potential(grid, cfg.value("alpha", 2.0), cfg.value("k", 4.0));
        double mass = 0.0;
        for (double v : out.values()) mass += v;
        mass *= out.cell_volume();
        const long ci = out.cell_index(0.5 * (out.t_lo() + out.t_hi()), Vec(f.dim, 0.0));
        rr.report = fingerprinted(
            cfg, json{{"mass", mass}, {"center_value", ci >= 0 ? out.values()[ci] : 0.0}});
        return rr;
    }

    if (op == "simulate") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        PathBatch batch(spec);
        std::size_t diverged = 0;
        for (std::size_t p = 0; p < spec.n_paths; ++p) diverged += batch.diverged(p) ? 1 : 0;
        rr.report = fingerprinted(cfg, json{{"n_paths", spec.n_paths},
                                            {"n_steps", spec.n_steps()},
                                            {"n_diverged", diverged},
                                            {"spec_fingerprint", spec.fingerprint()}});
        if (cfg.value("summary_csv", true)) {
            std::ostringstream os;
            batch.write_summary_csv(os);
            rr.artifacts.emplace_back("paths_summary.csv", os.str());
        }
        if (cfg.value("binary", false)) {
            std::ostringstream os(std::ios::binary);
            batch.write_binary(os);
            rr.artifacts.emplace_back("trajectories.bin", os.str());
        }
        return rr;
    }

    if (op == "exit-mean" || op == "exit-tail") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const double rho = cfg.value("rho", 1.0);
        std::vector<double> ladder;
        if (cfg.contains("T_ladder")) ladder = cfg["T_ladder"].get<std::vector<double>>();
        const auto res = exit_tail(spec, rho, ladder, cfg.value("min_tail_count", std::size_t{10}));
        rr.report = fingerprinted(cfg, res.to_json());
        std::vector<double> counts(res.counts.begin(), res.counts.end());
        rr.artifacts.emplace_back(
            "exit_tail.csv", curve_csv({"T", "survival", "count"},
                                       {res.T_ladder, res.survival, counts}));
        return rr;
    }

    if (op == "laplace-exit") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto res = laplace_exit(spec, cfg.value("rho", 1.0),
                                      cfg.value("lambdas", std::vector<double>{1, 4, 16, 64}));
        rr.report = fingerprinted(cfg, res.to_json());
        rr.artifacts.emplace_back("laplace_exit.csv", curve_csv({"lambda", "value", "envelope"},
                                                                {res.lambdas, res.values, res.envelope}));
        return rr;
    }

    if (op == "refine-study") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto fn = PathFunctional::from_json(cfg.value("functional", json::object()));
        const auto ladder = cfg.at("h_ladder").get<std::vector<double>>();
        const auto entries = refine_study(spec, fn, ladder);
        json rows = json::array();
        std::vector<double> hs, means, ses;
        for (const auto& e : entries) {
            rows.push_back(json{{"h", e.h},
                                {"value", e.result.mean},
                                {"std_error", e.result.std_error},
                                {"n_diverged", e.result.n_diverged},
                                {"cap_triggers", e.result.cap_triggers}});
            hs.push_back(e.h);
            means.push_back(e.result.mean);
            ses.push_back(e.result.std_error);
        }
        rr.report = fingerprinted(cfg, json{{"ladder", rows}});
        rr.artifacts.emplace_back("refine_study.csv",
                                  curve_csv({"h", "value", "std_error"}, {hs, means, ses}));
        return rr;
    }

    if (op == "potential") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto f = ScalarField::from_json(cfg.at("field"));
        StopRule stop;
        if (cfg.contains("stop") && cfg["stop"].value("kind", "horizon") == std::string("exit")) {
            const auto& sj = cfg["stop"];
            const auto dom = sj.value("domain", std::string("cylinder"));
            Vec c = sj.contains("center") ? sj["center"].get<Vec>() : spec.x0;
            if (dom == "cylinder")
                stop = StopRule::exit(ExitDomain::cylinder(spec.t0, c, sj.value("rho", 1.0)));
            else
                stop = StopRule::exit(ExitDomain::ball(c, sj.value("rho", 1.0)));
        }
        const auto rep = potential(spec, f, cfg.value("lambda", 0.0), stop);
        rr.report = fingerprinted(cfg, rep.to_json());
        return rr;
    }

    if (op == "aleksandrov-ratio") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto res = aleksandrov_ratio(
            spec, cfg.value("rho", 1.0), MixedNormSpec::from_json(cfg.value("spec", json::object())),
            cfg.value("n_members", 20), cfg.value("family_seed", std::uint64_t{77}));
        rr.report = fingerprinted(cfg, res.to_json());
        return rr;
    }

    if (op == "moderated-drift") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        std::vector<std::pair<Vec, Vec>> anchors;
        for (const auto& a : cfg.at("anchors")) anchors.emplace_back(a.at("x").get<Vec>(), a.at("y").get<Vec>());
        const auto res = moderated_drift(spec, cfg.value("rho", 1.0), anchors, cfg.value("t", 0.0));
        rr.report = fingerprinted(cfg, res.to_json());
        return rr;
    }

    if (op == "occupation") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto target = cylinder_from_json(cfg.at("target"), spec.dim());
        const auto res = occupation_experiment(
            spec, cfg.value("R", 1.0), cfg.value("kappa", 0.5), target,
            cfg.value("q_ladder", std::vector<double>{1.0, 0.5, 0.25, 0.125}),
            cfg.value("gamma_seed", std::uint64_t{5}));
        rr.report = fingerprinted(cfg, res.to_json());
        rr.artifacts.emplace_back("occupation.csv",
                                  curve_csv({"q", "occupation", "std_error"},
                                            {res.fractions, res.occupation, res.std_errors}));
        return rr;
    }

    if (op == "hitting") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto target = cylinder_from_json(cfg.at("target"), spec.dim());
        const auto res = hitting_experiment(
            spec, cfg.value("R", 1.0), cfg.value("kappa", 0.5), target,
            cfg.value("xi_ladder", std::vector<double>{0.5, 0.9}),
            cfg.value("gamma_seed", std::uint64_t{5}));
        rr.report = fingerprinted(cfg, res.to_json());
        rr.artifacts.emplace_back("hitting.csv", curve_csv({"xi", "probability", "std_error"},
                                                           {res.fractions, res.probability,
                                                            res.std_errors}));
        return rr;
    }

    if (op == "harnack-ratio") {
        Vec shift;
        if (cfg.contains("shift")) shift = cfg["shift"].get<Vec>();
        const auto res =
            harnack_ratio_bm(cfg.value("scale", 1.0), cfg.value("R", 1.0), cfg.value("basis_n", 8),
                             cfg.value("bump_width", 0.1), cfg.value("x_grid", 6), shift);
        rr.report = fingerprinted(cfg, res.to_json());
        return rr;
    }

    if (op == "caloric-oscillation") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto f = ScalarField::from_json(cfg.at("field"));
        const auto res = caloric_oscillation(
            spec, f, cfg.value("T", 1.0), cfg.value("t_c", 0.0),
            cfg.contains("x_c") ? cfg["x_c"].get<Vec>() : Vec(spec.dim(), 0.0),
            cfg.value("radii", std::vector<double>{0.4, 0.2, 0.1, 0.05}), cfg.value("use_mc", false));
        rr.report = fingerprinted(cfg, res.to_json());
        rr.artifacts.emplace_back("oscillation.csv", curve_csv({"r", "osc"}, {res.radii, res.osc}));
        return rr;
    }

    if (op == "resolvent-scan") {
        const auto spec = SimSpec::from_json(cfg.at("sim"));
        const auto f = ScalarField::from_json(cfg.at("field"));
        const auto res = resolvent_norm_scan(
            spec, f, cfg.value("lambdas", std::vector<double>{1, 2, 4, 8, 16}),
            MixedNormSpec::from_json(cfg.value("spec", json::object())),
            cfg.value("box_halfwidth", 2.0), cfg.value("n_anchor", 17));
        rr.report = fingerprinted(cfg, res.to_json());
        rr.artifacts.emplace_back("resolvent.csv",
                                  curve_csv({"lambda", "ratio"}, {res.lambdas, res.ratios}));
        return rr;
    }

    if (op == "green-histogram" || op == "green-analytic") {
        GreenGrid gg;
        if (op == "green-histogram") {
            const auto spec = SimSpec::from_json(cfg.at("sim"));
            gg = green_histogram(spec, cfg.value("lambda", 1.0), cfg.value("n_t", 24),
                                 cfg.value("n_x", 48), cfg.value("x_halfwidth", 3.0));
        } else {
            gg = analytic_green_bm(cfg.value("lambda", 1.0), cfg.value("scale", 1.0),
                                   cfg.value("dim", 2), cfg.value("horizon", 12.0),
                                   cfg.value("n_t", 24), cfg.value("n_x", 48),
                                   cfg.value("x_halfwidth", 3.0));
        }
        rr.report = fingerprinted(cfg, gg.summary_json());
        if (cfg.value("csv", false)) {
            std::ostringstream os;
            gg.write_csv(os);
            rr.artifacts.emplace_back("green.csv", os.str());
        }
        return rr;
    }

    if (op == "reverse-holder-scan" || op == "doubling-scan" || op == "a-infty" ||
        op == "negative-power") {
        GreenGrid gg;
        if (cfg.contains("sim")) {
            const auto spec = SimSpec::from_json(cfg.at("sim"));
            gg = green_histogram(spec, cfg.value("lambda", 1.0), cfg.value("n_t", 24),
                                 cfg.value("n_x", 48), cfg.value("x_halfwidth", 3.0));
        } else {
            gg = analytic_green_bm(cfg.value("lambda", 1.0), cfg.value("scale", 1.0),
                                   cfg.value("dim", 2), cfg.value("horizon", 12.0),
                                   cfg.value("n_t", 24), cfg.value("n_x", 48),
                                   cfg.value("x_halfwidth", 3.0));
        }
        if (op == "reverse-holder-scan") {
            const auto res = reverse_holder_scan(gg.density, cfg.value("p", 3.0),
                                                 cfg.value("levels", 4), cfg.value("offsets", 3));
            json body{{"sup_ratio", res.sup_ratio}, {"cylinders", res.table.size()}};
            rr.report = fingerprinted(cfg, body);
        } else if (op == "doubling-scan") {
            const auto res = doubling_scan(gg.density, gg.marginal, cfg.value("levels", 3));
            rr.report = fingerprinted(cfg, res.to_json());
        } else if (op == "a-infty") {
            const auto res = a_infty_check(
                gg.density, gg.marginal,
                cfg.contains("center") ? cfg["center"].get<Vec>() : Vec(gg.density.dim(), 0.0),
                cfg.value("r", 1.0), cfg.value("n_samples", 50), cfg.value("seed", std::uint64_t{3}));
            json body = res.to_json();
            body.erase("samples");
            rr.report = fingerprinted(cfg, body);
        } else {
            const auto region = cylinder_from_json(cfg.value("region", json::object()), gg.density.dim());
            const auto res = negative_power_integral(gg.density, cfg.value("mu", 0.2), region,
                                                     cfg.value("t_eps", 0.05));
            rr.report = fingerprinted(cfg, res.to_json());
        }
        return rr;
    }

    if (op == "chaos-terms" || op == "variance-oracle") {
        const auto sigma = MatrixField::from_json(cfg.at("sigma"));
        const auto f = ScalarField::from_json(cfg.at("field"));
        ChaosConfig cc;
        if (cfg.contains("chaos")) {
            const auto& cj = cfg["chaos"];
            cc.m_max = cj.value("m_max", 3);
            cc.nodes = cj.value("nodes", 8);
            cc.grid_n = cj.value("grid_n", 129);
            cc.grid_pad = cj.value("grid_pad", 6.0);
            cc.gap_floor_rel = cj.value("gap_floor_rel", 1e-3);
            cc.richardson = cj.value("richardson", true);
        }
        const double t0 = cfg.value("t0", 1.0);
        const Vec x0 = cfg.contains("x0") ? cfg["x0"].get<Vec>() : Vec{0.0, 0.0};
        const double half = cc.grid_pad * std::sqrt(t0) + norm2(x0);
        const double a_scale = sigma.kind == "identity" ? sq(sigma.params.count("scale")
                                                                 ? sigma.params.at("scale")
                                                                 : 1.0)
                                                        : 1.0;
        SemigroupEngine eng(a_scale, cc.grid_n, x0[0], x0[1], half);
        const Plane fg = eng.sample(f);
        if (op == "variance-oracle") {
            rr.report = fingerprinted(cfg, json{{"V", variance_oracle(eng, fg, t0, x0[0], x0[1])}});
            return rr;
        }
        const auto table = chaos_terms(eng, sigma, fg, t0, x0[0], x0[1], cc);
        rr.report = fingerprinted(cfg, table.to_json());
        std::vector<double> orders, svals;
        for (std::size_t m = 0; m < table.S.size(); ++m) {
            orders.push_back(static_cast<double>(m + 1));
            svals.push_back(table.S[m]);
        }
        rr.artifacts.emplace_back("chaos_terms.csv",
                                  curve_csv({"order", "S", "remainder"},
                                            {orders, svals, table.remainder}));
        return rr;
    }

    if (op == "rotation-experiment") {
        const auto f = ScalarField::from_json(cfg.at("field"));
        ChaosConfig cc;
        if (cfg.contains("chaos")) {
            const auto& cj = cfg["chaos"];
            cc.m_max = cj.value("m_max", 3);
            cc.nodes = cj.value("nodes", 8);
            cc.grid_n = cj.value("grid_n", 129);
            cc.grid_pad = cj.value("grid_pad", 6.0);
            cc.gap_floor_rel = cj.value("gap_floor_rel", 1e-3);
            cc.richardson = cj.value("richardson", true);
        }
        std::vector<Vec> x0s;
        for (const auto& x : cfg.at("x0_list")) x0s.push_back(x.get<Vec>());
        std::vector<MatrixField> sigmas;
        for (const auto& s : cfg.at("sigmas")) sigmas.push_back(MatrixField::from_json(s));
        const auto res = rotation_experiment(x0s, cfg.value("t0", 1.0), f, cc, sigmas);
        rr.report = fingerprinted(cfg, res.to_json());
        return rr;
    }

    if (op == "gehring-decompose") {
        const int dim = cfg.value("dim", 2);
        const int depth = cfg.value("depth", 4);
        BoxFunction g(dim, depth);
        const std::string input = cfg.value("input", std::string("random"));
        const std::uint64_t seed = cfg.value("seed", std::uint64_t{11});
        if (input == "random") {
            auto& cells = g.cells();
            for (std::size_t i = 0; i < cells.size(); ++i)
                cells[i] = 0.1 + CounterRng::uniform(seed, i, 0, 0) +
                           20.0 * (CounterRng::uniform(seed, i, 1, 0) < 0.01
                                       ? CounterRng::uniform(seed, i, 2, 0)
                                       : 0.0);
            g.rebuild();
        } else if (input == "hot_cell") {
            auto& cells = g.cells();
            std::fill(cells.begin(), cells.end(), 0.1);
            cells[cells.size() / 2 + cells.size() / 8] = cfg.value("hot_value", 5000.0);
            g.rebuild();
        } else {
            throw ConfigError("input", "unknown gehring input kind '" + input + "'");
        }
        double lambda = cfg.value("lambda", 0.0);
        auto probe = tau_lambda_decompose(g, 1e300);  // computes g_bar cheaply (no stops)
        if (lambda <= 0.0) lambda = 2.0 * probe.g_bar + 1.0;
        auto res = greedy_select(g, tau_lambda_decompose(g, lambda));
        json body = res.to_json();
        body.erase("stopped");
        body.erase("greedy");
        body["n_stopped"] = res.stopped.size();
        body["n_greedy"] = res.greedy.size();
        rr.report = fingerprinted(cfg, body);
        rr.exit_code = res.cover_verified ? 0 : 2;
        return rr;
    }

    if (op == "reverse-holder-constant" || op == "improved-exponent") {
        const double a = cfg.value("a", 0.3);
        const int depth = cfg.value("depth", 6);
        auto ffn = [a](const std::vector<double>& x) {
            double r2 = 0;
            for (double v : x) r2 += v * v;
            const double r = std::sqrt(r2);
            return r > 0 ? std::pow(r, -a) : std::pow(1e-12, -a);
        };
        SpatialDyadic f(depth, ffn);
        const double p = cfg.value("p", 2.0);
        const auto rh = reverse_holder_constant(f, p);
        if (op == "reverse-holder-constant") {
            rr.report = fingerprinted(cfg, rh.to_json());
            return rr;
        }
        SpatialDyadic f_fine(depth + 1, ffn);
        const auto ie = improved_exponent(f, f_fine, p, rh.A, cfg.value("B", rh.A),
                                          cfg.value("N3", 1.0));
        json body = ie.to_json();
        body["A"] = rh.A;
        rr.report = fingerprinted(cfg, body);
        return rr;
    }

    if (op == "nonexistence") {
        const auto v = nonexistence_diagnostic(
            cfg.value("alpha", 0.5), cfg.value("beta", 0.5),
            cfg.at("h_ladder").get<std::vector<double>>(), cfg.value("T", 1.0),
            cfg.value("n_paths", std::size_t{2000}), cfg.value("seed", std::uint64_t{21}),
            cfg.value("control", false), cfg.value("dim", 2), cfg.value("min_ratio", 1.5));
        rr.report = fingerprinted(cfg, v.to_json());
        const bool expect = !cfg.value("control", false);
        rr.exit_code = v.pass == expect ? 0 : 2;
        return rr;
    }

    if (op == "nonuniqueness-gap") {
        const auto v = nonuniqueness_gap(
            cfg.value("q", 1.5), cfg.value("delta_ladder", std::vector<double>{1e-2, 1e-3}),
            cfg.value("t0", 0.1), cfg.value("h", 2e-5), cfg.value("n_paths", std::size_t{20000}),
            cfg.value("seed", std::uint64_t{23}), cfg.value("control", false),
            cfg.value("min_gap", 0.45));
        rr.report = fingerprinted(cfg, v.to_json());
        rr.exit_code = v.pass ? 0 : 2;
        return rr;
    }

    if (op == "pilot-gap-t0") {
        const double t0 = pilot_gap_t0(cfg.value("q", 1.5),
                                       cfg.value("t0_ladder", std::vector<double>{0.4, 0.2, 0.1, 0.05}),
                                       cfg.value("h", 1e-4), cfg.value("n_paths", std::size_t{4000}),
                                       cfg.value("seed", std::uint64_t{2}));
        rr.report = fingerprinted(cfg, json{{"t0", t0}});
        return rr;
    }

    if (op == "radial-threshold") {
        const auto res = radial_drift_threshold(
            cfg.at("h_ladder").get<std::vector<double>>(), cfg.value("T", 1.0),
            cfg.value("n_paths", std::size_t{2000}), cfg.value("seed", std::uint64_t{31}),
            cfg.value("eps_small", 0.05), cfg.value("div_ratio", 1.2), cfg.value("bnd_ratio", 1.1));
        rr.report = fingerprinted(cfg, res.to_json());
        rr.exit_code = res.separated ? 0 : 2;
        return rr;
    }

    if (op == "nonexistence-invariance") {
        const auto v = nonexistence_invariance(
            cfg.value("alpha", 0.5), cfg.value("beta", 0.5), cfg.value("eps", 0.25),
            cfg.at("h_ladder").get<std::vector<double>>(), cfg.value("T", 1.0),
            cfg.value("n_paths", std::size_t{2000}), cfg.value("seed", std::uint64_t{29}),
            cfg.value("tol", 0.1));
        rr.report = fingerprinted(cfg, v.to_json());
        rr.exit_code = v.pass ? 0 : 2;
        return rr;
    }

    throw ConfigError("op", "unknown operation '" + op + "'");
}

}  // namespace driftlab
