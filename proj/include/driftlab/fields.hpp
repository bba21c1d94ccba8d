#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftlab/common.hpp"
#include "driftlab/geometry.hpp"

namespace driftlab {

using json = nlohmann::json;

/// Where a catalog entry blows up. Evaluation exactly on the set is an error;
/// floors are applied by callers (steppers, samplers), never here.
enum class SingularKind { none, point, hyperplane };

namespace detail {

inline double get_param(const std::map<std::string, double>& params, const std::string& name,
                        std::optional<double> fallback = std::nullopt) {
    auto it = params.find(name);
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw ConfigError("params." + name, "missing parameter");
}

inline Vec get_vec(const std::map<std::string, Vec>& vecs, const std::string& name, int dim) {
    auto it = vecs.find(name);
    if (it != vecs.end()) {
        if (static_cast<int>(it->second.size()) != dim)
            throw ConfigError("params." + name, "wrong dimension");
        return it->second;
    }
    return Vec(dim, 0.0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// VectorField: the drift catalog.
// ---------------------------------------------------------------------------

/// Pure descriptor of a drift b(t,x). Evaluation is reentrant; descriptors
/// are value types and serialize to {kind, dim, dilation, params}.
struct VectorField {
    std::string kind = "zero";
    int dim = 2;
    double dilation = 1.0;  // parabolic dilation factor c: b^(t,x) = c b(c^2 t, c x)
    std::map<std::string, double> params;
    std::map<std::string, Vec> vec_params;

    SingularKind singular_set() const {
        if (kind == "radial_inverse" || kind == "example_3_22_1" || kind == "remark_1_28_1")
            return SingularKind::point;
        if (kind == "example_5_23_1") return SingularKind::hyperplane;
        return SingularKind::none;
    }

    /// True when the closed-form value at (t,x) is undefined.
    bool is_singular(double t, const Vec& x) const {
        const double td = dilation * dilation * t;
        Vec xd = x;
        for (double& v : xd) v *= dilation;
        return is_singular_base(td, xd);
    }

    Vec eval(double t, const Vec& x) const {
        const double c = dilation;
        Vec xd = x;
        for (double& v : xd) v *= c;
        Vec b = eval_base(c * c * t, xd);
        for (double& v : b) v *= c;
        return b;
    }

    /// Evaluation with singular floors for the stepper: |x| (point entries)
    /// or |x^1| (hyperplane entries) is floored at r_floor > 0. A state lying
    /// exactly on the singular set yields zero drift (no defined direction).
    Vec eval_floored(double t, const Vec& x, double r_floor) const {
        const double c = dilation;
        Vec xd = x;
        for (double& v : xd) v *= c;
        Vec b = eval_base_floored(c * c * t, xd, c * r_floor);
        for (double& v : b) v *= c;
        return b;
    }

    /// Exact drift displacement over [t, t+h] with the state frozen:
    /// int_t^{t+h} b(s, x) ds. Entries with a separable t^{-a} time profile
    /// integrate it in closed form; others fall back to h * b(t,x).
    Vec step_displacement(double t, double h, const Vec& x, double r_floor) const {
        const double c = dilation;
        Vec xd = x;
        for (double& v : xd) v *= c;
        // time substitution: int_t^{t+h} c b(c^2 s, cx) ds = c^{-1} int_{c^2 t}^{c^2(t+h)} b(u, cx) du
        Vec disp = step_displacement_base(c * c * t, c * c * h, xd, c * r_floor);
        for (double& v : disp) v /= c;
        return disp;
    }

    json to_json() const {
        json j{{"kind", kind}, {"dim", dim}, {"dilation", dilation}};
        j["params"] = params;
        for (const auto& [k, v] : vec_params) j["params"][k] = v;
        return j;
    }

    static VectorField from_json(const json& j) {
        VectorField f;
        f.kind = j.at("kind").get<std::string>();
        f.dim = j.value("dim", 2);
        f.dilation = j.value("dilation", 1.0);
        if (j.contains("params"))
            for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
                if (it.value().is_array())
                    f.vec_params[it.key()] = it.value().get<Vec>();
                else
                    f.params[it.key()] = it.value().get<double>();
            }
        return f;
    }

private:
    bool is_singular_base(double t, const Vec& x) const {
        if (kind == "radial_inverse") return norm2(x) == 0.0;
        if (kind == "example_3_22_1") return t > 0.0 && t <= 1.0 && norm2(x) == 0.0;
        if (kind == "remark_1_28_1") return t >= 0.0 && norm2(x) == 0.0;
        if (kind == "example_5_23_1") return x[0] != 0.0 ? false : std::abs(x[0]) < 1.0;
        return false;
    }

    Vec eval_base(double t, const Vec& x) const {
        if (is_singular_base(t, x))
            throw SingularityError("drift '" + kind + "' evaluated on its singular set");
        return eval_base_floored(t, x, 0.0);
    }

    Vec eval_base_floored(double t, const Vec& x, double r_floor) const {
        const int d = dim;
        Vec b(d, 0.0);
        if (kind == "zero") return b;
        if (kind == "constant") return detail::get_vec(vec_params, "v", d);
        if (kind == "smooth_bump") {
            const double w = detail::get_param(params, "width", 1.0);
            Vec v = detail::get_vec(vec_params, "v", d);
            const double a = std::exp(-0.5 * sq(norm2(x) / w));
            for (int i = 0; i < d; ++i) b[i] = v[i] * a;
            return b;
        }
        if (kind == "radial_inverse") {
            // b(x) = -c x / |x|^2   (Example 12.21.01 uses c = eps * d)
            const double c = detail::get_param(params, "c");
            const double rx = norm2(x);
            if (rx == 0.0) return b;
            const double r = std::max(rx, r_floor);
            for (int i = 0; i < d; ++i) b[i] = -c * (x[i] / rx) / r;
            return b;
        }
        if (kind == "example_3_22_1") {
            // b(t,x) = -scale t^{-alpha} |x|^{-beta} x/|x| on {0 < t <= 1}
            const double alpha = detail::get_param(params, "alpha");
            const double beta = detail::get_param(params, "beta");
            const double scale = detail::get_param(params, "scale", 1.0);
            if (!(t > 0.0 && t <= 1.0)) return b;
            const double rx = norm2(x);
            if (rx == 0.0) return b;
            const double r = std::max(rx, r_floor);
            const double mag = scale * std::pow(t, -alpha) * std::pow(r, -beta);
            for (int i = 0; i < d; ++i) b[i] = -mag * x[i] / rx;
            return b;
        }
        if (kind == "example_3_22_2") {
            // b^1(t,x) = t^{-1/q} sign(x^1) on {0 < t <= 1, |x^1| <= 1}
            const double q = detail::get_param(params, "q");
            if (!(t > 0.0 && t <= 1.0) || std::abs(x[0]) > 1.0 || x[0] == 0.0) return b;
            b[0] = std::pow(t, -1.0 / q) * (x[0] > 0 ? 1.0 : -1.0);
            return b;
        }
        if (kind == "remark_1_28_1") {
            // |b| = c / (|x|^gamma (|x| + sqrt(t))^{1-gamma}) for t >= 0, aimed at the origin
            const double c = detail::get_param(params, "c", 1.0);
            const double gamma = detail::get_param(params, "gamma");
            if (t < 0.0) return b;
            const double rx = norm2(x);
            if (rx == 0.0) return b;
            const double r = std::max(rx, r_floor);
            const double mag = c / (std::pow(r, gamma) * std::pow(r + std::sqrt(t), 1.0 - gamma));
            for (int i = 0; i < d; ++i) b[i] = -mag * x[i] / rx;
            return b;
        }
        if (kind == "example_5_23_1") {
            // b(x) = (beta(x^1), 0, ...), beta(r) = -|r|^{-alpha} 1_{(-1,1)}(r) sign r
            const double alpha = detail::get_param(params, "alpha");
            const double r1 = x[0];
            if (r1 == 0.0 || std::abs(r1) >= 1.0) return b;
            const double ar = std::max(std::abs(r1), r_floor);
            b[0] = -std::pow(ar, -alpha) * (r1 > 0 ? 1.0 : -1.0);
            return b;
        }
        throw ConfigError("kind", "unknown drift kind '" + kind + "'");
    }

    Vec step_displacement_base(double t, double h, const Vec& x, double r_floor) const {
        // closed-form time integral for the separable t^{-a} entries
        auto power_integral = [](double a, double t0, double t1) {
            // int_{t0}^{t1} s^{-a} ds over the part with 0 < s <= 1
            t0 = std::max(t0, 0.0);
            t1 = std::min(t1, 1.0);
            if (t1 <= t0) return 0.0;
            return (std::pow(t1, 1.0 - a) - std::pow(t0, 1.0 - a)) / (1.0 - a);
        };
        if (kind == "example_3_22_2") {
            const double q = detail::get_param(params, "q");
            Vec b(dim, 0.0);
            if (std::abs(x[0]) > 1.0 || x[0] == 0.0) return b;
            b[0] = power_integral(1.0 / q, t, t + h) * (x[0] > 0 ? 1.0 : -1.0);
            return b;
        }
        if (kind == "example_3_22_1") {
            const double alpha = detail::get_param(params, "alpha");
            const double beta = detail::get_param(params, "beta");
            const double scale = detail::get_param(params, "scale", 1.0);
            Vec b(dim, 0.0);
            const double rx = norm2(x);
            if (rx == 0.0) return b;
            const double r = std::max(rx, r_floor);
            const double mag = scale * power_integral(alpha, t, t + h) * std::pow(r, -beta);
            for (int i = 0; i < dim; ++i) b[i] = -mag * x[i] / rx;
            return b;
        }
        Vec b = eval_base_floored(t, x, r_floor);
        for (double& v : b) v *= h;
        return b;
    }
};

// ---------------------------------------------------------------------------
// MatrixField: the diffusion catalog. sigma is d x d1, a := sigma sigma^*.
// ---------------------------------------------------------------------------

struct MatrixField {
    std::string kind = "identity";
    int dim = 2;
    int dim1 = 2;
    double dilation = 1.0;  // sigma^(t,x) = sigma(c^2 t, c x)
    std::map<std::string, double> params;

    /// Declared ellipticity: eigenvalues of a lie in [delta, 1/delta].
    /// Zero for the degenerate scale = 0 test entry.
    double ellipticity() const {
        if (kind == "identity") {
            const double s2 = sq(detail::get_param(params, "scale", 1.0));
            return s2 == 0.0 ? 0.0 : std::min(s2, 1.0 / s2);
        }
        if (kind == "log_sin_discontinuous") return 1.0 / 9.0;
        if (kind == "block_6_3_4") {
            const double a2 = sq(detail::get_param(params, "alpha", 1.0)) +
                              sq(detail::get_param(params, "beta", 0.0));
            return std::min(a2, 1.0 / a2);
        }
        if (kind == "rotation_2d") return 1.0;
        throw ConfigError("kind", "unknown sigma kind '" + kind + "'");
    }

    /// Columns that are identically zero (pruned from chaos chains).
    std::vector<int> nonzero_columns() const {
        std::vector<int> cols;
        if (kind == "block_6_3_4") {
            const double alpha = detail::get_param(params, "alpha", 1.0);
            const double beta = detail::get_param(params, "beta", 0.0);
            for (int k = 0; k < 3; ++k)
                if (alpha != 0.0) cols.push_back(k);
            for (int k = 3; k < 12; ++k)
                if (beta != 0.0) cols.push_back(k);
            return cols;
        }
        for (int k = 0; k < dim1; ++k) cols.push_back(k);
        return cols;
    }

    /// sigma(t,x) in row-major d x d1 layout.
    std::vector<double> eval(double t, const Vec& x) const {
        const double c = dilation;
        Vec xd = x;
        for (double& v : xd) v *= c;
        return eval_base(c * c * t, xd);
    }

    /// a(t,x) = sigma sigma^*, row-major d x d.
    std::vector<double> eval_a(double t, const Vec& x) const {
        const auto s = eval(t, x);
        std::vector<double> a(dim * dim, 0.0);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                double acc = 0;
                for (int k = 0; k < dim1; ++k) acc += s[i * dim1 + k] * s[j * dim1 + k];
                a[i * dim + j] = acc;
            }
        return a;
    }

    json to_json() const {
        return json{{"kind", kind}, {"dim", dim}, {"dim1", dim1}, {"dilation", dilation},
                    {"params", params}};
    }

    static MatrixField from_json(const json& j) {
        MatrixField f;
        f.kind = j.at("kind").get<std::string>();
        f.dim = j.value("dim", 2);
        f.dim1 = j.value("dim1", f.dim);
        f.dilation = j.value("dilation", 1.0);
        if (j.contains("params"))
            for (auto it = j["params"].begin(); it != j["params"].end(); ++it)
                f.params[it.key()] = it.value().get<double>();
        if (f.kind == "block_6_3_4") {
            f.dim = 3;
            f.dim1 = 12;
        }
        if (f.kind == "rotation_2d") f.dim = f.dim1 = 2;
        return f;
    }

private:
    std::vector<double> eval_base(double t, const Vec& x) const {
        (void)t;
        const int d = dim, d1 = dim1;
        std::vector<double> s(d * d1, 0.0);
        if (kind == "identity") {
            const double scale = detail::get_param(params, "scale", 1.0);
            for (int i = 0; i < d; ++i) s[i * d1 + i] = scale;
            return s;
        }
        if (kind == "log_sin_discontinuous") {
            // 2 I + zeta(x) sin(ln |ln |x||), zeta = smooth radial cutoff times I
            const double r = norm2(x);
            double osc = 0.0;
            if (r > 0.0 && r < 0.5) {
                const double u = 2.0 * r;
                const double cutoff = std::exp(1.0 - 1.0 / (1.0 - u * u));
                osc = cutoff * std::sin(std::log(std::abs(std::log(r))));
            }
            for (int i = 0; i < d; ++i) s[i * d1 + i] = 2.0 + osc;
            return s;
        }
        if (kind == "block_6_3_4") {
            // [alpha I_3 | (beta/|x|) B(x)], row i of B carries x in columns 3i..3i+2;
            // 0/0 := 3^{-1/2} at x = 0.
            if (d != 3 || d1 != 12) throw ConfigError("sigma.dim", "block_6_3_4 is 3 x 12");
            const double alpha = detail::get_param(params, "alpha", 1.0);
            const double beta = detail::get_param(params, "beta", 0.0);
            const double r = norm2(x);
            for (int i = 0; i < 3; ++i) s[i * d1 + i] = alpha;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    const double unit = r > 0.0 ? x[j] / r : 1.0 / std::sqrt(3.0);
                    s[i * d1 + 3 + 3 * i + j] = beta * unit;
                }
            return s;
        }
        if (kind == "rotation_2d") {
            // columns x/|x| and x*/|x| with x* = (-x^2, x^1); sigma(0) = I
            const double r = norm2(x);
            if (r == 0.0) {
                s[0 * d1 + 0] = 1.0;
                s[1 * d1 + 1] = 1.0;
                return s;
            }
            s[0 * d1 + 0] = x[0] / r;
            s[1 * d1 + 0] = x[1] / r;
            s[0 * d1 + 1] = -x[1] / r;
            s[1 * d1 + 1] = x[0] / r;
            return s;
        }
        throw ConfigError("kind", "unknown sigma kind '" + kind + "'");
    }
};

// ---------------------------------------------------------------------------
// ScalarField: nonnegative test functions f(t,x).
// ---------------------------------------------------------------------------

struct ScalarField {
    std::string kind = "one";
    int dim = 2;
    double dilation = 1.0;
    bool nonnegative = true;
    std::map<std::string, double> params;
    std::map<std::string, Vec> vec_params;

    bool is_singular(double t, const Vec& x) const {
        (void)t;
        if (kind == "inv_norm") {
            Vec xd = x;
            for (double& v : xd) v *= dilation;
            return norm2(xd) == 0.0;
        }
        return false;
    }

    double eval(double t, const Vec& x) const {
        const double c = dilation;
        Vec xd = x;
        for (double& v : xd) v *= c;
        return c * eval_base(c * c * t, xd);
    }

    json to_json() const {
        json j{{"kind", kind}, {"dim", dim}, {"dilation", dilation}};
        j["params"] = params;
        for (const auto& [k, v] : vec_params) j["params"][k] = v;
        return j;
    }

    static ScalarField from_json(const json& j) {
        ScalarField f;
        f.kind = j.at("kind").get<std::string>();
        f.dim = j.value("dim", 2);
        f.dilation = j.value("dilation", 1.0);
        if (j.contains("params"))
            for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
                if (it.value().is_array())
                    f.vec_params[it.key()] = it.value().get<Vec>();
                else
                    f.params[it.key()] = it.value().get<double>();
            }
        return f;
    }

private:
    double eval_base(double t, const Vec& x) const {
        if (kind == "one") return 1.0;
        if (kind == "constant") return detail::get_param(params, "c", 1.0);
        if (kind == "inv_norm") {
            const double a = detail::get_param(params, "a", 1.0);
            const double r = norm2(x);
            if (r == 0.0) throw SingularityError("inv_norm evaluated at x = 0");
            return std::pow(r, -a);
        }
        if (kind == "indicator_ball") {
            const double r = detail::get_param(params, "radius", 1.0);
            const Vec c = detail::get_vec(vec_params, "center", dim);
            return dist2(x, c) < r ? 1.0 : 0.0;
        }
        if (kind == "indicator_cylinder") {
            const double rho = detail::get_param(params, "rho", 1.0);
            const double t0 = detail::get_param(params, "t0", 0.0);
            const Vec c = detail::get_vec(vec_params, "center", dim);
            return (t >= t0 && t < t0 + rho * rho && dist2(x, c) < rho) ? 1.0 : 0.0;
        }
        if (kind == "gaussian_bump") {
            const double amp = detail::get_param(params, "amp", 1.0);
            const double w = detail::get_param(params, "width", 1.0);
            const Vec c = detail::get_vec(vec_params, "center", dim);
            return amp * std::exp(-0.5 * sq(dist2(x, c) / w));
        }
        if (kind == "half_space") {
            const double c = detail::get_param(params, "c", 0.0);
            return x[0] >= c ? 1.0 : 0.0;
        }
        if (kind == "linear_x1") return x[0];          // test-only helper, may be negative
        if (kind == "square_x1") return x[0] * x[0];   // test-only helper
        if (kind == "remark_1_28_1_f") {
            const double gamma = detail::get_param(params, "gamma");
            if (t < 0.0) return 0.0;
            const double r = norm2(x);
            if (r == 0.0) throw SingularityError("remark_1_28_1_f evaluated at x = 0");
            return 1.0 / (std::pow(r, gamma) * std::pow(r + std::sqrt(t), 1.0 - gamma));
        }
        throw ConfigError("kind", "unknown scalar kind '" + kind + "'");
    }
};

/// Parabolic dilation b -> c b(c^2 t, c x) (drifts), sigma -> sigma(c^2 t, c x).
inline VectorField parabolic_dilate(VectorField f, double c) {
    if (!(c > 0.0)) throw ConfigError("dilation", "dilation factor must be positive");
    f.dilation *= c;
    return f;
}

inline MatrixField parabolic_dilate(MatrixField f, double c) {
    if (!(c > 0.0)) throw ConfigError("dilation", "dilation factor must be positive");
    f.dilation *= c;
    return f;
}

inline ScalarField parabolic_dilate(ScalarField f, double c) {
    if (!(c > 0.0)) throw ConfigError("dilation", "dilation factor must be positive");
    f.dilation *= c;
    return f;
}

/// Catalog listing for the CLI: name, citation anchor, default parameters.
struct CatalogEntry {
    std::string name;
    std::string role;
    std::string reference;
};

inline std::vector<CatalogEntry> field_catalog() {
    return {
        {"zero", "drift", "trivial"},
        {"constant", "drift", "bounded smooth test drift"},
        {"smooth_bump", "drift", "bounded smooth test drift"},
        {"radial_inverse", "drift", "Example 12.21.01: b = -c x/|x|^2"},
        {"example_3_22_1", "drift", "Example 3.22.1: -t^{-alpha}|x|^{-beta} x/|x|, alpha+beta=1"},
        {"example_3_22_2", "drift", "Example 3.22.2: t^{-1/q} sign(x^1) gate |x^1|<=1"},
        {"remark_1_28_1", "drift", "Remark 1.28.1: |b| = c/(|x|^gamma (|x|+sqrt(t))^{1-gamma})"},
        {"example_5_23_1", "drift", "Example 5.23.1: one-coordinate -|r|^{-alpha} sign r on (-1,1)"},
        {"identity", "sigma", "scaled identity"},
        {"log_sin_discontinuous", "sigma", "Ch.5 intro: 2I + zeta(x) sin(ln|ln|x||)"},
        {"block_6_3_4", "sigma", "Eq. (6.3.4): d=3, d1=12 block matrix, 0/0 = 3^{-1/2}"},
        {"rotation_2d", "sigma", "Remark 7.10.1: columns x/|x|, x*/|x|, sigma(0) = I"},
        {"one", "scalar", "trivial"},
        {"inv_norm", "scalar", "|x|^{-a}; |x|^{-1} is in E_{q,p,1} for p in (1,d)"},
        {"indicator_ball", "scalar", "test function"},
        {"indicator_cylinder", "scalar", "test function"},
        {"gaussian_bump", "scalar", "test function"},
        {"half_space", "scalar", "test function"},
        {"remark_1_28_1_f", "scalar", "Remark 1.28.1 magnitude profile"},
    };
}

}  // namespace driftlab
