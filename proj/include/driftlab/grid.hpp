#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "driftlab/common.hpp"
#include "driftlab/fields.hpp"
#include "driftlab/geometry.hpp"

namespace driftlab {

/// Cell-sampled function on a space-time box [t_lo, t_hi) x prod [x_lo, x_hi)
/// with n_t uniform rows in time and n_x cells per spatial axis. Values live
/// at cell centers (midpoint discretization everywhere downstream).
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(int dim, double t_lo, double t_hi, int n_t, double x_lo, double x_hi, int n_x)
        : dim_(dim), t_lo_(t_lo), t_hi_(t_hi), n_t_(n_t), x_lo_(x_lo), x_hi_(x_hi), n_x_(n_x) {
        if (dim < 1 || n_t < 1 || n_x < 1 || !(t_hi > t_lo) || !(x_hi > x_lo))
            throw ConfigError("grid", "invalid grid geometry");
        n_cells_space_ = 1;
        for (int i = 0; i < dim; ++i) n_cells_space_ *= static_cast<std::size_t>(n_x);
        values_.assign(static_cast<std::size_t>(n_t) * n_cells_space_, 0.0);
    }

    int dim() const { return dim_; }
    int n_t() const { return n_t_; }
    int n_x() const { return n_x_; }
    double t_lo() const { return t_lo_; }
    double t_hi() const { return t_hi_; }
    double x_lo() const { return x_lo_; }
    double x_hi() const { return x_hi_; }
    double dt() const { return (t_hi_ - t_lo_) / n_t_; }
    double dx() const { return (x_hi_ - x_lo_) / n_x_; }
    double cell_volume() const { return dt() * space_cell_volume(); }
    double space_cell_volume() const { return std::pow(dx(), dim_); }
    std::size_t n_cells_space() const { return n_cells_space_; }
    std::size_t size() const { return values_.size(); }

    double& at(int it, std::size_t ix) { return values_[static_cast<std::size_t>(it) * n_cells_space_ + ix]; }
    double at(int it, std::size_t ix) const {
        return values_[static_cast<std::size_t>(it) * n_cells_space_ + ix];
    }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double t_center(int it) const { return t_lo_ + (it + 0.5) * dt(); }

    Vec x_center(std::size_t ix) const {
        Vec x(dim_);
        for (int i = dim_ - 1; i >= 0; --i) {
            x[i] = x_lo_ + (static_cast<double>(ix % n_x_) + 0.5) * dx();
            ix /= n_x_;
        }
        return x;
    }

    /// Index of the cell containing (t,x); -1 when outside the box.
    long cell_index(double t, const Vec& x) const {
        if (t < t_lo_ || t >= t_hi_) return -1;
        const int it = std::min(static_cast<int>((t - t_lo_) / dt()), n_t_ - 1);
        std::size_t ix = 0;
        for (int i = 0; i < dim_; ++i) {
            if (x[i] < x_lo_ || x[i] >= x_hi_) return -1;
            const int k = std::min(static_cast<int>((x[i] - x_lo_) / dx()), n_x_ - 1);
            ix = ix * n_x_ + static_cast<std::size_t>(k);
        }
        return static_cast<long>(static_cast<std::size_t>(it) * n_cells_space_ + ix);
    }

    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string p) { provenance_ = std::move(p); }

    std::string grid_fingerprint() const {
        return fingerprint_hex(provenance_ + "|" + std::to_string(dim_) + "|" + std::to_string(n_t_) +
                               "x" + std::to_string(n_x_) + "|" + std::to_string(t_lo_) + "," +
                               std::to_string(t_hi_) + "," + std::to_string(x_lo_) + "," +
                               std::to_string(x_hi_));
    }

    /// Samples a scalar function at cell centers. Cells whose center lies on a
    /// declared singular set are re-sampled at the center shifted by half the
    /// cell's spatial diagonal ("singular-cell shift").
    void sample(const std::function<double(double, const Vec&)>& f,
                const std::function<bool(double, const Vec&)>& singular = nullptr) {
        const double half = 0.5 * dx();
        parallel_blocks(static_cast<std::size_t>(n_t_), [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t it = b; it < e; ++it) {
                const double t = t_center(static_cast<int>(it));
                for (std::size_t ix = 0; ix < n_cells_space_; ++ix) {
                    Vec x = x_center(ix);
                    if (singular && singular(t, x))
                        for (int i = 0; i < dim_; ++i) x[i] += half;
                    at(static_cast<int>(it), ix) = f(t, x);
                }
            }
        });
    }

    void sample_field(const ScalarField& f) {
        sample([&](double t, const Vec& x) { return f.eval(t, x); },
               [&](double t, const Vec& x) { return f.is_singular(t, x); });
        set_provenance(f.to_json().dump());
    }

    /// Samples |b| of a drift; used by hat_b and the admissibility scans.
    void sample_drift_magnitude(const VectorField& b) {
        sample([&](double t, const Vec& x) { return norm2(b.eval(t, x)); },
               [&](double t, const Vec& x) { return b.is_singular(t, x); });
        set_provenance("abs:" + b.to_json().dump());
    }

private:
    int dim_ = 1;
    double t_lo_ = 0, t_hi_ = 1;
    int n_t_ = 1;
    double x_lo_ = -1, x_hi_ = 1;
    int n_x_ = 1;
    std::size_t n_cells_space_ = 1;
    std::vector<double> values_;
    std::string provenance_ = "raw";
};

}  // namespace driftlab
