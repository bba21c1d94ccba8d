#pragma once

#include <cmath>
#include <vector>

#include "driftlab/common.hpp"

namespace driftlab {

using Vec = std::vector<double>;

inline double norm2(const Vec& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double dist2(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += sq(a[i] - b[i]);
    return std::sqrt(s);
}

/// A point (t, x) of space-time R^{d+1}.
struct SpaceTimePoint {
    double t = 0.0;
    Vec x;
    int dim() const { return static_cast<int>(x.size()); }
};

struct Ball {
    Vec center;
    double radius = 1.0;
    bool contains(const Vec& y) const { return dist2(center, y) < radius; }
    double volume() const { return ball_volume(static_cast<int>(center.size()), radius); }
};

/// Parabolic cylinder C_rho(t,x) = [t, t+rho^2) x B_rho(x).
struct Cylinder {
    double t0 = 0.0;
    Vec center;
    double rho = 1.0;

    double t1() const { return t0 + rho * rho; }
    Ball ball() const { return Ball{center, rho}; }
    bool contains(double t, const Vec& y) const {
        return t >= t0 && t < t1() && dist2(center, y) < rho;
    }
    double volume() const { return rho * rho * ball_volume(static_cast<int>(center.size()), rho); }
    Cylinder scaled(double mu) const { return Cylinder{t0, center, mu * rho}; }
};

}  // namespace driftlab
