#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace driftlab {

inline constexpr double kPi = 3.14159265358979323846;

inline double sq(double x) { return x * x; }

/// Volume of the unit ball in R^d.
inline double unit_ball_volume(int d) {
    // |B_1| = pi^{d/2} / Gamma(d/2 + 1)
    return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

inline double ball_volume(int d, double r) {
    return unit_ball_volume(d) * std::pow(r, d);
}

/// Errors raised when a field is evaluated on its declared singular set.
class SingularityError : public std::runtime_error {
public:
    explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

/// Errors raised for invalid configuration values; `where` is a path into
/// the config object (e.g. "spec.p") so the CLI can point at the offender.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

// ---------------------------------------------------------------------------
// Deterministic parallelism.
//
// Work is split into a fixed number of blocks that does not depend on the
// worker count; per-block results are combined in block order afterwards, so
// outputs are bit-identical at any thread budget.
// ---------------------------------------------------------------------------

inline int& thread_budget() {
    static int budget = static_cast<int>(std::thread::hardware_concurrency());
    return budget;
}

inline void set_thread_budget(int n) { thread_budget() = std::max(1, n); }

inline constexpr std::size_t kParallelBlocks = 64;

/// Runs fn(block_index, begin, end) over [0,n) split into kParallelBlocks
/// contiguous ranges. fn must only touch state owned by its block.
template <class Fn>
void parallel_blocks(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    const std::size_t nblocks = std::min<std::size_t>(kParallelBlocks, n);
    const int workers = std::clamp<int>(thread_budget(), 1, static_cast<int>(nblocks));
    auto run_block = [&](std::size_t b) {
        const std::size_t begin = n * b / nblocks;
        const std::size_t end = n * (b + 1) / nblocks;
        if (begin < end) fn(b, begin, end);
    };
    if (workers == 1) {
        for (std::size_t b = 0; b < nblocks; ++b) run_block(b);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t b = next.fetch_add(1); b < nblocks; b = next.fetch_add(1)) run_block(b);
        });
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Small statistics helpers shared by the estimators.
// ---------------------------------------------------------------------------

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // population variance of the samples
    std::size_t n = 0;
    double std_error() const { return n > 1 ? std::sqrt(var / static_cast<double>(n)) : 0.0; }
};

inline MeanVar mean_var(const std::vector<double>& xs) {
    MeanVar mv;
    mv.n = xs.size();
    if (mv.n == 0) return mv;
    mv.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(mv.n);
    double acc = 0.0;
    for (double x : xs) acc += sq(x - mv.mean);
    mv.var = acc / static_cast<double>(mv.n);
    return mv;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
};

/// Least-squares line through (x_i, y_i).
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) {
        f.intercept = n == 1 ? y[0] : 0.0;
        return f;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += sq(x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += sq(y[i] - my);
    }
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) ssr += sq(y[i] - (f.intercept + f.slope * x[i]));
    f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
    return f;
}

/// FNV-1a over bytes; used for config fingerprints.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fingerprint_hex(const std::string& s) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(s)));
    return std::string(buf);
}

/// Gauss-Legendre nodes/weights on (0,1).
inline void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    // Newton iteration on Legendre polynomials over [-1,1], then shifted.
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

}  // namespace driftlab
