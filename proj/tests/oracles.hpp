#pragma once

// Test-only reference estimators, kept deliberately independent of the
// library's implementation paths: plain enumeration for moments, and the
// Rockafellar-Uryasev variational form for the fractional-tail CVaR
//   CVaR_a(L) = min_c  c + E[(L - c)^+] / a
// whose empirical minimum over c in the sample equals the fractional tail
// average. The threshold-set oracle counts ranks instead of sorting.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracles {

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double variance(const std::vector<double>& xs) {
    const double mu = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return s / static_cast<double>(xs.size() - 1);
}

inline double fraction(const std::vector<bool>& flags) {
    double s = 0.0;
    for (bool f : flags) s += f ? 1.0 : 0.0;
    return s / static_cast<double>(flags.size());
}

inline double weighted_mean(const std::vector<double>& xs,
                            const std::vector<double>& ws) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += ws[i] * xs[i];
        den += ws[i];
    }
    return num / den;
}

inline double weighted_variance(const std::vector<double>& xs,
                                const std::vector<double>& ws) {
    const double mu = weighted_mean(xs, ws);
    double v1 = 0.0, v2 = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        v1 += ws[i];
        v2 += ws[i] * ws[i];
        acc += ws[i] * (xs[i] - mu) * (xs[i] - mu);
    }
    return acc / (v1 - v2 / v1);
}

inline double cvar_fractional(const std::vector<double>& losses, double alpha) {
    const double n = static_cast<double>(losses.size());
    double best = std::numeric_limits<double>::infinity();
    for (double c : losses) {
        double excess = 0.0;
        for (double l : losses) excess += std::max(l - c, 0.0);
        best = std::min(best, c + excess / (alpha * n));
    }
    return best;
}

inline double cvar_fractional_weighted(const std::vector<double>& losses,
                                       const std::vector<double>& ws, double alpha) {
    double total = 0.0;
    for (double w : ws) total += w;
    double best = std::numeric_limits<double>::infinity();
    for (double c : losses) {
        double excess = 0.0;
        for (std::size_t i = 0; i < losses.size(); ++i) {
            excess += ws[i] * std::max(losses[i] - c, 0.0);
        }
        best = std::min(best, c + excess / (alpha * total));
    }
    return best;
}

inline double cvar_threshold_set(const std::vector<double>& losses, double alpha) {
    const auto n = losses.size();
    const double raw = (1.0 - alpha) * static_cast<double>(n);
    const double snapped =
        std::abs(raw - std::round(raw)) < 1e-9 ? std::round(raw) : std::ceil(raw);
    const auto rank = static_cast<std::size_t>(snapped);  // 1-based order statistic
    double quantile = 0.0;
    for (double candidate : losses) {
        std::size_t at_most = 0;
        for (double l : losses) at_most += l <= candidate ? 1 : 0;
        std::size_t strictly_below = 0;
        for (double l : losses) strictly_below += l < candidate ? 1 : 0;
        if (strictly_below < rank && rank <= at_most) {
            quantile = candidate;
            break;
        }
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (double l : losses) {
        if (l >= quantile) {
            acc += l;
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace oracles
