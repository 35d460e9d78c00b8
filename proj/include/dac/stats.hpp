#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace dac {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Sample standard deviation (N-1 denominator); 0 for a single element.
inline double sample_stddev(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("sample_stddev: empty input");
    if (xs.size() == 1) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Quantile with linear interpolation between order statistics (the common
/// "type 7" rule): h = (m-1)p, result = x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
inline double quantile_type7(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("quantile_type7: empty input");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile_type7: p out of [0,1]");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = h - static_cast<double>(lo);
    return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("incomplete_beta: a,b must be positive");
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x out of [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::betacf(a, b, x) / a;
    }
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

/// Regularized lower incomplete gamma P(a, x), via series (x < a+1) or the
/// continued fraction of the upper tail.
inline double incomplete_gamma_p(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("incomplete_gamma_p: a must be positive");
    if (x < 0.0) throw std::invalid_argument("incomplete_gamma_p: x must be non-negative");
    if (x == 0.0) return 0.0;
    const double lga = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 3e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lga);
    }
    constexpr double kFpMin = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / kFpMin, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = b + an / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 3e-16) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - lga) * h;
}

inline double chi2_cdf(double x, int df) { return incomplete_gamma_p(df / 2.0, x / 2.0); }

/// Inverse chi-square CDF by bisection.
inline double chi2_quantile(double p, int df) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("chi2_quantile: p out of (0,1)");
    double lo = 0.0, hi = static_cast<double>(df) + 1.0;
    while (chi2_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (chi2_cdf(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Two-sided p-value of a Student t statistic.
inline double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct PairedTTest {
    double t = 0.0;
    double df = 0.0;
    double p_two_sided = 1.0;
    double mean_diff = 0.0;
};

/// Paired t-test on equally long samples. Degenerate zero-variance
/// differences give p = 1 when the mean difference is zero, else p = 0.
inline PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: size mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    PairedTTest r;
    r.mean_diff = mean(diff);
    r.df = static_cast<double>(a.size() - 1);
    const double sd = sample_stddev(diff);
    if (sd == 0.0) {
        r.t = r.mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_two_sided = r.mean_diff == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t = r.mean_diff / (sd / std::sqrt(static_cast<double>(a.size())));
    r.p_two_sided = student_t_two_sided_p(r.t, r.df);
    return r;
}

struct ChiSquareGof {
    double statistic = 0.0;
    int df = 0;
    double critical_1pct = 0.0;
    bool pass_1pct = false;
};

/// Pearson chi-square goodness of fit. Bins with expected count below
/// `min_expected` are merged into their left neighbour from the right end.
inline ChiSquareGof chi_square_gof(std::vector<double> observed, std::vector<double> expected,
                                   double min_expected = 5.0) {
    if (observed.size() != expected.size() || observed.empty())
        throw std::invalid_argument("chi_square_gof: size mismatch or empty");
    while (expected.size() > 1 && expected.back() < min_expected) {
        expected[expected.size() - 2] += expected.back();
        observed[observed.size() - 2] += observed.back();
        expected.pop_back();
        observed.pop_back();
    }
    ChiSquareGof r;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = observed[i] - expected[i];
        r.statistic += d * d / expected[i];
    }
    r.df = static_cast<int>(observed.size()) - 1;
    if (r.df < 1) throw std::invalid_argument("chi_square_gof: fewer than 2 usable bins");
    r.critical_1pct = chi2_quantile(0.99, r.df);
    r.pass_1pct = r.statistic < r.critical_1pct;
    return r;
}

} // namespace dac
