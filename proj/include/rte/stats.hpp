#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace rte {

/// Quantile by linear interpolation between order statistics (the common
/// "type 7" rule). p in [0, 1].
inline double percentile(std::span<const double> sample, double p) {
    if (sample.empty())
        throw std::invalid_argument("percentile: empty sample");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size())
        return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double median(std::span<const double> sample) { return percentile(sample, 0.5); }

/// Midranks of a sample: ties share the average of the ranks they span
/// (1-based).
inline std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]])
            ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

struct MannWhitneyResult {
    double u_a{0.0};          // U statistic of the first sample
    double p_two_sided{1.0};
    bool exact{false};        // exact enumeration vs normal approximation
};

namespace detail {

/// Null distribution of the U statistic for group sizes (n, m) without
/// ties: counts[u] = number of orderings with that U, via the recurrence
/// f(n, m, u) = f(n-1, m, u-m) + f(n, m-1, u) (largest pooled value comes
/// from the first or the second group).
inline std::vector<double> u_null_counts(int n, int m) {
    // cur[i][u] holds f(i, j, u) for the current j.
    std::vector<std::vector<double>> cur(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        cur[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i) * m + 1, 0.0);
    // j = 0: U must be i*0 = 0.
    for (int i = 0; i <= n; ++i)
        cur[static_cast<std::size_t>(i)][0] = 1.0;
    for (int j = 1; j <= m; ++j) {
        std::vector<std::vector<double>> next(static_cast<std::size_t>(n) + 1);
        for (int i = 0; i <= n; ++i) {
            next[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i) * m + 1, 0.0);
            const int max_u = i * j;
            for (int u = 0; u <= max_u; ++u) {
                double v = cur[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)]; // f(i, j-1, u)
                if (i >= 1 && u >= j)
                    v += next[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(u) - j];
                next[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)] = v;
            }
        }
        cur = std::move(next);
    }
    return cur[static_cast<std::size_t>(n)];
}

inline bool has_ties(std::span<const double> a, std::span<const double> b) {
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    return std::adjacent_find(all.begin(), all.end()) != all.end();
}

} // namespace detail

/// Rank-sum test. Exact enumeration of the U null distribution when the
/// smaller sample has at most 8 values and there are no ties; otherwise the
/// normal approximation with tie and continuity corrections.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("mann_whitney_u: empty sample");
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());

    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    const std::vector<double> ranks = midranks(all);
    double rank_sum_a = 0.0;
    for (int i = 0; i < n; ++i)
        rank_sum_a += ranks[static_cast<std::size_t>(i)];
    const double u_a = rank_sum_a - 0.5 * n * (n + 1);

    MannWhitneyResult result;
    result.u_a = u_a;

    if (std::min(n, m) <= 8 && !detail::has_ties(a, b)) {
        const std::vector<double> counts =
            n <= m ? detail::u_null_counts(n, m) : detail::u_null_counts(m, n);
        // U_a and U_b = nm - U_a have the same null distribution.
        const double u = n <= m ? u_a : static_cast<double>(n) * m - u_a;
        double total = 0.0;
        double below = 0.0;
        double above = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            total += counts[k];
            if (static_cast<double>(k) <= u)
                below += counts[k];
            if (static_cast<double>(k) >= u)
                above += counts[k];
        }
        result.exact = true;
        result.p_two_sided = std::min(1.0, 2.0 * std::min(below, above) / total);
        return result;
    }

    const double big_n = static_cast<double>(n + m);
    const double mu = 0.5 * static_cast<double>(n) * m;
    // Tie correction over groups of equal values in the pooled sample.
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i])
            ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double var = static_cast<double>(n) * m / 12.0 *
                       ((big_n * big_n * big_n - big_n - tie_term) / (big_n * (big_n - 1.0)));
    if (var <= 0.0) {
        result.p_two_sided = 1.0;
        return result;
    }
    const double z = std::max(0.0, std::abs(u_a - mu) - 0.5) / std::sqrt(var);
    result.p_two_sided = std::min(1.0, std::erfc(z / std::numbers::sqrt2));
    return result;
}

/// Spearman rank correlation with midranks for ties.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman_rho: need two equal-length samples of size >= 2");
    const std::vector<double> rx = midranks(x);
    const std::vector<double> ry = midranks(y);
    const double n = static_cast<double>(x.size());
    double mean = (n + 1.0) / 2.0;
    double num = 0.0;
    double den_x = 0.0;
    double den_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (rx[i] - mean) * (ry[i] - mean);
        den_x += (rx[i] - mean) * (rx[i] - mean);
        den_y += (ry[i] - mean) * (ry[i] - mean);
    }
    if (den_x == 0.0 || den_y == 0.0)
        return 0.0;
    return num / std::sqrt(den_x * den_y);
}

/// Percentage of the intact robot's performance a method recovers
/// (episode medians; lower episodes means more recovered).
inline double recovered_capabilities(double intact_median, double method_median) {
    if (intact_median <= 0.0 || method_median <= 0.0)
        throw std::invalid_argument("recovered_capabilities: medians must be positive");
    return 100.0 * intact_median / method_median;
}

/// Significance stars at the 0.05 / 0.01 / 0.001 / 0.0001 thresholds.
inline int significance_stars(double p) {
    int stars = 0;
    for (double threshold : {0.05, 0.01, 0.001, 0.0001})
        if (p < threshold)
            ++stars;
    return stars;
}

} // namespace rte
