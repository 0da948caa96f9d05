#include "fren/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fren {

double sample_mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("sample_mean: empty input");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) throw std::invalid_argument("sample_sd: need two values");
    const double m = sample_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: need equal lengths >= 2");
    const double ma = sample_mean(a);
    const double mb = sample_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

double empirical_quantile(std::vector<double> v, double alpha) {
    if (v.empty()) throw std::invalid_argument("empirical_quantile: empty input");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::domain_error("empirical_quantile: alpha outside [0, 1]");
    std::sort(v.begin(), v.end());
    const double pos = alpha * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double empirical_median(std::vector<double> v) { return empirical_quantile(std::move(v), 0.5); }

std::vector<double> column_values(const Matrix& m, std::size_t col) {
    if (col >= m.cols()) throw DimensionError("column_values: column out of range");
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, col);
    return out;
}

double ks_distance(std::vector<double> v, const std::function<double(double)>& cdf) {
    if (v.empty()) throw std::invalid_argument("ks_distance: empty input");
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = cdf(v[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Integrate |F_a - F_b| over the merged breakpoints.
    std::vector<double> pts(a);
    pts.insert(pts.end(), b.begin(), b.end());
    std::sort(pts.begin(), pts.end());
    double w = 0.0;
    std::size_t i = 0, j = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        while (i < a.size() && a[i] <= pts[k]) ++i;
        while (j < b.size() && b[j] <= pts[k]) ++j;
        const double fa = static_cast<double>(i) / a.size();
        const double fb = static_cast<double>(j) / b.size();
        w += std::abs(fa - fb) * (pts[k + 1] - pts[k]);
    }
    return w;
}

PermutationTestResult energy_permutation_test(const Matrix& a, const Matrix& b, std::size_t permutations, Rng& rng) {
    if (a.rows() < 2 || b.rows() < 2) throw std::invalid_argument("permutation test: need two rows per sample");
    if (a.cols() != b.cols()) throw DimensionError("permutation test: sample widths differ");
    const std::size_t na = a.rows();
    const std::size_t n = na + b.rows();
    const Matrix pooled = [&] {
        Matrix p(n, a.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = i < na ? a.row(i) : b.row(i - na);
            std::copy(src.begin(), src.end(), p.row(i).begin());
        }
        return p;
    }();
    std::vector<float> dist(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        dist[i * n + i] = 0.0f;
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < pooled.cols(); ++k) {
                const double d = pooled(i, k) - pooled(j, k);
                s += d * d;
            }
            dist[i * n + j] = dist[j * n + i] = static_cast<float>(std::sqrt(s));
        }
    }
    // The statistic depends only on which pooled rows land in the first group.
    std::vector<char> in_a(n);
    auto statistic = [&](const std::vector<std::size_t>& order) {
        std::fill(in_a.begin(), in_a.end(), 0);
        for (std::size_t k = 0; k < na; ++k) in_a[order[k]] = 1;
        double within_a = 0.0, within_b = 0.0, cross = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* row = &dist[i * n];
            double sa = 0.0, sb = 0.0;
            for (std::size_t j = 0; j < n; ++j) (in_a[j] ? sa : sb) += row[j];
            if (in_a[i]) {
                within_a += sa;
                cross += sb;
            } else {
                within_b += sb;
            }
        }
        const double ma = static_cast<double>(na);
        const double mb = static_cast<double>(n - na);
        return 2.0 * cross / (ma * mb) - within_a / (ma * (ma - 1.0)) - within_b / (mb * (mb - 1.0));
    };
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    PermutationTestResult res;
    res.statistic = statistic(order);
    std::size_t at_least = 1;
    for (std::size_t r = 0; r < permutations; ++r) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        if (statistic(order) >= res.statistic) ++at_least;
    }
    res.p_value = static_cast<double>(at_least) / static_cast<double>(permutations + 1);
    return res;
}

}  // namespace fren
