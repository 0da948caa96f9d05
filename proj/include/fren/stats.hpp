#pragma once

// Summary statistics and two-sample tests used by estimators, tests and the
// benchmark harness.

#include "fren/ndiff.hpp"
#include "fren/rng.hpp"

#include <functional>
#include <span>
#include <vector>

namespace fren {

double sample_mean(std::span<const double> v);
double sample_sd(std::span<const double> v);  // n - 1 denominator
double pearson(std::span<const double> a, std::span<const double> b);

/// Linear interpolation between order statistics (type 7). 0 <= alpha <= 1.
double empirical_quantile(std::vector<double> v, double alpha);
double empirical_median(std::vector<double> v);

std::vector<double> column_values(const Matrix& m, std::size_t col);

/// sup_y |F_n(y) - F(y)| against a continuous CDF.
double ks_distance(std::vector<double> v, const std::function<double(double)>& cdf);

/// sup_y |F_a(y) - F_b(y)|.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// W1 between two empirical laws on the line.
double wasserstein1(std::vector<double> a, std::vector<double> b);

struct PermutationTestResult {
    double statistic = 0.0;  // unbiased energy distance
    double p_value = 1.0;
    bool rejected(double level = 0.05) const { return p_value < level; }
};

/// Energy-distance two-sample permutation test. Rows are observations.
PermutationTestResult energy_permutation_test(const Matrix& a, const Matrix& b, std::size_t permutations, Rng& rng);

}  // namespace fren
