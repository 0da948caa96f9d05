#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fren {

class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

double normal_cdf(double x);
double normal_quantile(double u);
double expit(double x);

/// Closed-form causal margins Y(x) with location (or rate) affine in x.
struct MarginLaw {
    enum class Family { Normal, Laplace, Exponential };

    Family family = Family::Normal;
    double intercept = 0.0;
    std::vector<double> slope;  // one entry per treatment coordinate
    double scale = 1.0;         // sd for Normal, b for Laplace; unused for Exponential

    static MarginLaw normal(double intercept, double slope, double sd);
    static MarginLaw laplace(double intercept, double slope, double b);
    static MarginLaw exponential(double intercept, double slope);

    std::size_t treatment_dim() const { return slope.size(); }
    /// Location for Normal/Laplace, rate for Exponential.
    double parameter(std::span<const double> x) const;
    /// Q_{Y(x)}(u); strictly increasing in u on (0, 1).
    double quantile(std::span<const double> x, double u) const;
    double cdf(std::span<const double> x, double y) const;
    double mean(std::span<const double> x) const;
    void validate() const;
    std::string describe() const;

    bool operator==(const MarginLaw&) const = default;
};

}  // namespace fren
