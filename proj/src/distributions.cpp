#include "fren/distributions.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace fren {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        if (u == 0.0) return -std::numeric_limits<double>::infinity();
        if (u == 1.0) return std::numeric_limits<double>::infinity();
        throw std::domain_error("normal_quantile: u outside [0, 1]");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), u);
}

double expit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

MarginLaw MarginLaw::normal(double intercept, double slope, double sd) {
    return {Family::Normal, intercept, {slope}, sd};
}

MarginLaw MarginLaw::laplace(double intercept, double slope, double b) {
    return {Family::Laplace, intercept, {slope}, b};
}

MarginLaw MarginLaw::exponential(double intercept, double slope) {
    return {Family::Exponential, intercept, {slope}, 1.0};
}

double MarginLaw::parameter(std::span<const double> x) const {
    if (x.size() != slope.size()) {
        throw std::invalid_argument("MarginLaw: treatment has " + std::to_string(x.size()) +
                                    " coordinates, law expects " + std::to_string(slope.size()));
    }
    double v = intercept;
    for (std::size_t k = 0; k < x.size(); ++k) v += slope[k] * x[k];
    return v;
}

double MarginLaw::quantile(std::span<const double> x, double u) const {
    const double p = parameter(x);
    switch (family) {
        case Family::Normal:
            return p + scale * normal_quantile(u);
        case Family::Laplace:
            return u < 0.5 ? p + scale * std::log(2.0 * u) : p - scale * std::log(2.0 * (1.0 - u));
        case Family::Exponential:
            if (p <= 0.0) throw SpecError("MarginLaw: non-positive exponential rate");
            return -std::log1p(-u) / p;
    }
    return 0.0;
}

double MarginLaw::cdf(std::span<const double> x, double y) const {
    const double p = parameter(x);
    switch (family) {
        case Family::Normal:
            return normal_cdf((y - p) / scale);
        case Family::Laplace:
            return y < p ? 0.5 * std::exp((y - p) / scale) : 1.0 - 0.5 * std::exp(-(y - p) / scale);
        case Family::Exponential:
            return y <= 0.0 ? 0.0 : -std::expm1(-p * y);
    }
    return 0.0;
}

double MarginLaw::mean(std::span<const double> x) const {
    const double p = parameter(x);
    return family == Family::Exponential ? 1.0 / p : p;
}

void MarginLaw::validate() const {
    if (slope.empty()) throw SpecError("MarginLaw: no treatment coordinates");
    if (family != Family::Exponential && !(scale > 0.0)) throw SpecError("MarginLaw: scale must be positive");
}

std::string MarginLaw::describe() const {
    std::ostringstream os;
    const char* name = family == Family::Normal ? "normal" : family == Family::Laplace ? "laplace" : "exponential";
    os << name << "(intercept=" << intercept << ", slope=[";
    for (std::size_t k = 0; k < slope.size(); ++k) os << (k ? "," : "") << slope[k];
    os << "], scale=" << scale << ")";
    return os.str();
}

}  // namespace fren
