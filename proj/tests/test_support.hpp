#pragma once

#include "fren/nets.hpp"

#include <cmath>
#include <vector>

namespace fren::testing {

// out = input * a + b, realized with one hidden layer as relu(v) - relu(-v).
// a is [(cond + noise) x out].
inline GeneratorNet linear_net(Role role, std::size_t cond, std::size_t noise, const Matrix& a,
                               const std::vector<double>& b) {
    const std::size_t out = a.cols();
    GeneratorNet net = GeneratorNet::zeros(role, cond, noise, out, 1, 2 * out);
    for (std::size_t j = 0; j < out; ++j) {
        for (std::size_t k = 0; k < a.rows(); ++k) {
            net.weight(0)(k, 2 * j) = a(k, j);
            net.weight(0)(k, 2 * j + 1) = -a(k, j);
        }
        net.bias(0)(0, 2 * j) = b.at(j);
        net.bias(0)(0, 2 * j + 1) = -b.at(j);
        net.weight(1)(2 * j, j) = 1.0;
        net.weight(1)(2 * j + 1, j) = -1.0;
    }
    return net;
}

inline GeneratorNet identity_net(Role role, std::size_t cond, std::size_t noise) {
    const std::size_t d = cond + noise;
    Matrix a(d, d);
    for (std::size_t k = 0; k < d; ++k) a(k, k) = 1.0;
    return linear_net(role, cond, noise, a, std::vector<double>(d, 0.0));
}

// Mean distance between consecutive row pairs; a scale for energy distances.
inline double mean_pair_distance(const Matrix& a) {
    double s = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i + 1 < a.rows(); i += 2, ++k) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) d2 += std::pow(a(i, c) - a(i + 1, c), 2);
        s += std::sqrt(d2);
    }
    return s / static_cast<double>(k);
}

}  // namespace fren::testing
