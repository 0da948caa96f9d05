#include "fren/frengression.hpp"

#include <algorithm>
#include <cmath>

namespace fren {

namespace {

double bern(double p1, int v) { return v ? p1 : 1.0 - p1; }

std::array<double, 3> random_simplex(Rng& rng) {
    // Bounded away from zero so the table satisfies positivity.
    std::array<double, 3> w{};
    double total = 0.0;
    for (double& v : w) total += v = 0.2 + rng.uniform();
    for (double& v : w) v /= total;
    return w;
}

double open_unit(Rng& rng) { return 0.1 + 0.8 * rng.uniform(); }

}  // namespace

DiscreteScm DiscreteScm::random(Rng& rng) {
    DiscreteScm s;
    s.p_u = open_unit(rng);
    s.p_x0 = open_unit(rng);
    for (auto& by_u : s.p_z)
        for (auto& w : by_u) w = random_simplex(rng);
    for (auto& by_z : s.p_x1)
        for (double& p : by_z) p = open_unit(rng);
    for (auto& by_z : s.p_y)
        for (auto& by_x1 : by_z)
            for (auto& by_u : by_x1)
                for (double& p : by_u) p = open_unit(rng);
    return s;
}

DiscreteScm DiscreteScm::independent() {
    DiscreteScm s;
    s.p_u = 0.3;
    s.p_x0 = 0.4;
    for (auto& by_u : s.p_z)
        for (auto& w : by_u) w = {0.2, 0.5, 0.3};
    for (auto& by_z : s.p_x1) by_z = {0.6, 0.6, 0.6};
    for (auto& by_z : s.p_y)
        for (auto& by_x1 : by_z)
            for (auto& by_u : by_x1) by_u = {0.35, 0.35};
    return s;
}

IdentifiabilityReport check_identifiability_smallcase(const DiscreteScm& scm) {
    // Observational joint p(u, x0, z, x1, y).
    double joint[2][2][3][2][2] = {};
    for (int u = 0; u < 2; ++u)
        for (int x0 = 0; x0 < 2; ++x0)
            for (int z = 0; z < 3; ++z)
                for (int x1 = 0; x1 < 2; ++x1)
                    for (int y = 0; y < 2; ++y)
                        joint[u][x0][z][x1][y] = bern(scm.p_u, u) * bern(scm.p_x0, x0) * scm.p_z[x0][u][z] *
                                                 bern(scm.p_x1[x0][z], x1) * bern(scm.p_y[x0][z][x1][u], y);

    // Observed margins with U summed out.
    double p_x0zx1y[2][3][2][2] = {};
    for (int u = 0; u < 2; ++u)
        for (int x0 = 0; x0 < 2; ++x0)
            for (int z = 0; z < 3; ++z)
                for (int x1 = 0; x1 < 2; ++x1)
                    for (int y = 0; y < 2; ++y) p_x0zx1y[x0][z][x1][y] += joint[u][x0][z][x1][y];

    IdentifiabilityReport r;
    for (int x0 = 0; x0 < 2; ++x0) {
        double p_x0 = 0.0;
        double p_x0z[3] = {};
        for (int z = 0; z < 3; ++z)
            for (int x1 = 0; x1 < 2; ++x1)
                for (int y = 0; y < 2; ++y) p_x0z[z] += p_x0zx1y[x0][z][x1][y];
        for (double v : p_x0z) p_x0 += v;
        for (int z = 0; z < 3; ++z) {
            for (int x1 = 0; x1 < 2; ++x1) {
                const double cell = p_x0zx1y[x0][z][x1][0] + p_x0zx1y[x0][z][x1][1];
                if (!(cell > 0.0)) {
                    throw ContractError("positivity fails at x0=" + std::to_string(x0) + ", z=" + std::to_string(z) +
                                        ", x1=" + std::to_string(x1));
                }
            }
        }
        for (int x1 = 0; x1 < 2; ++x1) {
            // Structural: set X0 and X1, keep U and Z's mechanism.
            double direct = 0.0;
            for (int u = 0; u < 2; ++u)
                for (int z = 0; z < 3; ++z) direct += bern(scm.p_u, u) * scm.p_z[x0][u][z] * scm.p_y[x0][z][x1][u];
            // Observational adjustment sum_z p(y | x0, z, x1) p(z | x0).
            double adjusted = 0.0;
            for (int z = 0; z < 3; ++z) {
                const double cell = p_x0zx1y[x0][z][x1][0] + p_x0zx1y[x0][z][x1][1];
                adjusted += p_x0zx1y[x0][z][x1][1] / cell * (p_x0z[z] / p_x0);
            }
            r.direct[x0][x1] = direct;
            r.adjusted[x0][x1] = adjusted;
            r.max_discrepancy = std::max(r.max_discrepancy, std::abs(direct - adjusted));
        }
    }
    return r;
}

IdentifiabilityReport check_identifiability_smallcase() {
    Rng rng(20240601);
    return check_identifiability_smallcase(DiscreteScm::random(rng));
}

}  // namespace fren
