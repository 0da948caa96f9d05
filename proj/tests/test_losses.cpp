#include <doctest.h>

#include "fren/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace fren;

namespace {

GeneratorNet passthrough(Role role, std::size_t cond, std::size_t noise) {
    GeneratorNet net = GeneratorNet::zeros(role, cond, noise, noise, 1, 2 * noise);
    for (std::size_t k = 0; k < noise; ++k) {
        net.weight(0)(cond + k, 2 * k) = 1.0;
        net.weight(0)(cond + k, 2 * k + 1) = -1.0;
        net.weight(1)(2 * k, k) = 1.0;
        net.weight(1)(2 * k + 1, k) = -1.0;
    }
    return net;
}

// f(x, eta) = a*x + eta for scalar x, built from relu pairs.
GeneratorNet linear_margin(double a) {
    GeneratorNet f = GeneratorNet::zeros(Role::MarginF, 1, 1, 1, 1, 4);
    f.weight(0)(0, 0) = 1;
    f.weight(0)(0, 1) = -1;
    f.weight(0)(1, 2) = 1;
    f.weight(0)(1, 3) = -1;
    f.weight(1)(0, 0) = a;
    f.weight(1)(1, 0) = -a;
    f.weight(1)(2, 0) = 1;
    f.weight(1)(3, 0) = -1;
    return f;
}

double value(Var v) { return v.value()(0, 0); }

struct MeanSe {
    double mean;
    double se;
};

MeanSe mean_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

TEST_CASE("energy_score hand enumerations") {
    const Matrix twin = Matrix::from_rows({{1.5, -2}, {1.5, -2}});
    const double u[] = {1.5, -2};
    CHECK(energy_score(twin, u) == 0.0);

    const Matrix s = Matrix::from_rows({{0}, {1}, {2}});
    const double zero[] = {0};
    CHECK(energy_score(s, zero) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));

    Matrix shifted = s;
    for (double& v : shifted.values()) v += 7.25;
    const double u_shift[] = {7.25};
    CHECK(energy_score(shifted, u_shift) == doctest::Approx(energy_score(s, zero)).epsilon(1e-14));

    CHECK_THROWS_AS(energy_score(Matrix::from_rows({{1}}), zero), DegenerateSampleError);
}

TEST_CASE("energy_distance hand enumerations") {
    const Matrix p = Matrix::from_rows({{0}, {2}});
    const Matrix q = Matrix::from_rows({{1}, {3}});
    CHECK(energy_distance(p, q) == doctest::Approx(-1.0));
    CHECK(energy_distance(p, p) == doctest::Approx(-2.0));
    CHECK_THROWS_AS(energy_distance(Matrix::from_rows({{0}}), q), DegenerateSampleError);
}

TEST_CASE("energy_distance of two samples from one law averages to zero") {
    Rng rng(21);
    std::vector<double> vals;
    for (int r = 0; r < 400; ++r) vals.push_back(energy_distance(rng.normal_matrix(30, 2), rng.normal_matrix(40, 2)));
    const auto ms = mean_se(vals);
    CHECK(std::abs(ms.mean) <= 3.0 * ms.se);
}

TEST_CASE("the correct predictive law scores higher") {
    Rng rng(22);
    double right = 0.0;
    double wrong = 0.0;
    for (int r = 0; r < 1000; ++r) {
        const double obs[] = {rng.normal()};
        const Matrix a = rng.normal_matrix(20, 1);
        Matrix b = rng.normal_matrix(20, 1);
        for (double& v : b.values()) v += 2.0;
        right += energy_score(a, obs);
        wrong += energy_score(b, obs);
    }
    CHECK(right > wrong);
}

TEST_CASE("loss_zx hand arithmetic") {
    const GeneratorNet g = passthrough(Role::PastG, 0, 1);
    Tape tape;
    const Matrix batch = Matrix::from_rows({{0}});
    CHECK(value(loss_zx(tape, g, batch, 2, Matrix::from_rows({{1}, {-1}}))) == doctest::Approx(0.0));

    GeneratorNet constant = GeneratorNet::zeros(Role::PastG, 0, 1, 1, 1, 2);
    constant.bias(1)(0, 0) = 0.75;
    Tape t2;
    CHECK(value(loss_zx(t2, constant, Matrix::from_rows({{0.75}}), 2, Matrix::from_rows({{0.3}, {-2}}))) == 0.0);

    Tape t3;
    CHECK_THROWS_AS(loss_zx(t3, passthrough(Role::AuxE, 0, 1), batch, 2, Matrix(2, 1)), ContractError);
}

TEST_CASE("loss_aux hand arithmetic") {
    const GeneratorNet e = passthrough(Role::AuxE, 1, 1);
    Tape tape;
    CHECK(value(loss_aux(tape, e, Matrix::from_rows({{4}}), Matrix::from_rows({{0}}), 2,
                         Matrix::from_rows({{1}, {-1}}))) == doctest::Approx(0.0));
}

TEST_CASE("loss_zx is unbiased for its population objective") {
    // With g the identity, the past loss is mean |eps - z| - E|eps - eps'|/2.
    // Population value at z: E|N(0,1) - z| - 1/sqrt(pi).
    const GeneratorNet g = passthrough(Role::PastG, 0, 1);
    const Matrix batch = Matrix::from_rows({{0.3}, {-1.2}, {2.0}});
    auto abs_mean = [](double z) {
        return 2.0 * std::exp(-z * z / 2.0) / std::sqrt(2.0 * M_PI) + z * (1.0 - 2.0 * normal_cdf(-z));
    };
    double truth = 0.0;
    for (std::size_t i = 0; i < 3; ++i) truth += abs_mean(batch(i, 0)) / 3.0;
    truth -= 1.0 / std::sqrt(M_PI);

    Rng rng(23);
    std::vector<double> vals;
    for (int r = 0; r < 1000; ++r) {
        Tape tape;
        vals.push_back(value(loss_zx(tape, g, batch, EnergyLossConfig{}, rng)));
    }
    const auto ms = mean_se(vals);
    CHECK(std::abs(ms.mean - truth) <= 3.0 * ms.se);
}

TEST_CASE("outcome loss at the optimum matches its Monte Carlo population value") {
    // h passes xi through and f(x, eta) = eta: outcome is N(0,1) regardless of (z, x).
    const GeneratorNet h = passthrough(Role::CopulaH, 2, 1);
    const Margin f = linear_margin(0.0);
    Rng data(24);
    const Matrix z = data.normal_matrix(64, 1);
    const Matrix x = data.normal_matrix(64, 1);
    const Matrix y = data.normal_matrix(64, 1);

    // Population: fit term averaged over the observed y plus the normality term,
    // whose value for a correct model is E|N-u| - E|N-N'|/2 averaged over u ~ N(0,1),
    // i.e. 2/sqrt(pi) - 1/sqrt(pi).
    auto abs_mean = [](double v) {
        return 2.0 * std::exp(-v * v / 2.0) / std::sqrt(2.0 * M_PI) + v * (1.0 - 2.0 * normal_cdf(-v));
    };
    double truth = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) truth += abs_mean(y(i, 0)) / y.rows();
    truth -= 1.0 / std::sqrt(M_PI);
    truth += 1.0 / std::sqrt(M_PI);

    Rng rng(25);
    std::vector<double> vals;
    for (int r = 0; r < 1000; ++r) {
        Tape tape;
        vals.push_back(value(loss_y_given_zx(tape, f, h, z, x, y, PermutationSource{}, false, {}, rng)));
    }
    const auto ms = mean_se(vals);
    CHECK(std::abs(ms.mean - truth) <= 3.0 * ms.se);
}

TEST_CASE("outcome loss on a constant margin and a single datum") {
    GeneratorNet f = GeneratorNet::zeros(Role::MarginF, 1, 1, 1, 1, 2);
    const GeneratorNet h = passthrough(Role::CopulaH, 2, 1);
    Tape tape;
    OutcomeNoise noise{Matrix::from_rows({{0.4}, {-0.3}}), Matrix::from_rows({{0.0}, {0.0}}),
                       Matrix::from_rows({{0.0}})};
    // Fit term: f is identically 0 against y = 0. Normality term: h' draws are both 0 against target 0.
    const Matrix one = Matrix::from_rows({{1.0}});
    const Matrix zero = Matrix::from_rows({{0.0}});
    const Var loss = outcome_energy_loss(tape, Margin{f}, h, one, hconcat(one, one), Matrix(2, 2), zero, 2, noise);
    CHECK(value(loss) == 0.0);
}

TEST_CASE("outcome loss source guards") {
    const GeneratorNet h = passthrough(Role::CopulaH, 2, 1);
    const Margin f = linear_margin(1.0);
    const Matrix col = Matrix::from_rows({{1}, {2}});
    Rng rng(26);
    Tape tape;
    CHECK_THROWS_AS(loss_y_given_zx(tape, f, h, col, col, col, std::monostate{}, false, {}, rng), ConfigurationError);
    CHECK_THROWS_AS(loss_y_given_zx(tape, f, h, col, col, col, PermutationSource{}, true, {}, rng),
                    ConfigurationError);
    const GeneratorNet e = passthrough(Role::AuxE, 1, 1);
    CHECK_NOTHROW(loss_y_given_zx(tape, f, h, col, col, col, AuxiliarySource{&e, {0}}, true, {}, rng));
}

TEST_CASE("swapping the two h noise draws leaves the loss law unchanged") {
    Rng init(27);
    const GeneratorNet h(Role::CopulaH, 2, 1, 1, 2, 8, init);
    const Margin f = GeneratorNet(Role::MarginF, 1, 1, 1, 2, 8, init);
    const Matrix z = init.normal_matrix(32, 1);
    const Matrix x = init.normal_matrix(32, 1);
    const Matrix y = init.normal_matrix(32, 1);
    const Matrix zprime = hconcat(repeat_rows(z, 2), repeat_rows(x, 2));
    Rng rng(28);
    std::vector<double> a;
    std::vector<double> b;
    for (int r = 0; r < 400; ++r) {
        OutcomeNoise n = OutcomeNoise::draw(32, 2, 1, rng);
        Tape t1;
        a.push_back(value(outcome_energy_loss(t1, f, h, x, hconcat(z, x), zprime, y, 2, n)));
        std::swap(n.xi, n.xi_prime);
        Tape t2;
        b.push_back(value(outcome_energy_loss(t2, f, h, x, hconcat(z, x), zprime, y, 2, n)));
    }
    const auto ma = mean_se(a);
    const auto mb = mean_se(b);
    CHECK(std::abs(ma.mean - mb.mean) <= 3.0 * std::hypot(ma.se, mb.se));
}

TEST_CASE("losses are invariant to the row order of the batch") {
    Rng init(29);
    const GeneratorNet g(Role::PastG, 0, 2, 2, 2, 8, init);
    const Matrix batch = init.normal_matrix(10, 2);
    const Matrix eps = init.normal_matrix(20, 2);
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    std::vector<std::size_t> eps_order;
    for (std::size_t i : order) {
        eps_order.push_back(2 * i);
        eps_order.push_back(2 * i + 1);
    }
    Tape t1;
    Tape t2;
    const double a = value(loss_zx(t1, g, batch, 2, eps));
    const double b = value(loss_zx(t2, g, gather_rows(batch, order), 2, gather_rows(eps, eps_order)));
    CHECK(a == doctest::Approx(b).epsilon(1e-13));
}

TEST_CASE("energy distance to the population shrinks with sample size") {
    Rng rng(30);
    const Matrix ref = rng.normal_matrix(4000, 3);
    double prev = 1e9;
    for (std::size_t n : {50, 400, 3200}) {
        double avg = 0.0;
        for (int r = 0; r < 5; ++r) avg += std::abs(energy_distance(rng.normal_matrix(n, 3), ref)) / 5.0;
        CHECK(avg < prev);
        prev = avg;
    }
}

TEST_CASE("m below two is rejected") {
    CHECK_THROWS_AS((EnergyLossConfig{1, 10}.validate()), DegenerateSampleError);
}
