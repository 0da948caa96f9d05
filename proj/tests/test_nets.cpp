#include <doctest.h>

#include "fren/nets.hpp"
#include "fren/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace fren;

namespace {

// One hidden layer of width 2*d computing relu(v) - relu(-v) = v coordinatewise.
GeneratorNet identity_net(Role role, std::size_t cond, std::size_t noise) {
    const std::size_t d = cond + noise;
    GeneratorNet net = GeneratorNet::zeros(role, cond, noise, d, 1, 2 * d);
    for (std::size_t k = 0; k < d; ++k) {
        net.weight(0)(k, 2 * k) = 1.0;
        net.weight(0)(k, 2 * k + 1) = -1.0;
        net.weight(1)(2 * k, k) = 1.0;
        net.weight(1)(2 * k + 1, k) = -1.0;
    }
    return net;
}

// Passes the last `out` input columns through, ignoring the rest.
GeneratorNet tail_passthrough(Role role, std::size_t cond, std::size_t noise) {
    const std::size_t d = cond + noise;
    GeneratorNet net = GeneratorNet::zeros(role, cond, noise, noise, 1, 2 * noise);
    for (std::size_t k = 0; k < noise; ++k) {
        net.weight(0)(cond + k, 2 * k) = 1.0;
        net.weight(0)(cond + k, 2 * k + 1) = -1.0;
        net.weight(1)(2 * k, k) = 1.0;
        net.weight(1)(2 * k + 1, k) = -1.0;
    }
    (void)d;
    return net;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("default architecture is three hidden layers of width one hundred") {
    Rng rng(1);
    GeneratorNet net(Role::PastG, 0, 4, 4, 3, 100, rng);
    CHECK(net.layer_count() == 4);
    CHECK(net.weight(0).rows() == 4);
    CHECK(net.weight(0).cols() == 100);
    CHECK(net.weight(1).rows() == 100);
    CHECK(net.weight(3).cols() == 4);
    CHECK(MlpSpec{}.hidden_layers == 3);
    CHECK(MlpSpec{}.hidden_width == 100);
}

TEST_CASE("glorot init stays inside its bound and biases start at zero") {
    Rng rng(2);
    GeneratorNet net(Role::MarginF, 3, 1, 1, 2, 50, rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const Matrix& w = net.weight(l);
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (double v : w.values()) CHECK(std::abs(v) <= bound);
        CHECK(net.bias(l) == Matrix(1, w.cols()));
    }
}

TEST_CASE("MlpSpec rejects empty dims") {
    CHECK_THROWS_AS((MlpSpec{0, 1, 1, 1}.validate()), DimensionError);
    CHECK_THROWS_AS((MlpSpec{1, 1, 0, 1}.validate()), DimensionError);
    CHECK_NOTHROW((MlpSpec{1, 1, 1, 1}.validate()));
}

TEST_CASE("forward_g identity, constant and role guard") {
    const GeneratorNet g = identity_net(Role::PastG, 0, 2);
    CHECK(forward_g(g, Matrix::from_rows({{0.5, -0.2}})) == Matrix::from_rows({{0.5, -0.2}}));

    GeneratorNet c = GeneratorNet::zeros(Role::PastG, 0, 2, 2, 2, 5);
    c.bias(2)(0, 0) = 1.5;
    c.bias(2)(0, 1) = -3.0;
    Rng rng(3);
    const Matrix out = forward_g(c, rng.normal_matrix(7, 2));
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(out(i, 0) == 1.5);
        CHECK(out(i, 1) == -3.0);
    }
    const GeneratorNet wrong = identity_net(Role::CopulaH, 0, 2);
    CHECK_THROWS_AS(forward_g(wrong, Matrix(1, 2)), ContractError);
    CHECK_THROWS_AS(forward_g(g, Matrix(1, 3)), DimensionError);
}

TEST_CASE("forward_g sample mean agrees with an independent Monte Carlo run") {
    Rng init(4);
    const GeneratorNet g(Role::PastG, 0, 2, 2, 2, 16, init);
    Rng a(5);
    Rng b(6);
    const std::size_t n = 10000;
    const Matrix s1 = forward_g(g, a.normal_matrix(n, 2));
    const Matrix s2 = forward_g(g, b.normal_matrix(200000, 2));
    for (std::size_t k = 0; k < 2; ++k) {
        double m1 = 0, m2 = 0, v2 = 0;
        for (std::size_t i = 0; i < n; ++i) m1 += s1(i, k) / n;
        for (std::size_t i = 0; i < s2.rows(); ++i) m2 += s2(i, k) / s2.rows();
        for (std::size_t i = 0; i < s2.rows(); ++i) v2 += (s2(i, k) - m2) * (s2(i, k) - m2) / s2.rows();
        CHECK(std::abs(m1 - m2) <= 5.0 * std::sqrt(v2 / n));
    }
}

TEST_CASE("forward_f on a hand-built linear margin") {
    // f(x, eta) = 2x + eta through relu(.) - relu(-.) on each input.
    GeneratorNet f = GeneratorNet::zeros(Role::MarginF, 1, 1, 1, 1, 4);
    f.weight(0)(0, 0) = 1;
    f.weight(0)(0, 1) = -1;
    f.weight(0)(1, 2) = 1;
    f.weight(0)(1, 3) = -1;
    f.weight(1)(0, 0) = 2;
    f.weight(1)(1, 0) = -2;
    f.weight(1)(2, 0) = 1;
    f.weight(1)(3, 0) = -1;
    const Margin m = f;
    CHECK(forward_f(m, Matrix::from_rows({{1}}), Matrix::from_rows({{0}}))(0, 0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(forward_f(m, Matrix(2, 1), Matrix(3, 1)), DimensionError);
}

TEST_CASE("pre-ANM path with identity parts is x + eta") {
    PreAnmMargin pre(identity_net(Role::MarginF, 1, 0), identity_net(Role::MarginF, 0, 1));
    const Margin m = pre;
    CHECK(forward_f(m, Matrix::from_rows({{3}}), Matrix::from_rows({{-1}}))(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("pre-ANM evaluation equals composing its parts") {
    Rng rng(8);
    PreAnmMargin pre(2, 12, rng);
    const Matrix x = rng.normal_matrix(50, 1);
    const Matrix eta = rng.normal_matrix(50, 1);
    Matrix inner = pre.noise.evaluate(eta);
    for (std::size_t i = 0; i < 50; ++i) inner(i, 0) = x(i, 0) + inner(i, 0);
    const Matrix expected = pre.outer.evaluate(inner);
    CHECK(pre.evaluate(x, eta) == expected);

    Tape tape;
    const Matrix taped = pre.forward(tape, tape.constant(x), tape.constant(eta)).value();
    CHECK(taped == expected);
}

TEST_CASE("forward_f medians are stable across seeds") {
    Rng init(9);
    const Margin f = GeneratorNet(Role::MarginF, 1, 1, 1, 2, 16, init);
    const std::size_t n = 100000;
    const Matrix x(n, 1, 0.5);
    std::vector<double> medians;
    for (std::uint64_t seed : {10, 11, 12}) {
        Rng r(seed);
        const Matrix y = forward_f(f, x, r.normal_matrix(n, 1));
        medians.push_back(median({y.values().begin(), y.values().end()}));
    }
    CHECK(std::abs(medians[0] - medians[1]) <= 0.02);
    CHECK(std::abs(medians[0] - medians[2]) <= 0.02);
}

TEST_CASE("forward_h and forward_e pass-through and constants") {
    const GeneratorNet h = tail_passthrough(Role::CopulaH, 3, 1);
    Rng rng(12);
    const Matrix z = rng.normal_matrix(5, 2);
    const Matrix x = rng.normal_matrix(5, 1);
    const Matrix xi = rng.normal_matrix(5, 1);
    CHECK(forward_h(h, z, x, xi) == xi);
    CHECK_THROWS_AS(forward_h(h, z, x, Matrix(4, 1)), DimensionError);
    CHECK_THROWS_AS(forward_h(h, Matrix(5, 1), x, xi), DimensionError);

    const GeneratorNet e = tail_passthrough(Role::AuxE, 1, 2);
    const Matrix zeta = rng.normal_matrix(5, 2);
    CHECK(forward_e(e, x, zeta) == zeta);

    GeneratorNet hz = GeneratorNet::zeros(Role::CopulaH, 3, 1, 1, 1, 3);
    hz.bias(1)(0, 0) = 0.25;
    CHECK(forward_h(hz, z, x, xi) == Matrix(5, 1, 0.25));
    GeneratorNet ez = GeneratorNet::zeros(Role::AuxE, 1, 2, 2, 1, 3);
    CHECK(forward_e(ez, x, zeta) == Matrix(5, 2));
    CHECK_THROWS_AS(forward_e(h, x, zeta), ContractError);
}

TEST_CASE("net serialization round trips bit for bit") {
    Rng rng(13);
    const GeneratorNet net(Role::CopulaH, 4, 1, 1, 3, 20, rng);
    std::stringstream ss;
    net.write(ss);
    CHECK(GeneratorNet::read(ss) == net);

    std::stringstream truncated(ss.str().substr(0, 30));
    net.write(ss);
    CHECK_THROWS_AS(GeneratorNet::read(truncated), binio::FormatError);

    const Margin margins[] = {net, PreAnmMargin(2, 5, rng), ClosedFormMargin{MarginLaw::laplace(0, 2, 0.5)}};
    for (const Margin& m : margins) {
        std::stringstream s;
        write_margin(s, m);
        CHECK(read_margin(s) == m);
    }
}

TEST_CASE("closed-form margin maps eta through the quantile function") {
    const ClosedFormMargin cf{MarginLaw::normal(0, 2, 1)};
    const Matrix y = forward_f(Margin{cf}, Matrix::from_rows({{1}, {0}}), Matrix::from_rows({{0}, {1.5}}));
    CHECK(y(0, 0) == doctest::Approx(2.0));
    CHECK(y(1, 0) == doctest::Approx(1.5));
}

TEST_CASE("monotonicity probe and penalty") {
    PreAnmMargin id(identity_net(Role::MarginF, 1, 0), identity_net(Role::MarginF, 0, 1));
    const auto report = probe_monotonicity(id);
    CHECK(report.violations_outer == 0);
    CHECK(report.violations_noise == 0);
    CHECK(report.min_slope_outer == doctest::Approx(1.0));
    Tape t1;
    CHECK(monotonicity_penalty(t1, id, 1.0).value()(0, 0) == 0.0);

    // Negating the outer map gives slope -1 on every one of the 100 steps.
    PreAnmMargin flipped = id;
    flipped.outer.weight(1).eigen() *= -1.0;
    const auto bad = probe_monotonicity(flipped);
    CHECK(bad.violations_outer == 100);
    Tape t2;
    CHECK(monotonicity_penalty(t2, flipped, 1.0).value()(0, 0) == doctest::Approx(100.0));
}
