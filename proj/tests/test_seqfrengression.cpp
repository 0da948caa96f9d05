#include <doctest.h>

#include "fren/binary_io.hpp"
#include "fren/csv.hpp"
#include "fren/frugalsim.hpp"
#include "fren/losses.hpp"
#include "fren/seqfrengression.hpp"
#include "fren/stats.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace fren;
using fren::testing::linear_net;
using fren::testing::mean_pair_distance;

namespace {

SeqSchema continuous_schema() {
    const std::vector<ColumnKind> one{ColumnKind::Continuous};
    return {one, one, one, one};
}

FitConfig small_config(std::size_t epochs, std::uint64_t seed) {
    FitConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = seed;
    return cfg;
}

// Setting 4 written as linear generators, in data units.
SeqModel true_setting4(std::size_t horizon) {
    Rng init(1);
    FitConfig cfg;
    cfg.hidden_layers = 1;
    cfg.hidden_width = 2;
    SeqModel model = make_seq_model(SeqKind::Seq, continuous_schema(), horizon, cfg, init);
    model.g_c = linear_net(Role::BaselineGc, 0, 1, Matrix(1, 1, 1.0), {0.0});
    const double r = std::sqrt(0.5);
    const double rho = 0.24;
    for (std::size_t t = 0; t < horizon; ++t) {
        SeqStep& step = model.steps[t];
        const std::size_t ti = t;
        // g_t: rows c, z_0..z_{t-1}, x_0..x_{t-1}, eps_z, eps_x.
        Matrix ag(1 + 2 * ti + 2, 2);
        ag(0, 0) = 0.5;
        if (t > 0) {
            ag(1 + (ti - 1), 0) = 0.5;
            ag(1 + ti + (ti - 1), 0) = 0.5;
        }
        ag(1 + 2 * ti, 0) = r;
        for (std::size_t k = 0; k < ag.rows(); ++k) ag(k, 1) = 2.0 * ag(k, 0);
        ag(0, 1) += 0.1;
        ag(2 + 2 * ti, 1) = 1.0;
        step.g = linear_net(Role::PastG, 1 + 2 * ti, 2, ag, {-0.5, -1.0});

        // f_t: rows c, x_0..x_t, eta.
        Matrix af(ti + 3, 1);
        af(0, 0) = 1.0;
        af(1 + ti, 0) = 2.0;
        if (t >= 1) af(ti, 0) = 1.0;
        if (t >= 2) af(ti - 1, 0) = 0.5;
        af(ti + 2, 0) = 1.0;
        step.f = linear_net(Role::MarginF, ti + 2, 1, af, {0.0});

        // h_t: rows c, z_0..z_t, x_0..x_t, xi. The score is rho times the
        // standardized innovation of Z_t plus independent noise.
        Matrix ah(2 * ti + 4, 1);
        const double w = rho / r;
        ah(1 + ti, 0) = w;
        ah(0, 0) = -0.5 * w;
        if (t > 0) {
            ah(ti, 0) = -0.5 * w;
            ah(1 + (ti + 1) + (ti - 1), 0) = -0.5 * w;
        }
        ah(2 * ti + 3, 0) = std::sqrt(1.0 - rho * rho);
        step.h = linear_net(Role::CopulaH, 2 * ti + 3, 1, ah, {0.5 * w});
    }
    model.validate();
    return model;
}

Matrix step_block(const TrajectoryBatch& b, std::size_t t) {
    const Matrix* parts[] = {&b.c, &b.z[t], &b.x[t], &b.y[t]};
    return hconcat(parts);
}

Matrix flatten(const TrajectoryBatch& b) {
    std::vector<const Matrix*> parts{&b.c};
    for (std::size_t t = 0; t < b.horizon(); ++t) {
        parts.push_back(&b.z[t]);
        parts.push_back(&b.x[t]);
        parts.push_back(&b.y[t]);
    }
    return hconcat(std::span<const Matrix* const>(parts));
}

const TrajectoryBatch& setting1_data() {
    static const TrajectoryBatch data = [] {
        Rng rng(101);
        return make_longitudinal(1, 5).simulate(3000, rng);
    }();
    return data;
}

const SeqModel& setting1_model() {
    static const SeqModel model = fit_seq(setting1_data(), small_config(300, 11));
    return model;
}

const TrajectoryBatch& setting4_data() {
    static const TrajectoryBatch data = [] {
        Rng rng(202);
        return make_longitudinal(4, 3).simulate(3000, rng);
    }();
    return data;
}

const SeqModel& setting4_model() {
    static const SeqModel model = fit_seq(setting4_data(), small_config(300, 12));
    return model;
}

}  // namespace

TEST_CASE("kaplan_meier product-limit estimate") {
    using T = std::optional<std::size_t>;
    SUBCASE("all censored") {
        const auto s = kaplan_meier(std::vector<T>(5, std::nullopt), 4);
        REQUIRE(s.size() == 5);
        for (double v : s) CHECK(v == 1.0);
    }
    SUBCASE("two events, two censored") {
        const auto s = kaplan_meier({T{1}, T{2}, std::nullopt, std::nullopt}, 3);
        CHECK(s[0] == 1.0);
        CHECK(s[1] == doctest::Approx(0.75));
        CHECK(s[2] == doctest::Approx(0.5));
        CHECK(s[3] == doctest::Approx(0.5));
    }
    SUBCASE("everyone fails at the first step") {
        const auto s = kaplan_meier(std::vector<T>(3, T{1}), 3);
        CHECK(s[1] == 0.0);
        CHECK(s[3] == 0.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(kaplan_meier(std::vector<T>{}, 3), std::invalid_argument);
        CHECK_THROWS_AS(kaplan_meier({T{4}}, 3), std::invalid_argument);
        CHECK_THROWS_AS(kaplan_meier({T{0}}, 3), std::invalid_argument);
    }
    SUBCASE("nonincreasing on simulated survival data") {
        Rng rng(3);
        const auto b = make_longitudinal(2, 6).simulate(500, rng);
        const auto s = kaplan_meier(b);
        CHECK(s.front() == 1.0);
        for (std::size_t t = 1; t < s.size(); ++t) CHECK(s[t] <= s[t - 1]);
        // Without censoring before T the estimate is the empirical survival fraction.
        for (std::size_t t = 1; t <= 6; ++t) {
            const double alive = t < 6 ? static_cast<double>(b.at_risk_rows(t).size()) / 500.0 : s[t];
            CHECK(s[t] == doctest::Approx(alive));
        }
    }
}

TEST_CASE("stratified permutation stays within baseline bins") {
    Rng rng(4);
    SUBCASE("binary baseline") {
        Matrix c(200, 1);
        for (std::size_t i = 0; i < 200; ++i) c(i, 0) = i % 3 == 0 ? 1.0 : 0.0;
        const auto p = stratified_permutation(c, 8, rng);
        std::vector<std::size_t> sorted(p);
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < 200; ++i) CHECK(sorted[i] == i);
        for (std::size_t i = 0; i < 200; ++i) CHECK(c(p[i], 0) == c(i, 0));
    }
    SUBCASE("continuous baseline, eight bins") {
        Matrix c = rng.normal_matrix(800, 1);
        const auto p = stratified_permutation(c, 8, rng);
        const auto v = column_values(c, 0);
        std::vector<double> edges;
        for (int k = 1; k < 8; ++k) edges.push_back(empirical_quantile(v, k / 8.0));
        auto bin = [&](double x) { return std::lower_bound(edges.begin(), edges.end(), x) - edges.begin(); };
        std::size_t moved = 0;
        for (std::size_t i = 0; i < 800; ++i) {
            CHECK(bin(v[p[i]]) == bin(v[i]));
            moved += p[i] != i;
        }
        CHECK(moved > 700);
    }
    SUBCASE("no baseline columns falls back to a plain permutation") {
        const auto p = stratified_permutation(Matrix(10, 0), 8, rng);
        CHECK(p.size() == 10);
    }
}

TEST_CASE("schema inference and input checks") {
    Rng rng(5);
    const auto s1 = SeqSchema::infer(make_longitudinal(1, 3).simulate(300, rng));
    CHECK(s1.c_kinds[0] == ColumnKind::Binary);
    CHECK(s1.z_kinds[0] == ColumnKind::Continuous);
    CHECK(s1.x_kinds[0] == ColumnKind::Binary);
    CHECK(s1.y_kinds[0] == ColumnKind::Binary);
    const auto s4 = SeqSchema::infer(make_longitudinal(4, 3).simulate(300, rng));
    CHECK(s4 == continuous_schema());

    auto data = make_longitudinal(4, 2).simulate(50, rng);
    const auto cfg = small_config(1, 0);
    SUBCASE("non-finite value") {
        data.z[1](3, 0) = std::nan("");
        CHECK_THROWS_AS(fit_seq(data, continuous_schema(), cfg), InputError);
    }
    SUBCASE("too few trajectories") {
        auto tiny = make_longitudinal(4, 2).simulate(1, rng);
        CHECK_THROWS_AS(fit_seq(tiny, continuous_schema(), cfg), InputError);
    }
    SUBCASE("binary column holding other values") {
        auto schema = continuous_schema();
        schema.x_kinds[0] = ColumnKind::Binary;
        CHECK_THROWS_AS(fit_seq(data, schema, cfg), InputError);
    }
    SUBCASE("width mismatch") {
        auto schema = continuous_schema();
        schema.z_kinds.push_back(ColumnKind::Continuous);
        CHECK_THROWS_AS(fit_seq(data, schema, cfg), InputError);
    }
    SUBCASE("pre-ANM margins are rejected") {
        auto bad = cfg;
        bad.pre_anm = true;
        CHECK_THROWS_AS(fit_seq(data, continuous_schema(), bad), SpecError);
    }
}

TEST_CASE("conditioning dimensions grow with the step") {
    Rng init(6);
    FitConfig cfg;
    cfg.hidden_width = 8;
    SeqSchema schema{{ColumnKind::Continuous, ColumnKind::Binary},
                     {ColumnKind::Continuous, ColumnKind::Continuous, ColumnKind::Continuous},
                     {ColumnKind::Binary},
                     {ColumnKind::Continuous}};
    const auto m = make_seq_model(SeqKind::Seq, schema, 4, cfg, init);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(m.steps[t].g.cond_dim() == 2 + t * 4);
        CHECK(std::get<GeneratorNet>(m.steps[t].f).cond_dim() == 2 + (t + 1));
        CHECK(m.steps[t].h.cond_dim() == 2 + (t + 1) * 4);
        CHECK(m.steps[t].e.has_value() == (t > 0));
        if (t > 0) CHECK(m.steps[t].e->cond_dim() == 2 + t * 4);
    }
    auto broken = m;
    broken.steps[2].h = m.steps[1].h;
    CHECK_THROWS_AS(broken.validate(), DimensionError);
}

TEST_CASE("true generators reproduce the joint law step by step") {
    const auto model = true_setting4(5);
    const auto spec = make_longitudinal(4, 5);
    Rng a(7), b(8), perm(9);
    const auto sim = sample_trajectory_joint(model, 2000, a);
    const auto truth = spec.simulate(2000, b);
    for (std::size_t t = 0; t < 5; ++t) {
        const auto r = energy_permutation_test(step_block(sim, t), step_block(truth, t), 199, perm);
        MESSAGE("t=" << t << " ED " << r.statistic << " p " << r.p_value);
        CHECK_FALSE(r.rejected(0.05));
    }
    // The whole trajectory as one vector.
    const auto r = energy_permutation_test(flatten(sim), flatten(truth), 199, perm);
    MESSAGE("trajectory ED " << r.statistic << " p " << r.p_value);
    CHECK_FALSE(r.rejected(0.05));

    SUBCASE("interventional means at all-ones treatment and C = 0") {
        Rng rng(10);
        const Matrix ones(5, 1, 1.0);
        const auto ys = sample_trajectory_interventional(model, ones, std::vector<double>{0.0}, 20000, rng);
        for (std::size_t t = 0; t < 5; ++t)
            CHECK(std::abs(sample_mean(column_values(ys[t], 0)) - spec.longitudinal_mean(ones, 0.0, t)) <= 0.05);
    }
}

TEST_CASE("sampling contracts") {
    const auto model = true_setting4(3);
    SUBCASE("identical seeds give identical trajectories") {
        Rng a(12), b(12);
        const auto s1 = sample_trajectory_joint(model, 100, a);
        const auto s2 = sample_trajectory_joint(model, 100, b);
        CHECK(flatten(s1) == flatten(s2));
        Rng c(13), d(13);
        const Matrix xbar(3, 1, 1.0);
        const auto y1 = sample_trajectory_interventional(model, xbar, std::nullopt, 100, c);
        const auto y2 = sample_trajectory_interventional(model, xbar, std::nullopt, 100, d);
        for (std::size_t t = 0; t < 3; ++t) CHECK(y1[t] == y2[t]);
    }
    SUBCASE("regime horizon must match") {
        Rng rng(14);
        CHECK_THROWS_AS(sample_trajectory_interventional(model, Matrix(4, 1, 1.0), std::nullopt, 10, rng),
                        DimensionError);
        CHECK_THROWS_AS(sample_trajectory_interventional(model, Matrix(3, 2, 1.0), std::nullopt, 10, rng),
                        DimensionError);
        CHECK_THROWS_AS(
            sample_trajectory_interventional(model, Matrix(3, 1, 1.0), std::vector<double>{0.0, 1.0}, 10, rng),
            DimensionError);
    }
    SUBCASE("empty requests") {
        Rng rng(15);
        CHECK(sample_baseline(model, 0, rng).rows() == 0);
        CHECK(sample_trajectory_joint(model, 0, rng).rows() == 0);
    }
    SUBCASE("model round trip") {
        std::stringstream ss;
        write_seq_model(ss, model);
        const auto back = read_seq_model(ss);
        CHECK(back == model);
        std::stringstream bad("FRM1xxxx");
        CHECK_THROWS_AS(read_seq_model(bad), binio::FormatError);
    }
}

TEST_CASE("survival horizon is truncated when nobody is left at risk") {
    Rng rng(16);
    auto data = make_longitudinal(1, 3).simulate(40, rng);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        data.y[0](i, 0) = 1.0;
        for (std::size_t t = 1; t < 3; ++t) {
            data.z[t](i, 0) = 0.0;
            data.x[t](i, 0) = 0.0;
            data.y[t](i, 0) = 1.0;
        }
    }
    data.at_risk = TrajectoryBatch::mask_from_outcomes(data.y);
    const auto model = fit_seq(data, small_config(2, 0));
    CHECK(model.horizon() == 1);
    REQUIRE(model.warnings.size() == 1);
    CHECK(model.warnings[0].find("truncated") != std::string::npos);
    CHECK(model.steps[0].train_rows == 40);
}

TEST_CASE("survival fit on setting 1") {
    const auto& model = setting1_model();
    const auto& data = setting1_data();
    REQUIRE(model.horizon() == 5);
    for (std::size_t t = 0; t < 5; ++t) CHECK(model.steps[t].train_rows == data.at_risk_rows(t).size());

    SUBCASE("simulated trajectories respect the survival invariants") {
        Rng rng(17);
        const auto sim = sample_trajectory_joint(model, 1000, rng);
        CHECK_NOTHROW(sim.validate());
    }
    SUBCASE("at-risk counts within binomial 3 sigma of the truth") {
        Rng rng(18), truth_rng(19);
        const auto sim = sample_trajectory_joint(model, 1000, rng);
        const auto truth = make_longitudinal(1, 5).simulate(1000, truth_rng);
        for (std::size_t t = 1; t < 5; ++t) {
            const double p = static_cast<double>(truth.at_risk_rows(t).size()) / 1000.0;
            const double sigma = std::sqrt(1000.0 * p * (1.0 - p));
            const double diff = std::abs(static_cast<double>(sim.at_risk_rows(t).size()) - 1000.0 * p);
            MESSAGE("t=" << t << " truth " << 1000.0 * p << " sim " << sim.at_risk_rows(t).size());
            // Both counts are random, so the difference has twice the variance.
            CHECK(diff <= 3.0 * std::sqrt(2.0) * sigma);
        }
    }
    SUBCASE("interventional outcomes are absorbing") {
        Rng rng(20);
        const auto ys = sample_trajectory_interventional(model, Matrix(5, 1, 1.0), std::nullopt, 2000, rng);
        for (std::size_t t = 1; t < 5; ++t)
            for (std::size_t i = 0; i < 2000; ++i) CHECK(ys[t](i, 0) >= ys[t - 1](i, 0));
    }
    SUBCASE("per-step cumulative incidence under constant regimes") {
        const auto spec = make_longitudinal(1, 5);
        Rng rng(21);
        for (double x : {0.0, 1.0}) {
            const auto ys = sample_trajectory_interventional(model, Matrix(5, 1, x), std::nullopt, 20000, rng);
            for (std::size_t t = 0; t < 5; ++t) {
                const double est = sample_mean(column_values(ys[t], 0));
                MESSAGE("x=" << x << " t=" << t << " est " << est << " truth " << spec.cumulative_incidence(x, t + 1));
                CHECK(std::abs(est - spec.cumulative_incidence(x, t + 1)) <= 0.05);
            }
        }
    }
    SUBCASE("baseline draws match the training frequency") {
        Rng rng(22);
        const auto c = sample_baseline(model, 10000, rng);
        for (std::size_t i = 0; i < c.rows(); ++i) REQUIRE((c(i, 0) == 0.0 || c(i, 0) == 1.0));
        CHECK(std::abs(sample_mean(column_values(c, 0)) - sample_mean(column_values(data.c, 0))) <= 0.05);
    }
    SUBCASE("Kaplan-Meier of simulated data against fresh ground truth") {
        Rng rng(23), truth_rng(24);
        const auto km_sim = kaplan_meier(sample_trajectory_joint(model, 1000, rng));
        const auto km_true = kaplan_meier(make_longitudinal(1, 5).simulate(1000, truth_rng));
        double sup = 0.0;
        for (std::size_t t = 0; t < km_sim.size(); ++t) sup = std::max(sup, std::abs(km_sim[t] - km_true[t]));
        MESSAGE("sup KM distance " << sup);
        CHECK(sup <= 0.05);
    }
}

TEST_CASE("longitudinal fit on setting 4") {
    const auto& model = setting4_model();
    const auto& data = setting4_data();
    const auto spec = make_longitudinal(4, 3);

    SUBCASE("baseline moments") {
        Rng rng(25);
        const auto c = column_values(sample_baseline(model, 10000, rng), 0);
        const auto ref = column_values(data.c, 0);
        CHECK(std::abs(sample_mean(c) - sample_mean(ref)) <= 0.1);
        CHECK(std::abs(sample_sd(c) - sample_sd(ref)) <= 0.1);
    }
    SUBCASE("each step's joint draws are as close to held-out data as real data is to itself") {
        Rng rng(26), truth_rng(27);
        const auto sim = sample_trajectory_joint(model, 3000, rng);
        const auto held_out = spec.simulate(3000, truth_rng);
        std::vector<std::size_t> a(1500), b(1500);
        for (std::size_t i = 0; i < 1500; ++i) a[i] = i, b[i] = 1500 + i;
        for (std::size_t t = 0; t < 3; ++t) {
            const Matrix real = step_block(held_out, t);
            const double baseline = energy_distance(gather_rows(real, a), gather_rows(real, b));
            const double ed = energy_distance(step_block(sim, t), real);
            MESSAGE("t=" << t << " ED " << ed << " baseline " << baseline);
            CHECK(ed <= baseline + 0.05 * mean_pair_distance(real));
        }
    }
    SUBCASE("each step's margin recovers the interventional mean") {
        Rng rng(28);
        const Matrix ones(3, 1, 1.0);
        const auto ys = sample_trajectory_interventional(model, ones, std::vector<double>{0.0}, 20000, rng);
        for (std::size_t t = 0; t < 3; ++t) {
            const double est = sample_mean(column_values(ys[t], 0));
            MESSAGE("t=" << t << " mean " << est << " truth " << spec.longitudinal_mean(ones, 0.0, t));
            CHECK(std::abs(est - spec.longitudinal_mean(ones, 0.0, t)) <= 0.2);
        }
    }
}

TEST_CASE("one-step sequential model agrees with the static model") {
    Rng rng(29);
    const auto batch = make_longitudinal(4, 1).simulate(3000, rng);
    const auto cfg = small_config(300, 30);
    const auto seq = fit_seq(batch, continuous_schema(), cfg);

    // Static layout: Z = (C, Z_0), X = X_0, Y = Y_0.
    const Matrix flat = step_block(batch, 0);
    const auto stat = fit(flat, ColumnSchema::continuous(2, 1, 1), cfg);

    Rng a(31), b(32), perm(33);
    const Matrix from_seq = step_block(sample_trajectory_joint(seq, 1000, a), 0);
    const Matrix from_static = sample_joint(stat, 1000, b);
    const auto r = energy_permutation_test(from_seq, from_static, 199, perm);
    MESSAGE("ED " << r.statistic << " p " << r.p_value);
    CHECK_FALSE(r.rejected(0.05));
}
