#include "fren/bench.hpp"

#include "fren/csv.hpp"
#include "fren/frugalsim.hpp"
#include "fren/stats.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <mutex>
#include <sstream>
#include <thread>
#include <variant>

namespace fren {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// metrics

Metrics metrics(std::span<const double> estimates, double truth) {
    if (estimates.empty()) throw std::invalid_argument("metrics: no estimates");
    double sum = 0.0, abs_sum = 0.0, sq_sum = 0.0;
    for (double e : estimates) {
        const double d = e - truth;
        sum += d;
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double k = static_cast<double>(estimates.size());
    return {sum / k, abs_sum / k, std::sqrt(sq_sum / k)};
}

MapeResult mape(std::span<const double> estimates, std::span<const double> truth) {
    if (estimates.size() != truth.size()) throw DimensionError("mape: curve lengths differ");
    if (estimates.empty()) throw std::invalid_argument("mape: empty curve");
    MapeResult r;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (std::abs(truth[i]) < 1e-6) {
            ++r.excluded;
            continue;
        }
        sum += std::abs(estimates[i] - truth[i]) / std::abs(truth[i]);
        ++used;
    }
    if (used == 0) throw std::domain_error("mape: the truth is zero at every grid point");
    r.value = sum / static_cast<double>(used);
    return r;
}

Curve adrf_curve(const FrengressionModel& model, std::span<const double> grid, std::size_t draws, Rng& rng) {
    if (grid.empty()) throw std::invalid_argument("adrf_curve: empty grid");
    if (model.schema.d_x() != 1) throw DimensionError("adrf_curve: needs a scalar treatment");
    if (draws < 2) throw std::invalid_argument("adrf_curve: need at least two draws");
    Curve c;
    for (double x : grid) {
        const auto y = column_values(sample_interventional(model, std::span(&x, 1), draws, rng), 0);
        c.x.push_back(x);
        c.mean.push_back(sample_mean(y));
        c.q025.push_back(empirical_quantile(y, 0.025));
        c.q975.push_back(empirical_quantile(y, 0.975));
    }
    return c;
}

Curve average_curves(const std::vector<Curve>& curves) {
    if (curves.empty()) throw std::invalid_argument("average_curves: nothing to average");
    Curve out = curves.front();
    for (std::size_t k = 1; k < curves.size(); ++k) {
        if (curves[k].x != out.x) throw DimensionError("average_curves: grids differ");
        for (std::size_t i = 0; i < out.x.size(); ++i) {
            out.mean[i] += curves[k].mean[i];
            out.q025[i] += curves[k].q025[i];
            out.q975[i] += curves[k].q975[i];
        }
    }
    const double K = static_cast<double>(curves.size());
    for (std::size_t i = 0; i < out.x.size(); ++i) {
        out.mean[i] /= K;
        out.q025[i] /= K;
        out.q975[i] /= K;
    }
    return out;
}

// ---------------------------------------------------------------------------
// catalog

namespace {

const std::vector<std::pair<Estimand, const char*>> kEstimands = {
    {Estimand::Ate, "ate"},
    {Estimand::Adrf, "adrf"},
    {Estimand::Quantile, "quantile"},
    {Estimand::RiskDifference, "risk_difference"},
    {Estimand::Km, "km"},
    {Estimand::LongitudinalMean, "longitudinal_mean"},
};

int setting_of(const std::string& dgp) {
    if (dgp.size() == 8 && dgp.rfind("Setting", 0) == 0 && dgp[7] >= '1' && dgp[7] <= '4') return dgp[7] - '0';
    return 0;
}

bool is_pre_anm(const std::string& dgp) { return dgp == "PreAnmUniform" || dgp == "PreAnmNormal"; }
bool is_frugal(const std::string& dgp) { return dgp == "WeakOverlap" || dgp == "RCT"; }
bool is_structural(const std::string& dgp) { return dgp == "Sun" || dgp == "HiranoImbens" || is_pre_anm(dgp); }

void require_known(const std::string& dgp) {
    if (!is_frugal(dgp) && !is_structural(dgp) && setting_of(dgp) == 0) {
        throw SpecError("unknown DGP '" + dgp + "'");
    }
}

FrugalSpec frugal_spec(const ExperimentConfig& cfg) {
    if (cfg.dgp == "WeakOverlap") return make_weak_overlap(cfg.param("beta", 0.0));
    return make_rct();
}

StructuralSpec structural_spec(const ExperimentConfig& cfg) {
    if (is_pre_anm(cfg.dgp)) {
        return make_pre_anm_cubic(cfg.dgp == "PreAnmUniform" ? PreAnmNoise::Uniform : PreAnmNoise::Normal,
                                  cfg.param("x_lo", -1.0), cfg.param("x_hi", 1.0));
    }
    const double p = cfg.param("p", 200.0);
    if (!(p >= 1.0) || p != std::floor(p)) throw SpecError("param p must be a positive integer");
    return make_continuous(cfg.dgp, static_cast<std::size_t>(p));
}

LongitudinalSpec longitudinal_spec(const ExperimentConfig& cfg) { return make_longitudinal(setting_of(cfg.dgp), cfg.horizon); }

std::vector<double> arange(double lo, double hi, double step) {
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step));
    for (std::size_t i = 0; i <= count; ++i) out.push_back(lo + step * static_cast<double>(i));
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    // Either "a,b,c" or "lo:step:hi".
    if (v.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(parse_double(key, item));
        if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0]) {
            throw std::invalid_argument(key + ": range must be lo:step:hi with step > 0");
        }
        return arange(parts[0], parts[2], parts[1]);
    }
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Estimand parse_estimand(const std::string& name) {
    for (const auto& [e, n] : kEstimands)
        if (name == n) return e;
    throw std::invalid_argument("unknown estimand '" + name + "'");
}

const char* estimand_name(Estimand e) {
    for (const auto& [k, n] : kEstimands)
        if (k == e) return n;
    return "?";
}

std::vector<std::string> catalog_names() {
    return {"WeakOverlap", "RCT", "Sun", "HiranoImbens", "PreAnmUniform", "PreAnmNormal",
            "Setting1", "Setting2", "Setting3", "Setting4"};
}

bool is_longitudinal(const std::string& dgp) { return setting_of(dgp) != 0; }

Estimand default_estimand(const std::string& dgp) {
    require_known(dgp);
    if (is_frugal(dgp)) return Estimand::Ate;
    if (is_pre_anm(dgp)) return Estimand::Quantile;
    if (is_structural(dgp)) return Estimand::Adrf;
    return setting_of(dgp) == 4 ? Estimand::LongitudinalMean : Estimand::RiskDifference;
}

Estimand ExperimentConfig::resolved_estimand() const { return estimand ? *estimand : default_estimand(dgp); }

double ExperimentConfig::param(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

std::vector<double> ExperimentConfig::resolved_grid() const {
    const Estimand e = resolved_estimand();
    if (e == Estimand::LongitudinalMean) return arange(0.0, static_cast<double>(horizon) - 1.0, 1.0);
    if (!x_grid.empty()) return x_grid;
    if (is_pre_anm(dgp)) return arange(-1.5, 1.5, 0.25);
    if (dgp == "HiranoImbens") return arange(0.0, 3.0, 0.25);
    return arange(0.0, 6.0, 0.25);
}

void ExperimentConfig::validate() const {
    require_known(dgp);
    fit.validate();
    if (n < 2) throw SpecError("experiment: n must be at least 2");
    if (reps < 1) throw SpecError("experiment: reps must be at least 1");
    if (draws < 2) throw SpecError("experiment: draws must be at least 2");
    if (threads < 1) throw SpecError("experiment: threads must be at least 1");
    if (horizon < 1) throw SpecError("experiment: horizon must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw SpecError("experiment: alpha must lie in (0, 1)");
    if (ate_pair.size() != 2) throw SpecError("experiment: ate-pair needs two treatment values");
    if (withhold && !(withhold->second > withhold->first)) throw SpecError("experiment: empty withheld interval");
    const Estimand e = resolved_estimand();
    const bool longi = is_longitudinal(dgp);
    const int st = setting_of(dgp);
    switch (e) {
        case Estimand::Ate:
            if (longi) throw SpecError("experiment: ate needs a static DGP");
            break;
        case Estimand::Adrf:
            if (longi) throw SpecError("experiment: adrf needs a static DGP");
            break;
        case Estimand::Quantile:
            if (!is_structural(dgp) && !is_frugal(dgp)) throw SpecError("experiment: quantile needs a static DGP");
            break;
        case Estimand::RiskDifference:
        case Estimand::Km:
            if (st < 1 || st > 3) throw SpecError("experiment: survival estimands need Setting1..Setting3");
            break;
        case Estimand::LongitudinalMean:
            if (st != 4) throw SpecError("experiment: longitudinal_mean needs Setting4");
            break;
    }
    if ((e == Estimand::Adrf || e == Estimand::Quantile) && resolved_grid().empty()) {
        throw SpecError("experiment: empty x-grid");
    }
    if (withhold && longi) throw SpecError("experiment: withholding applies to static DGPs");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("dgp", dgp);
    for (const auto& [k, v] : params) out.emplace_back("param." + k, format_double(v));
    out.emplace_back("n", std::to_string(n));
    out.emplace_back("reps", std::to_string(reps));
    out.emplace_back("epochs", std::to_string(fit.epochs));
    out.emplace_back("lr", format_double(fit.lr));
    out.emplace_back("hidden-layers", std::to_string(fit.hidden_layers));
    out.emplace_back("hidden-width", std::to_string(fit.hidden_width));
    out.emplace_back("m", std::to_string(fit.m));
    out.emplace_back("minibatch", std::to_string(fit.minibatch));
    out.emplace_back("standardize", fit.standardize ? "true" : "false");
    out.emplace_back("pre-anm", fit.pre_anm ? "true" : "false");
    out.emplace_back("monotonicity-weight", format_double(fit.monotonicity_weight));
    out.emplace_back("seed", std::to_string(seed));
    out.emplace_back("estimand", estimand_name(resolved_estimand()));
    out.emplace_back("x-grid", join(resolved_grid()));
    out.emplace_back("ate-pair", join(ate_pair));
    out.emplace_back("alpha", format_double(alpha));
    out.emplace_back("horizon", std::to_string(horizon));
    out.emplace_back("draws", std::to_string(draws));
    out.emplace_back("withhold", withhold ? format_double(withhold->first) + ":" + format_double(withhold->second) : "none");
    return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key.rfind("param.", 0) == 0 && key.size() > 6) {
        cfg.params[key.substr(6)] = parse_double(key, v);
    } else if (key == "dgp") {
        cfg.dgp = v;
    } else if (key == "n") {
        cfg.n = parse_count(key, v);
    } else if (key == "reps") {
        cfg.reps = parse_count(key, v);
    } else if (key == "epochs") {
        cfg.fit.epochs = parse_count(key, v);
    } else if (key == "lr") {
        cfg.fit.lr = parse_double(key, v);
    } else if (key == "hidden-layers") {
        cfg.fit.hidden_layers = parse_count(key, v);
    } else if (key == "hidden-width") {
        cfg.fit.hidden_width = parse_count(key, v);
    } else if (key == "m") {
        cfg.fit.m = parse_count(key, v);
    } else if (key == "minibatch") {
        cfg.fit.minibatch = parse_count(key, v);
    } else if (key == "standardize") {
        cfg.fit.standardize = parse_bool(key, v);
    } else if (key == "pre-anm") {
        cfg.fit.pre_anm = parse_bool(key, v);
    } else if (key == "monotonicity-weight") {
        cfg.fit.monotonicity_weight = parse_double(key, v);
    } else if (key == "seed") {
        cfg.seed = parse_count(key, v);
    } else if (key == "estimand") {
        cfg.estimand = parse_estimand(v);
    } else if (key == "x-grid") {
        cfg.x_grid = parse_list(key, v);
    } else if (key == "ate-pair") {
        cfg.ate_pair = parse_list(key, v);
    } else if (key == "alpha") {
        cfg.alpha = parse_double(key, v);
    } else if (key == "horizon") {
        cfg.horizon = parse_count(key, v);
    } else if (key == "draws") {
        cfg.draws = parse_count(key, v);
    } else if (key == "withhold") {
        if (v == "none") {
            cfg.withhold.reset();
        } else {
            const auto colon = v.find(':');
            if (colon == std::string::npos) throw std::invalid_argument("withhold: expected lo:hi or none");
            cfg.withhold = std::pair{parse_double(key, v.substr(0, colon)), parse_double(key, v.substr(colon + 1))};
        }
    } else if (key == "threads") {
        cfg.threads = parse_count(key, v);
    } else if (key == "out") {
        cfg.out_dir = v;
    } else {
        throw std::invalid_argument("unknown setting '" + key + "'");
    }
}

std::vector<std::pair<std::string, std::string>> read_settings(std::istream& is) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(is, line)) {
        ++no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(no) + ": expected key = value");
        out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// data

StaticData simulate_static(const ExperimentConfig& cfg, std::size_t n, Rng& rng) {
    require_known(cfg.dgp);
    if (is_longitudinal(cfg.dgp)) throw SpecError(cfg.dgp + " is longitudinal");
    if (is_frugal(cfg.dgp)) {
        const FrugalSpec spec = frugal_spec(cfg);
        ColumnSchema schema = ColumnSchema::continuous(spec.d_z, spec.d_x, 1);
        for (std::size_t k = 0; k < spec.d_z; ++k)
            if (spec.binary.at(k)) schema.z_kinds[k] = ColumnKind::Binary;
        for (std::size_t k = 0; k < spec.d_x; ++k)
            if (spec.binary.at(spec.d_z + k)) schema.x_kinds[k] = ColumnKind::Binary;
        return {schema, simulate_frugal(spec, n, rng)};
    }
    const StructuralSpec spec = structural_spec(cfg);
    return {ColumnSchema::continuous(spec.d_z, spec.d_x, 1), spec.sample(n, rng)};
}

TrajectoryBatch simulate_longitudinal(const ExperimentConfig& cfg, std::size_t n, Rng& rng) {
    require_known(cfg.dgp);
    if (!is_longitudinal(cfg.dgp)) throw SpecError(cfg.dgp + " is not longitudinal");
    return longitudinal_spec(cfg).simulate(n, rng);
}

double scalar_truth(const ExperimentConfig& cfg) {
    const Estimand e = cfg.resolved_estimand();
    if (e == Estimand::Km) return 0.0;
    if (e == Estimand::Ate) {
        if (is_frugal(cfg.dgp)) {
            const FrugalSpec spec = frugal_spec(cfg);
            return spec.margin.mean(std::span(&cfg.ate_pair[0], 1)) - spec.margin.mean(std::span(&cfg.ate_pair[1], 1));
        }
        const StructuralSpec spec = structural_spec(cfg);
        return spec.mu(cfg.ate_pair[0]) - spec.mu(cfg.ate_pair[1]);
    }
    if (e == Estimand::RiskDifference) {
        const LongitudinalSpec spec = longitudinal_spec(cfg);
        const double x1 = cfg.ate_pair[0], x0 = cfg.ate_pair[1];
        try {
            return spec.cumulative_incidence(x1, cfg.horizon) - spec.cumulative_incidence(x0, cfg.horizon);
        } catch (const UnsupportedError&) {
            // Monte Carlo under each regime on a fixed stream.
            Rng rng = Rng(cfg.seed).split(Stream::Data, 1);
            const std::size_t draws = 1000000;
            auto incidence = [&](double x) {
                const auto b = spec.simulate_regime(Matrix(cfg.horizon, 1, x), std::nullopt, draws, rng);
                return sample_mean(column_values(b.y.back(), 0));
            };
            return incidence(x1) - incidence(x0);
        }
    }
    throw SpecError(std::string("estimand ") + estimand_name(e) + " is a curve");
}

std::vector<double> curve_truth(const ExperimentConfig& cfg) {
    const Estimand e = cfg.resolved_estimand();
    const auto grid = cfg.resolved_grid();
    std::vector<double> out;
    if (e == Estimand::LongitudinalMean) {
        const LongitudinalSpec spec = longitudinal_spec(cfg);
        const Matrix xbar(cfg.horizon, 1, cfg.param("x", 1.0));
        for (std::size_t t = 0; t < cfg.horizon; ++t) out.push_back(spec.longitudinal_mean(xbar, cfg.param("c", 0.0), t));
        return out;
    }
    if (e != Estimand::Adrf && e != Estimand::Quantile) throw SpecError(std::string("estimand ") + estimand_name(e) + " is a scalar");
    for (double x : grid) {
        if (is_frugal(cfg.dgp)) {
            const FrugalSpec spec = frugal_spec(cfg);
            out.push_back(e == Estimand::Adrf ? spec.margin.mean(std::span(&x, 1))
                                              : true_margin_quantile(spec, std::span(&x, 1), cfg.alpha));
        } else {
            const StructuralSpec spec = structural_spec(cfg);
            out.push_back(e == Estimand::Adrf ? spec.mu(x) : true_margin_quantile(spec, x, cfg.alpha));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// replications

namespace {

struct RepResult {
    double scalar = 0.0;
    Curve curve;  // curve estimands; mean holds the estimate
    std::vector<double> km_sim, km_true;
};

Matrix drop_withheld(const Matrix& data, std::size_t x_col, const std::pair<double, double>& range) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const double x = data(i, x_col);
        if (!(x > range.first && x <= range.second)) keep.push_back(i);
    }
    return gather_rows(data, keep);
}

RepResult run_static(const ExperimentConfig& cfg, Estimand e, const FitConfig& fc, Rng& data_rng, Rng& sample_rng) {
    StaticData d = simulate_static(cfg, cfg.n, data_rng);
    if (cfg.withhold) d.data = drop_withheld(d.data, d.schema.d_z(), *cfg.withhold);
    const FrengressionModel model = fit(d.data, d.schema, fc);
    RepResult r;
    if (e == Estimand::Ate) {
        r.scalar = estimate_ate(model, std::span(&cfg.ate_pair[0], 1), std::span(&cfg.ate_pair[1], 1), cfg.draws,
                                sample_rng).value;
        return r;
    }
    const auto grid = cfg.resolved_grid();
    r.curve = adrf_curve(model, grid, cfg.draws, sample_rng);
    if (e == Estimand::Quantile) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            r.curve.mean[i] = estimate_quantile(model, std::span(&grid[i], 1), cfg.alpha, cfg.draws, sample_rng);
    }
    return r;
}

RepResult run_longitudinal(const ExperimentConfig& cfg, Estimand e, const FitConfig& fc, Rng& data_rng,
                           Rng& sample_rng, Rng& truth_rng) {
    const LongitudinalSpec spec = longitudinal_spec(cfg);
    const TrajectoryBatch data = spec.simulate(cfg.n, data_rng);
    const SeqModel model = fit_seq(data, fc);
    const std::size_t T = model.horizon();
    RepResult r;
    if (e == Estimand::RiskDifference) {
        auto incidence = [&](double x) {
            const auto ys = sample_trajectory_interventional(model, Matrix(T, 1, x), std::nullopt, cfg.draws, sample_rng);
            return sample_mean(column_values(ys.back(), 0));
        };
        r.scalar = incidence(cfg.ate_pair[0]) - incidence(cfg.ate_pair[1]);
    } else if (e == Estimand::Km) {
        r.km_sim = kaplan_meier(sample_trajectory_joint(model, cfg.n, sample_rng));
        r.km_true = kaplan_meier(spec.simulate(cfg.n, truth_rng));
        r.km_sim.resize(r.km_true.size(), r.km_sim.back());
        for (std::size_t t = 0; t < r.km_true.size(); ++t) r.scalar = std::max(r.scalar, std::abs(r.km_sim[t] - r.km_true[t]));
    } else {
        const Matrix xbar(T, 1, cfg.param("x", 1.0));
        const auto ys = sample_trajectory_interventional(model, xbar, std::vector<double>{cfg.param("c", 0.0)},
                                                         cfg.draws, sample_rng);
        for (std::size_t t = 0; t < T; ++t) {
            const auto y = column_values(ys[t], 0);
            r.curve.x.push_back(static_cast<double>(t));
            r.curve.mean.push_back(sample_mean(y));
            r.curve.q025.push_back(empirical_quantile(y, 0.025));
            r.curve.q975.push_back(empirical_quantile(y, 0.975));
        }
        if (T < cfg.horizon) throw TrainingError("longitudinal fit truncated the horizon", 0);
    }
    return r;
}

RepResult run_replication(const ExperimentConfig& cfg, Estimand e, std::size_t k) {
    const Rng rep = Rng(cfg.seed).split(Stream::Replication, k);
    Rng data_rng = rep.split(Stream::Data);
    Rng sample_rng = rep.split(Stream::Sampling);
    Rng truth_rng = rep.split(Stream::Data, 1);
    FitConfig fc = cfg.fit;
    fc.seed = rep.split(Stream::Init).seed();
    if (is_pre_anm(cfg.dgp)) fc.pre_anm = true;
    if (is_longitudinal(cfg.dgp)) return run_longitudinal(cfg, e, fc, data_rng, sample_rng, truth_rng);
    return run_static(cfg, e, fc, data_rng, sample_rng);
}

bool is_curve(Estimand e) {
    return e == Estimand::Adrf || e == Estimand::Quantile || e == Estimand::LongitudinalMean;
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << contents;
    os.close();
    if (!os) throw IoError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string rep_csv(const RepResult& r, Estimand e) {
    std::ostringstream os;
    os << "quantity,x,value\n";
    if (is_curve(e)) {
        for (std::size_t i = 0; i < r.curve.x.size(); ++i) {
            const std::string x = format_double(r.curve.x[i]);
            os << "estimate," << x << ',' << format_double(r.curve.mean[i]) << '\n';
            os << "q025," << x << ',' << format_double(r.curve.q025[i]) << '\n';
            os << "q975," << x << ',' << format_double(r.curve.q975[i]) << '\n';
        }
    } else {
        os << "estimate,," << format_double(r.scalar) << '\n';
        for (std::size_t t = 0; t < r.km_sim.size(); ++t)
            os << "km_sim," << t << ',' << format_double(r.km_sim[t]) << "\nkm_true," << t << ','
               << format_double(r.km_true[t]) << '\n';
    }
    return os.str();
}

}  // namespace

MetricReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Estimand e = cfg.resolved_estimand();
    const fs::path dir(cfg.out_dir);
    if (!cfg.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir / "reps", ec);
        if (ec) throw IoError("cannot create " + (dir / "reps").string() + ": " + ec.message());
    }

    std::vector<RepResult> results(cfg.reps);
    std::vector<std::exception_ptr> errors(cfg.reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < cfg.reps; k = next++) {
            try {
                results[k] = run_replication(cfg, e, k);
                if (!cfg.out_dir.empty()) {
                    write_file(dir / "reps" / ("rep_" + std::to_string(k) + ".csv"), rep_csv(results[k], e));
                }
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min(cfg.threads, cfg.reps);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    MetricReport rep;
    rep.estimand = e;
    if (is_curve(e)) {
        rep.grid = cfg.resolved_grid();
        rep.curve_truth = curve_truth(cfg);
        std::vector<Curve> curves;
        std::vector<double> residuals;
        rep.per_x_rmse.assign(rep.grid.size(), 0.0);
        for (const auto& r : results) {
            curves.push_back(r.curve);
            rep.curve_estimates.push_back(r.curve.mean);
            for (std::size_t i = 0; i < rep.grid.size(); ++i) {
                const double d = r.curve.mean[i] - rep.curve_truth[i];
                residuals.push_back(d);
                rep.per_x_rmse[i] += d * d;
            }
        }
        for (double& v : rep.per_x_rmse) v = std::sqrt(v / static_cast<double>(cfg.reps));
        rep.band = average_curves(curves);
        rep.summary = metrics(residuals, 0.0);
        rep.mape = mape(rep.band.mean, rep.curve_truth);
    } else {
        rep.truth = scalar_truth(cfg);
        for (const auto& r : results) rep.estimates.push_back(r.scalar);
        rep.summary = metrics(rep.estimates, rep.truth);
        if (e == Estimand::Km) {
            rep.km_sim.assign(results.front().km_sim.size(), 0.0);
            rep.km_true.assign(results.front().km_true.size(), 0.0);
            for (const auto& r : results)
                for (std::size_t t = 0; t < rep.km_sim.size(); ++t) {
                    rep.km_sim[t] += r.km_sim[t] / static_cast<double>(cfg.reps);
                    rep.km_true[t] += r.km_true[t] / static_cast<double>(cfg.reps);
                }
        }
    }

    if (cfg.out_dir.empty()) return rep;

    std::vector<std::string> files;
    auto emit = [&](const std::string& name, const std::string& contents) {
        write_file(dir / name, contents);
        files.push_back(name);
    };
    {
        std::ostringstream os;
        for (const auto& [k, v] : cfg.echo()) os << k << " = " << v << '\n';
        emit("config.txt", os.str());
    }
    for (std::size_t k = 0; k < cfg.reps; ++k) files.push_back("reps/rep_" + std::to_string(k) + ".csv");
    {
        std::ostringstream os;
        if (is_curve(e)) {
            os << "rep,x,value\n";
            for (std::size_t k = 0; k < cfg.reps; ++k)
                for (std::size_t i = 0; i < rep.grid.size(); ++i)
                    os << k << ',' << format_double(rep.grid[i]) << ',' << format_double(rep.curve_estimates[k][i]) << '\n';
        } else {
            os << "rep,value\n";
            for (std::size_t k = 0; k < cfg.reps; ++k) os << k << ',' << format_double(rep.estimates[k]) << '\n';
        }
        emit("estimates.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "bias,mae,rmse,truth";
        if (rep.mape) os << ",mape,mape_excluded";
        os << '\n'
           << format_double(rep.summary.bias) << ',' << format_double(rep.summary.mae) << ','
           << format_double(rep.summary.rmse) << ',' << (is_curve(e) ? std::string() : format_double(rep.truth));
        if (rep.mape) os << ',' << format_double(rep.mape->value) << ',' << rep.mape->excluded;
        os << '\n';
        emit("metrics.csv", os.str());
    }
    if (is_curve(e)) {
        std::ostringstream os;
        os << "x,mean,q025,q975,truth,rmse\n";
        for (std::size_t i = 0; i < rep.grid.size(); ++i)
            os << format_double(rep.grid[i]) << ',' << format_double(rep.band.mean[i]) << ','
               << format_double(rep.band.q025[i]) << ',' << format_double(rep.band.q975[i]) << ','
               << format_double(rep.curve_truth[i]) << ',' << format_double(rep.per_x_rmse[i]) << '\n';
        emit("curve.csv", os.str());
    }
    if (e == Estimand::Km) {
        std::ostringstream os;
        os << "t,S_sim,S_true\n";
        for (std::size_t t = 0; t < rep.km_sim.size(); ++t)
            os << t << ',' << format_double(rep.km_sim[t]) << ',' << format_double(rep.km_true[t]) << '\n';
        emit("km.csv", os.str());
    }
    write_manifest(cfg.out_dir, files);
    files.push_back("manifest.txt");
    rep.files = files;
    return rep;
}

// ---------------------------------------------------------------------------
// manifest

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest failed");
    }
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

void write_manifest(const std::string& dir, const std::vector<std::string>& files) {
    std::ostringstream os;
    for (const auto& name : files) {
        const std::string bytes = read_file(fs::path(dir) / name);
        os << sha256_hex(bytes) << "  " << bytes.size() << "  " << name << '\n';
    }
    write_file(fs::path(dir) / "manifest.txt", os.str());
}

std::vector<std::string> verify_manifest(const std::string& dir) {
    std::istringstream is(read_file(fs::path(dir) / "manifest.txt"));
    std::vector<std::string> bad;
    std::string hash, name;
    std::size_t size = 0;
    while (is >> hash >> size >> name) {
        std::string bytes;
        try {
            bytes = read_file(fs::path(dir) / name);
        } catch (const IoError&) {
            bad.push_back(name);
            continue;
        }
        if (bytes.size() != size || sha256_hex(bytes) != hash) bad.push_back(name);
    }
    return bad;
}

}  // namespace fren
