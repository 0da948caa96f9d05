#include "fren/frugalsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fren {

namespace {

// Substreams for the two halves of a frugal draw.
constexpr std::uint64_t kPastStream = 101;
constexpr std::uint64_t kOutcomeStream = 102;

double clamp_unit(double u) {
    // Keep Phi(score) strictly inside (0, 1) so every quantile is finite.
    constexpr double lo = 1e-16;
    return std::clamp(u, lo, 1.0 - lo);
}

}  // namespace

double copula_rho_default() { return 2.0 * expit(1.0) - 1.0; }

void FrugalSpec::validate() const {
    if (!past) throw SpecError(name + ": no past sampler");
    if (!binary.empty() && binary.size() != d_z + d_x) throw SpecError(name + ": binary flags do not cover (Z, X)");
    margin.validate();
    if (margin.treatment_dim() != d_x) throw SpecError(name + ": margin treatment width differs from d_x");
    double total = 0.0;
    for (const auto& link : copula) {
        if (!(std::abs(link.rho) < 1.0)) throw SpecError(name + ": copula correlation outside (-1, 1)");
        if (link.z_column >= d_z) throw SpecError(name + ": copula links a non-Z column");
        total += link.rho * link.rho;
    }
    if (mode == CopulaMode::Joint && !(total < 1.0)) {
        throw SpecError(name + ": joint copula correlation matrix is not positive definite (sum rho^2 = " +
                        std::to_string(total) + ")");
    }
}

std::vector<double> FrugalSpec::implied_correlations() const {
    std::vector<double> out;
    double remaining = 1.0;  // product of sqrt(1 - rho_k^2) over earlier links
    for (const auto& link : copula) {
        out.push_back(mode == CopulaMode::Joint ? link.rho : link.rho * remaining);
        remaining *= std::sqrt(1.0 - link.rho * link.rho);
    }
    return out;
}

double FrugalSpec::outcome_score(std::span<const double> linked, double fresh) const {
    if (linked.size() != copula.size()) throw DimensionError("outcome_score: one value per copula link expected");
    if (mode == CopulaMode::Joint) {
        double s = 0.0;
        double used = 0.0;
        for (std::size_t k = 0; k < linked.size(); ++k) {
            s += copula[k].rho * linked[k];
            used += copula[k].rho * copula[k].rho;
        }
        return s + std::sqrt(1.0 - used) * fresh;
    }
    double s = 0.0;
    double remaining = 1.0;
    for (std::size_t k = 0; k < linked.size(); ++k) {
        s += copula[k].rho * remaining * linked[k];
        remaining *= std::sqrt(1.0 - copula[k].rho * copula[k].rho);
    }
    return s + remaining * fresh;
}

Matrix simulate_frugal(const FrugalSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();
    Rng past_rng = rng.split(kPastStream);
    Rng out_rng = rng.split(kOutcomeStream);
    const Matrix zx = spec.past(n, past_rng);
    if (zx.rows() != n || zx.cols() != spec.d_z + spec.d_x) throw DimensionError(spec.name + ": past sampler shape");
    Matrix out(n, zx.cols() + 1);
    std::vector<double> linked(spec.copula.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = zx.row(i);
        std::copy(row.begin(), row.end(), out.row(i).begin());
        for (std::size_t k = 0; k < linked.size(); ++k) linked[k] = row[spec.copula[k].z_column];
        const double score = spec.outcome_score(linked, out_rng.normal());
        out(i, zx.cols()) = spec.margin.quantile(row.subspan(spec.d_z, spec.d_x), clamp_unit(normal_cdf(score)));
    }
    return out;
}

Matrix simulate_margin(const FrugalSpec& spec, std::span<const double> x, std::size_t n, Rng& rng) {
    spec.validate();
    Matrix y(n, 1);
    for (std::size_t i = 0; i < n; ++i) y(i, 0) = spec.margin.quantile(x, clamp_unit(rng.uniform()));
    return y;
}

double true_margin_quantile(const FrugalSpec& spec, std::span<const double> x, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("true_margin_quantile: alpha outside (0, 1)");
    return spec.margin.quantile(x, alpha);
}

double weak_overlap_propensity(double beta_i, std::span<const double> z) {
    if (z.size() < 10) throw DimensionError("weak overlap: Z has 10 columns");
    double lin = 0.0;
    for (std::size_t k = 0; k < 5; ++k) lin += beta_i * z[k] + z[5 + k];
    return expit(lin);
}

FrugalSpec make_weak_overlap(double beta_i) {
    if (!(beta_i >= 0.0)) throw SpecError("weak overlap: beta_I must be nonnegative");
    FrugalSpec s;
    s.name = "WeakOverlap(" + std::to_string(beta_i) + ")";
    s.d_z = 10;
    s.d_x = 1;
    s.binary.assign(11, false);
    s.binary[10] = true;
    s.past = [beta_i](std::size_t n, Rng& rng) {
        Matrix zx(n, 11);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < 10; ++k) zx(i, k) = rng.normal();
            zx(i, 10) = rng.bernoulli(weak_overlap_propensity(beta_i, zx.row(i).first(10))) ? 1.0 : 0.0;
        }
        return zx;
    };
    s.margin = MarginLaw::normal(0.0, 2.0, 1.0);
    for (std::size_t k = 5; k < 10; ++k) s.copula.push_back({k, copula_rho_default()});
    s.mode = CopulaMode::Vine;
    return s;
}

FrugalSpec make_rct() {
    FrugalSpec s;
    s.name = "RctDistributional";
    s.d_z = 6;
    s.d_x = 1;
    s.binary.assign(7, false);
    s.binary[6] = true;
    s.past = [](std::size_t n, Rng& rng) {
        Matrix zx(n, 7);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < 6; ++k) zx(i, k) = rng.normal();
            zx(i, 6) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
        return zx;
    };
    s.margin = MarginLaw::normal(0.0, 2.0, 1.0);
    s.copula = {{4, copula_rho_default()}, {5, copula_rho_default()}};
    s.mode = CopulaMode::Joint;
    return s;
}

// ---------------------------------------------------------------------------

namespace {

StructuralSpec hirano_imbens(std::size_t p) {
    if (p < 3) throw SpecError("HiranoImbens needs p >= 3");
    StructuralSpec s;
    s.name = "HiranoImbens";
    s.d_z = p;
    auto outcome = [](double x, double z0, double z2, double noise) {
        const double a = z0 + z2;
        return x + a * std::exp(-x * a) + noise;
    };
    s.sample = [p, outcome](std::size_t n, Rng& rng) {
        Matrix out(n, p + 2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < p; ++k) out(i, k) = rng.exponential(1.0);
            const double x = rng.exponential(out(i, 0) + out(i, 1));
            out(i, p) = x;
            out(i, p + 1) = outcome(x, out(i, 0), out(i, 2), rng.normal());
        }
        return out;
    };
    s.sample_do = [outcome](double x, std::size_t n, Rng& rng) {
        Matrix y(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double z0 = rng.exponential(1.0);
            const double z2 = rng.exponential(1.0);
            y(i, 0) = outcome(x, z0, z2, rng.normal());
        }
        return y;
    };
    s.mu = [](double x) { return x + 2.0 / std::pow(1.0 + x, 3); };
    return s;
}

StructuralSpec sun(std::size_t p) {
    if (p < 6) throw SpecError("Sun needs p >= 6");
    StructuralSpec s;
    s.name = "Sun";
    s.d_z = p;
    // Z_1..Z_6 of the table are columns 0..5.
    auto outcome_mean = [](double x, std::span<const double> z) {
        return x + z[0] + std::cos(z[1]) + z[4] * z[4] + z[5] - 0.5;
    };
    s.sample = [p, outcome_mean](std::size_t n, Rng& rng) {
        Matrix out(n, p + 2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < p; ++k) out(i, k) = rng.normal();
            const auto z = out.row(i).first(p);
            const double x =
                -2.0 * std::sin(2.0 * z[0]) + z[1] * z[1] + z[2] + std::cos(z[3]) - 5.0 / 6.0 + rng.normal();
            out(i, p) = x;
            out(i, p + 1) = outcome_mean(x, z) + rng.normal();
        }
        return out;
    };
    s.sample_do = [outcome_mean](double x, std::size_t n, Rng& rng) {
        Matrix y(n, 1);
        double z[6];
        for (std::size_t i = 0; i < n; ++i) {
            for (double& v : z) v = rng.normal();
            y(i, 0) = outcome_mean(x, z) + rng.normal();
        }
        return y;
    };
    s.mu = [](double x) { return x + 0.5 + std::exp(-0.5); };
    return s;
}

}  // namespace

StructuralSpec make_continuous(const std::string& name, std::size_t p) {
    if (name == "HiranoImbens") return hirano_imbens(p);
    if (name == "Sun") return sun(p);
    throw SpecError("unknown continuous-treatment DGP '" + name + "'");
}

StructuralSpec make_pre_anm_cubic(PreAnmNoise noise, double x_lo, double x_hi) {
    if (!(x_hi > x_lo)) throw SpecError("pre-ANM: empty treatment range");
    StructuralSpec s;
    s.name = noise == PreAnmNoise::Uniform ? "PreAnmCubicUniform" : "PreAnmCubicNormal";
    s.d_z = 1;
    auto draw_noise = [noise](Rng& rng) {
        return noise == PreAnmNoise::Uniform ? 2.0 * rng.uniform() - 1.0 : 0.5 * rng.normal();
    };
    s.sample = [=](std::size_t n, Rng& rng) {
        Matrix out(n, 3);
        for (std::size_t i = 0; i < n; ++i) {
            out(i, 0) = rng.normal();
            const double x = x_lo + (x_hi - x_lo) * rng.uniform();
            out(i, 1) = x;
            out(i, 2) = std::pow(x + draw_noise(rng), 3);
        }
        return out;
    };
    s.sample_do = [=](double x, std::size_t n, Rng& rng) {
        Matrix y(n, 1);
        for (std::size_t i = 0; i < n; ++i) y(i, 0) = std::pow(x + draw_noise(rng), 3);
        return y;
    };
    s.mu = [noise](double x) {
        // E(x + e)^3 = x^3 + 3x E e^2 for symmetric e.
        const double var = noise == PreAnmNoise::Uniform ? 1.0 / 3.0 : 0.25;
        return x * x * x + 3.0 * x * var;
    };
    s.quantile = [noise](double x, double alpha) {
        const double q = noise == PreAnmNoise::Uniform ? 2.0 * alpha - 1.0 : 0.5 * normal_quantile(alpha);
        return std::pow(x + q, 3);
    };
    return s;
}

double true_margin_quantile(const StructuralSpec& spec, double x, double alpha) {
    if (!spec.quantile) {
        throw UnsupportedError(spec.name + ": the causal margin has no closed form; use a Monte Carlo oracle");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("true_margin_quantile: alpha outside (0, 1)");
    return spec.quantile(x, alpha);
}

// ---------------------------------------------------------------------------
// longitudinal settings

namespace {

struct StepDraw {
    double z;
    double z_score;  // standardized innovation of Z_t given its parents
};

double survival_rate(int setting, double x, double c) {
    switch (setting) {
        case 1: return 0.3 + 0.2 * x + 0.1 * c;
        case 2: return 0.5 + 0.2 * x + 0.2 * c;
        case 3: return 0.1 + 0.3 * x + 0.1 * c;
    }
    throw SpecError("no survival rate for setting " + std::to_string(setting));
}

}  // namespace

LongitudinalSpec make_longitudinal(int setting, std::size_t horizon) {
    if (setting < 1 || setting > 4) throw SpecError("unknown longitudinal setting " + std::to_string(setting));
    if (horizon < 1) throw SpecError("longitudinal horizon must be >= 1");
    LongitudinalSpec s;
    s.setting = setting;
    s.horizon = horizon;
    s.kind = setting == 4 ? SeqKind::Seq : SeqKind::Surv;
    return s;
}

TrajectoryBatch LongitudinalSpec::simulate(std::size_t n, Rng& rng) const {
    return simulate_regime(Matrix(), std::nullopt, n, rng);
}

TrajectoryBatch LongitudinalSpec::simulate_regime(const Matrix& xbar, const std::optional<std::vector<double>>& c,
                                                  std::size_t n, Rng& rng) const {
    const bool forced = !xbar.empty();
    if (forced && (xbar.rows() != horizon || xbar.cols() != 1)) {
        throw DimensionError("regime must be [T x 1] with T = " + std::to_string(horizon));
    }
    if (c && c->size() != 1) throw DimensionError("baseline C has one column");
    const int st = setting;
    TrajectoryBatch b = TrajectoryBatch::empty(kind, n, horizon, 1, 1, 1, 1);
    const double sqrt_half = std::sqrt(0.5);

    for (std::size_t i = 0; i < n; ++i) {
        double cv;
        if (c) {
            cv = c->front();
        } else if (st == 2) {
            cv = rng.exponential(1.0);
        } else if (st == 4) {
            cv = rng.normal();
        } else {
            cv = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
        b.c(i, 0) = cv;

        double x_prev = 0.0, x_prev2 = 0.0, z_prev = 0.0, score_prev = 0.0;
        bool alive = true;
        for (std::size_t t = 0; t < horizon; ++t) {
            if (!alive) {
                b.at_risk(i, t) = 0.0;
                b.y[t](i, 0) = 1.0;
                continue;
            }
            // Z_t and its standardized innovation.
            StepDraw zd{};
            const double innov = rng.normal();
            switch (st) {
                case 1:
                case 3:
                    zd.z = -0.5 + 0.5 * x_prev + 0.25 * cv + sqrt_half * innov;
                    break;
                case 2:
                    zd.z = t == 0 ? innov : 0.7 * z_prev + 0.2 * x_prev + innov;
                    break;
                case 4:
                    zd.z = -0.5 + 0.5 * x_prev + 0.5 * z_prev + 0.5 * cv + sqrt_half * innov;
                    break;
            }
            zd.z_score = innov;

            double xv;
            if (forced) {
                xv = xbar(t, 0);
            } else {
                switch (st) {
                    case 1:
                        xv = rng.bernoulli(expit(0.2 * zd.z + 0.1)) ? 1.0 : 0.0;
                        break;
                    case 2:
                        xv = rng.bernoulli(expit(t == 0 ? -0.5 + 0.5 * zd.z : -0.5 + 0.25 * x_prev + 0.5 * zd.z))
                                 ? 1.0
                                 : 0.0;
                        break;
                    case 3:
                        xv = 1.2 + 0.1 * zd.z + 2.0 * cv + std::sqrt(0.1) * rng.normal();
                        break;
                    default:
                        xv = 2.0 * zd.z + 0.1 * cv + rng.normal();
                        break;
                }
            }

            // Outcome normal score from the copula.
            const double fresh = rng.normal();
            double score;
            if (st == 2) {
                // D-vine on (Z_{t-1}, Z_t, Y_t): rho(Y, Z_{t-1}) = 0.2, rho(Y, Z_t | Z_{t-1}) = 0.3.
                const double r1 = 0.2;
                const double r2 = 0.3;
                const double prev = t == 0 ? rng.normal() : score_prev;
                score = r1 * prev + r2 * std::sqrt(1 - r1 * r1) * zd.z_score +
                        std::sqrt((1 - r1 * r1) * (1 - r2 * r2)) * fresh;
            } else {
                const double rho = st == 4 ? 0.24 : 0.4;
                score = rho * zd.z_score + std::sqrt(1 - rho * rho) * fresh;
            }
            const double u = std::clamp(normal_cdf(score), 1e-16, 1.0 - 1e-16);

            double yv;
            if (st == 4) {
                yv = 2.0 * xv + x_prev + 0.5 * x_prev2 + cv + normal_quantile(u);
            } else {
                const double rate = survival_rate(st, xv, cv);
                const double residual = -std::log1p(-u) / rate;
                yv = residual < 1.0 ? 1.0 : 0.0;
                if (yv == 1.0) alive = false;
            }

            b.z[t](i, 0) = zd.z;
            b.x[t](i, 0) = xv;
            b.y[t](i, 0) = yv;
            x_prev2 = x_prev;
            x_prev = xv;
            z_prev = zd.z;
            score_prev = zd.z_score;
        }
    }
    if (kind == SeqKind::Surv) b.at_risk = TrajectoryBatch::mask_from_outcomes(b.y);
    return b;
}

double LongitudinalSpec::longitudinal_mean(const Matrix& xbar, double c, std::size_t t) const {
    if (setting != 4) throw UnsupportedError("longitudinal_mean is defined for setting 4");
    if (t >= xbar.rows()) throw DimensionError("longitudinal_mean: t beyond the regime");
    const double x0 = xbar(t, 0);
    const double x1 = t >= 1 ? xbar(t - 1, 0) : 0.0;
    const double x2 = t >= 2 ? xbar(t - 2, 0) : 0.0;
    return 2.0 * x0 + x1 + 0.5 * x2 + c;
}

double LongitudinalSpec::cumulative_incidence(double x, std::size_t t) const {
    const double tt = static_cast<double>(t);
    switch (setting) {
        case 1:
        case 3:
            // C ~ Bern(0.5); the per-step hazard given survival is 1 - exp(-rate).
            return 1.0 - 0.5 * (std::exp(-tt * survival_rate(setting, x, 0.0)) +
                                std::exp(-tt * survival_rate(setting, x, 1.0)));
        default:
            // Setting 2 carries the previous step's score into the copula, so
            // survival selects on it; no closed form.
            throw UnsupportedError("cumulative_incidence has a closed form for settings 1 and 3 only");
    }
}

}  // namespace fren
