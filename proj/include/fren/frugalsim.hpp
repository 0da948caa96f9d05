#pragma once

// Ground-truth simulators. A frugal spec fixes the past law of (Z, X), a
// closed-form causal margin for Y(x) and a Gaussian copula between Y and some
// Z coordinates; structural specs write Y | Z, X down directly.

#include "fren/distributions.hpp"
#include "fren/ndiff.hpp"
#include "fren/rng.hpp"
#include "fren/trajectory.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fren {

class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// How several Y-Z links combine. Joint treats the rho values as entries of one
/// correlation matrix (linked Z coordinates mutually independent). Vine treats
/// them as a chain of partial correlations, Y with Z_1, then Y with Z_2 given
/// Z_1, and so on; always valid for |rho| < 1.
enum class CopulaMode { Joint, Vine };

struct CopulaLink {
    std::size_t z_column = 0;  // the linked coordinate must be N(0,1) in law
    double rho = 0.0;
};

struct FrugalSpec {
    std::string name;
    std::size_t d_z = 0;
    std::size_t d_x = 1;
    std::vector<bool> binary;  // per (Z, X) column
    std::function<Matrix(std::size_t n, Rng& rng)> past;  // [n x (d_z + d_x)]
    MarginLaw margin;
    std::vector<CopulaLink> copula;
    CopulaMode mode = CopulaMode::Joint;

    /// Throws SpecError for |rho| >= 1, a non positive definite joint copula,
    /// or a margin that does not match the treatment width.
    void validate() const;

    /// Pearson correlation between Y's normal score and each linked coordinate.
    std::vector<double> implied_correlations() const;

    /// Y's normal score given the linked coordinates' values (one row) and a fresh N(0,1) draw.
    double outcome_score(std::span<const double> linked, double fresh) const;
};

/// [n x (d_z + d_x + 1)] rows of (Z, X, Y). The (Z, X) block depends only on
/// the past sampler and rng, so swapping margins leaves it unchanged.
Matrix simulate_frugal(const FrugalSpec& spec, std::size_t n, Rng& rng);

/// n draws of Y(x): the margin at a fixed treatment.
Matrix simulate_margin(const FrugalSpec& spec, std::span<const double> x, std::size_t n, Rng& rng);

double true_margin_quantile(const FrugalSpec& spec, std::span<const double> x, double alpha);

/// I, C ~ N(0, I_5) each; X ~ Bern(expit(beta_i * sum(I) + sum(C))); Y(x) ~ N(2x, 1)
/// linked to every C_j with rho = 2 expit(1) - 1 as a vine.
FrugalSpec make_weak_overlap(double beta_i);

/// Z ~ N(0, I_6), X ~ Bern(0.5), Y(x) ~ N(2x, 1) linked to Z_5 and Z_6 (columns 4, 5).
FrugalSpec make_rct();

/// Probability X = 1 given the Z block of make_weak_overlap.
double weak_overlap_propensity(double beta_i, std::span<const double> z);

double copula_rho_default();  // 2 expit(1) - 1

/// Ground truth where Y | Z, X is written structurally; the causal margin is
/// only known through its mean (and optionally quantiles).
struct StructuralSpec {
    std::string name;
    std::size_t d_z = 0;
    std::size_t d_x = 1;
    std::function<Matrix(std::size_t n, Rng& rng)> sample;                // [n x (d_z + d_x + 1)]
    std::function<Matrix(double x, std::size_t n, Rng& rng)> sample_do;   // [n x 1]
    std::function<double(double x)> mu;                                   // E[Y(x)]
    std::function<double(double x, double alpha)> quantile;               // optional
};

/// "HiranoImbens" or "Sun", p covariates.
StructuralSpec make_continuous(const std::string& name, std::size_t p = 200);

enum class PreAnmNoise { Uniform, Normal };

/// Y = (X + e)^3, X ~ Unif[x_lo, x_hi], e ~ Unif[-1, 1] or N(0, 0.5^2), plus one
/// independent N(0,1) covariate. The median of Y(x) is x^3.
StructuralSpec make_pre_anm_cubic(PreAnmNoise noise, double x_lo = -1.0, double x_hi = 1.0);

double true_margin_quantile(const StructuralSpec& spec, double x, double alpha);

/// Longitudinal ground truths: settings 1-3 are survival data with an
/// exponential residual lifetime turned into an event when below 1; setting 4
/// has a continuous outcome.
struct LongitudinalSpec {
    int setting = 1;
    std::size_t horizon = 5;
    SeqKind kind = SeqKind::Surv;

    TrajectoryBatch simulate(std::size_t n, Rng& rng) const;

    /// Same mechanism with X_t forced to xbar(t, .) for every unit. When c is
    /// given, every unit gets that baseline. Returns the full batch, so the
    /// outcome blocks are the potential outcomes under the regime.
    TrajectoryBatch simulate_regime(const Matrix& xbar, const std::optional<std::vector<double>>& c, std::size_t n,
                                    Rng& rng) const;

    /// Closed-form E[Y_t(xbar) | C = c] for setting 4.
    double longitudinal_mean(const Matrix& xbar, double c, std::size_t t) const;

    /// Closed-form P(event by step t | do(constant x)) averaged over C, settings 1-3.
    double cumulative_incidence(double x, std::size_t t) const;
};

LongitudinalSpec make_longitudinal(int setting, std::size_t horizon = 5);

}  // namespace fren
