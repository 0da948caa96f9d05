#pragma once

// Experiment harness: simulate from a catalog ground truth, fit, sample and
// score, replicated K times, with CSV outputs and a hashed manifest.

#include "fren/frengression.hpp"
#include "fren/seqfrengression.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fren {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Metrics {
    double bias = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
};

/// bias = mean(e) - truth, MAE = mean|e - truth|, RMSE = sqrt(mean (e - truth)^2).
Metrics metrics(std::span<const double> estimates, double truth);

struct MapeResult {
    double value = 0.0;
    std::size_t excluded = 0;  // grid points with |truth| < 1e-6
};

/// Mean of |est - truth| / |truth| over grid points with a usable truth.
MapeResult mape(std::span<const double> estimates, std::span<const double> truth);

/// Per grid point: mean of the draws and their 2.5% and 97.5% quantiles.
struct Curve {
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> q025;
    std::vector<double> q975;
};

/// Interventional draws of the first outcome column at each x; scalar treatment.
Curve adrf_curve(const FrengressionModel& model, std::span<const double> grid, std::size_t draws, Rng& rng);

/// Pointwise average of curves on a common grid.
Curve average_curves(const std::vector<Curve>& curves);

enum class Estimand { Ate, Adrf, Quantile, RiskDifference, Km, LongitudinalMean };

Estimand parse_estimand(const std::string& name);
const char* estimand_name(Estimand e);

/// Catalog entries: WeakOverlap (param beta), RCT, Sun and HiranoImbens (param
/// p), PreAnmUniform and PreAnmNormal (params x_lo, x_hi), Setting1..Setting4.
std::vector<std::string> catalog_names();
bool is_longitudinal(const std::string& dgp);
Estimand default_estimand(const std::string& dgp);

struct ExperimentConfig {
    std::string dgp = "WeakOverlap";
    std::map<std::string, double> params;
    std::size_t n = 5000;
    std::size_t reps = 5;
    FitConfig fit;
    std::uint64_t seed = 0;
    std::optional<Estimand> estimand;  // catalog default when unset
    std::vector<double> x_grid;
    std::vector<double> ate_pair{1.0, 0.0};
    double alpha = 0.5;
    std::size_t horizon = 5;
    std::size_t draws = 1000;
    /// Training rows with treatment in (first, second] are dropped.
    std::optional<std::pair<double, double>> withhold;
    std::size_t threads = 1;
    std::string out_dir;  // empty: nothing is written

    Estimand resolved_estimand() const;
    /// x_grid, or the catalog default when empty; steps 0..T-1 for longitudinal means.
    std::vector<double> resolved_grid() const;
    double param(const std::string& key, double fallback) const;
    void validate() const;

    /// key = value lines in a fixed order; read back by apply_setting.
    std::vector<std::pair<std::string, std::string>> echo() const;
};

/// Sets one field from its key (the CLI flag name without dashes). Throws
/// std::invalid_argument for unknown keys or malformed values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// "key = value" lines; blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> read_settings(std::istream& is);

struct MetricReport {
    Estimand estimand = Estimand::Ate;
    double truth = 0.0;
    /// Scalar estimands: one per replication. Curve estimands: the error
    /// summary uses every (replication, grid point) pair.
    std::vector<double> estimates;
    Metrics summary;

    // Curve estimands.
    std::vector<double> grid;
    std::vector<std::vector<double>> curve_estimates;  // [rep][grid point]
    Curve band;                                          // averaged over replications
    std::vector<double> curve_truth;
    std::vector<double> per_x_rmse;
    std::optional<MapeResult> mape;

    // Survival fidelity.
    std::vector<double> km_sim;
    std::vector<double> km_true;

    std::vector<std::string> files;
};

/// Runs cfg.reps replications on up to cfg.threads workers. Replication k uses
/// the substream Replication/k of the seed, so results do not depend on the
/// thread count. Throws SpecError for an unknown DGP and IoError when writing fails.
MetricReport run_experiment(const ExperimentConfig& cfg);

struct StaticData {
    ColumnSchema schema;
    Matrix data;  // (Z, X, Y) in schema order
};

/// One draw of a static catalog DGP (all rows, no withholding).
StaticData simulate_static(const ExperimentConfig& cfg, std::size_t n, Rng& rng);
TrajectoryBatch simulate_longitudinal(const ExperimentConfig& cfg, std::size_t n, Rng& rng);

/// Ground-truth value of a scalar estimand, or the curve on cfg.x_grid.
double scalar_truth(const ExperimentConfig& cfg);
std::vector<double> curve_truth(const ExperimentConfig& cfg);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// Writes manifest.txt listing "sha256  bytes  name" for the given files.
void write_manifest(const std::string& dir, const std::vector<std::string>& files);

/// Recomputes every hash in dir/manifest.txt; returns the names that differ or are missing.
std::vector<std::string> verify_manifest(const std::string& dir);

}  // namespace fren
