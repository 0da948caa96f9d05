#pragma once

// Static frengression: a past model g for (Z, X), a causal margin f for Y(x)
// and a dependency model h for the noise of Y given (Z, X). Fitting is two
// stage: g alone, then (f, h) jointly, with an auxiliary e for Z | X0 when the
// treatment block is split.

#include "fren/losses.hpp"
#include "fren/nets.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fren {

enum class ColumnKind { Continuous, Binary };

struct ColumnSchema {
    std::vector<std::string> z_names, x_names, y_names;
    std::vector<ColumnKind> z_kinds, x_kinds, y_kinds;
    /// Indices into the X block forming X0; empty when X is not split.
    std::vector<std::size_t> x0;

    std::size_t d_z() const noexcept { return z_names.size(); }
    std::size_t d_x() const noexcept { return x_names.size(); }
    std::size_t d_y() const noexcept { return y_names.size(); }
    std::size_t width() const noexcept { return d_z() + d_x() + d_y(); }
    bool has_x0() const noexcept { return !x0.empty(); }

    /// Kinds of all columns in (Z, X, Y) order.
    std::vector<ColumnKind> kinds() const;

    void validate() const;

    /// All continuous, named Z1.., X1.., Y1.. (or X / Y when one column).
    static ColumnSchema continuous(std::size_t d_z, std::size_t d_x, std::size_t d_y);

    bool operator==(const ColumnSchema&) const = default;
};

struct FitConfig {
    std::size_t epochs = 1000;
    double lr = 1e-4;
    std::size_t hidden_layers = 3;
    std::size_t hidden_width = 100;
    std::size_t m = 2;
    std::size_t minibatch = 256;
    std::uint64_t seed = 0;
    /// Fit f as f(x + f1(eta)); needs scalar X and Y.
    bool pre_anm = false;
    double monotonicity_weight = 1.0;
    /// Fit on centred and scaled continuous columns.
    bool standardize = true;

    void validate() const;
    EnergyLossConfig loss_config() const { return {m, minibatch}; }
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, std::size_t epoch) : std::runtime_error(what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

struct TrainingLog {
    std::vector<double> g;   // mean minibatch loss per epoch
    std::vector<double> e;
    std::vector<double> fh;

    bool operator==(const TrainingLog&) const = default;
};

/// Per-column affine map to the units the nets were fitted in:
/// fitted = (raw - loc) / scale.
struct Standardizer {
    std::vector<double> loc;
    std::vector<double> scale;

    static Standardizer identity(std::size_t width);
    static Standardizer fit(const Matrix& data, const std::vector<ColumnKind>& kinds);

    /// Columns [start, start + block.cols()) of the full layout.
    Matrix forward(const Matrix& block, std::size_t start) const;
    Matrix inverse(const Matrix& block, std::size_t start) const;
    bool operator==(const Standardizer&) const = default;
};

struct FrengressionModel {
    ColumnSchema schema;
    GeneratorNet g;
    Margin f;
    GeneratorNet h;
    std::optional<GeneratorNet> e;
    Standardizer scaling;
    TrainingLog log;

    /// Shapes of every component against the schema.
    void validate() const;
};

using BatchLoss = std::function<Var(Tape&, std::span<const std::size_t> rows)>;

/// Adam over shuffled minibatches of n rows for cfg.epochs epochs. Returns the
/// mean minibatch loss per epoch; throws TrainingError on a non-finite loss.
std::vector<double> train_loop(const std::string& stage, std::size_t n, const FitConfig& cfg,
                               std::span<Matrix* const> params, Rng& shuffle, const BatchLoss& batch_loss);

/// Input errors (InputError) for NaN, non-binary entries in binary columns,
/// fewer than two rows or a width that does not match the schema.
FrengressionModel fit(const Matrix& data, const ColumnSchema& schema, const FitConfig& cfg);

/// Fresh nets with the architecture fit() would build; for tests and hand-set models.
FrengressionModel make_model(const ColumnSchema& schema, const FitConfig& cfg, Rng& init);

/// Binary columns are rounded with P(1) = clamp(v, 0, 1).
Matrix sample_past(const FrengressionModel& model, std::size_t n, Rng& rng);
Matrix sample_interventional(const FrengressionModel& model, std::span<const double> x, std::size_t n, Rng& rng);
Matrix sample_joint(const FrengressionModel& model, std::size_t n, Rng& rng);
/// Past from g, dependency noise from h at the sampled (Z, X), outcome at x_prime.
Matrix sample_swig(const FrengressionModel& model, std::span<const double> x_prime, std::size_t n, Rng& rng);

/// Draws of Z given X0 = x0 from the auxiliary model, in data units.
Matrix sample_aux(const FrengressionModel& model, std::span<const double> x0, std::size_t n, Rng& rng);

/// Outcome draws for given treatments and margin noise, in data units. Binary
/// outcome columns are left unrounded.
Matrix margin_draws(const FrengressionModel& model, const Matrix& x, const Matrix& eta);

/// Copy of the model with f swapped. Learned margins act on standardized
/// units, closed-form margins on data units. Throws DimensionError.
FrengressionModel replace_margin(const FrengressionModel& model, Margin new_f);

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Mean difference of interventional draws at x1 and x0, s.e. sqrt(v1/n + v0/n).
Estimate estimate_ate(const FrengressionModel& model, std::span<const double> x1, std::span<const double> x0,
                      std::size_t draws, Rng& rng);

/// Empirical alpha-quantile of the first outcome column; 0 < alpha < 1.
double estimate_quantile(const FrengressionModel& model, std::span<const double> x, double alpha,
                         std::size_t draws, Rng& rng);

// ---------------------------------------------------------------------------
// Identification check on a discrete structural model: binary X0, Z in
// {0, 1, 2}, binary X1, binary Y, and a hidden binary U that drives Z and Y.

struct DiscreteScm {
    double p_u = 0.5;                                    // P(U = 1)
    double p_x0 = 0.5;                                   // P(X0 = 1)
    std::array<std::array<std::array<double, 3>, 2>, 2> p_z{};  // [x0][u][z]
    std::array<std::array<double, 3>, 2> p_x1{};                // P(X1 = 1 | x0, z)
    std::array<std::array<std::array<std::array<double, 2>, 2>, 3>, 2> p_y{};  // P(Y = 1 | x0, z, x1, u)

    static DiscreteScm random(Rng& rng);
    /// Z, X1 and Y ignore everything upstream.
    static DiscreteScm independent();
};

struct IdentifiabilityReport {
    /// P(Y(x0, x1) = 1), indexed [x0][x1].
    std::array<std::array<double, 2>, 2> direct{};
    std::array<std::array<double, 2>, 2> adjusted{};
    double max_discrepancy = 0.0;
};

/// Throws ContractError when some (x0, z, x1) cell has zero probability.
IdentifiabilityReport check_identifiability_smallcase(const DiscreteScm& scm);
IdentifiabilityReport check_identifiability_smallcase();

// ---------------------------------------------------------------------------
// I/O

/// Schema file: header "column,role,kind"; role in {z, x, x0, y}, kind in
/// {continuous, binary}. x0 columns belong to X and are flagged as X0.
ColumnSchema read_schema(std::istream& is);
void write_schema(std::ostream& os, const ColumnSchema& schema);

/// Reads a CSV with a header and returns its columns in schema order.
Matrix read_dataset(std::istream& is, const ColumnSchema& schema);
void write_dataset(std::ostream& os, const ColumnSchema& schema, const Matrix& data);

void write_model(std::ostream& os, const FrengressionModel& model);
FrengressionModel read_model(std::istream& is);

void write_schema_block(std::ostream& os, const ColumnSchema& schema);
ColumnSchema read_schema_block(std::istream& is);
void write_standardizer(std::ostream& os, const Standardizer& s);
Standardizer read_standardizer(std::istream& is);

}  // namespace fren
