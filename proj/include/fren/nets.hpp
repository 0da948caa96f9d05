#pragma once

// Generator networks: one MLP shape shared by the past model g, the causal
// margin f, the dependency model h and the auxiliary model e. Conditioning
// inputs and noise are concatenated at the input layer; hidden layers use ReLU.

#include "fren/distributions.hpp"
#include "fren/ndiff.hpp"
#include "fren/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

namespace fren {

enum class Role : std::uint32_t { PastG = 0, MarginF = 1, CopulaH = 2, AuxE = 3, BaselineGc = 4 };

const char* role_name(Role role);

struct MlpSpec {
    std::size_t in_dim = 1;
    std::size_t out_dim = 1;
    std::size_t hidden_layers = 3;
    std::size_t hidden_width = 100;

    void validate() const;
    bool operator==(const MlpSpec&) const = default;
};

class GeneratorNet {
public:
    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    GeneratorNet(Role role, std::size_t cond_dim, std::size_t noise_dim, std::size_t out_dim,
                 std::size_t hidden_layers, std::size_t hidden_width, Rng& init);

    /// All weights and biases zero.
    static GeneratorNet zeros(Role role, std::size_t cond_dim, std::size_t noise_dim, std::size_t out_dim,
                              std::size_t hidden_layers, std::size_t hidden_width);

    Role role() const noexcept { return role_; }
    const MlpSpec& spec() const noexcept { return spec_; }
    std::size_t cond_dim() const noexcept { return cond_dim_; }
    std::size_t noise_dim() const noexcept { return noise_dim_; }
    std::size_t out_dim() const noexcept { return spec_.out_dim; }
    std::size_t layer_count() const noexcept { return weights_.size(); }

    Matrix& weight(std::size_t layer) { return weights_.at(layer); }
    const Matrix& weight(std::size_t layer) const { return weights_.at(layer); }
    Matrix& bias(std::size_t layer) { return biases_.at(layer); }
    const Matrix& bias(std::size_t layer) const { return biases_.at(layer); }
    std::vector<Matrix*> parameters();

    /// input is [batch x (cond_dim + noise_dim)].
    Var forward(Tape& tape, Var input) const;
    Matrix evaluate(const Matrix& input) const;

    void write(std::ostream& os) const;
    static GeneratorNet read(std::istream& is);

    bool operator==(const GeneratorNet&) const = default;

private:
    GeneratorNet(Role role, std::size_t cond_dim, std::size_t noise_dim, MlpSpec spec);
    void check_input(std::size_t cols) const;

    Role role_;
    std::size_t cond_dim_;
    std::size_t noise_dim_;
    MlpSpec spec_;
    std::vector<Matrix> weights_;  // [fan_in x fan_out]
    std::vector<Matrix> biases_;   // [1 x fan_out]
};

/// Pre-additive-noise margin f(x + f1(eta)) with scalar treatment and outcome.
struct PreAnmMargin {
    GeneratorNet outer;  // f : R -> R
    GeneratorNet noise;  // f1: R -> R

    PreAnmMargin(std::size_t hidden_layers, std::size_t hidden_width, Rng& init);
    PreAnmMargin(GeneratorNet outer_net, GeneratorNet noise_net);

    Var forward(Tape& tape, Var x, Var eta) const;
    Matrix evaluate(const Matrix& x, const Matrix& eta) const;
    std::vector<Matrix*> parameters();

    bool operator==(const PreAnmMargin&) const = default;
};

struct MonotonicityReport {
    double min_slope_outer = 0.0;
    double min_slope_noise = 0.0;
    std::size_t violations_outer = 0;  // grid steps with slope < -tolerance
    std::size_t violations_noise = 0;
};

MonotonicityReport probe_monotonicity(const PreAnmMargin& margin, double lo = -5.0, double hi = 5.0,
                                      std::size_t points = 101, double tolerance = 1e-6);

/// weight * sum over probe-grid steps of max(0, -slope), for both f and f1.
Var monotonicity_penalty(Tape& tape, const PreAnmMargin& margin, double weight, double lo = -5.0,
                         double hi = 5.0, std::size_t points = 101);

/// A fixed causal margin f(x, eta) = Q_{Y(x)}(Phi(eta)); not trainable.
struct ClosedFormMargin {
    MarginLaw law;

    Matrix evaluate(const Matrix& x, const Matrix& eta) const;
    bool operator==(const ClosedFormMargin&) const = default;
};

using Margin = std::variant<GeneratorNet, PreAnmMargin, ClosedFormMargin>;

std::size_t margin_treatment_dim(const Margin& f);
std::size_t margin_outcome_dim(const Margin& f);
std::vector<Matrix*> margin_parameters(Margin& f);

Matrix forward_g(const GeneratorNet& g, const Matrix& noise);
Matrix forward_f(const Margin& f, const Matrix& x, const Matrix& eta);
Matrix forward_h(const GeneratorNet& h, const Matrix& z, const Matrix& x, const Matrix& xi);
Matrix forward_e(const GeneratorNet& e, const Matrix& x0, const Matrix& zeta);

Var forward_f(Tape& tape, const Margin& f, Var x, Var eta);

void write_margin(std::ostream& os, const Margin& f);
Margin read_margin(std::istream& is);

}  // namespace fren
