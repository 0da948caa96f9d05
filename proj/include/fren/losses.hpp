#pragma once

// Energy score, energy distance and the taped training objectives.
//
// Taped losses lay out generated samples as [n*m x d] with row i*m + j holding
// the j-th draw for observation i.

#include "fren/ndiff.hpp"
#include "fren/nets.hpp"
#include "fren/rng.hpp"

#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace fren {

class DegenerateSampleError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct EnergyLossConfig {
    std::size_t m = 2;            // noise draws per observation
    std::size_t minibatch = 256;

    void validate() const;
};

/// Unbiased energy score of samples [m x d] at observation u (higher is better).
double energy_score(const Matrix& samples, std::span<const double> u);

/// Unbiased two-sample energy distance; may be negative at small sizes.
double energy_distance(const Matrix& p, const Matrix& q);

/// mean_i mean_j |s_ij - t_i| - 1/(2m(m-1)) mean_i sum_{j != j'} |s_ij - s_ij'|.
Var energy_loss(Tape& tape, Var samples, const Matrix& targets, std::size_t m);

/// Energy loss of net([cond_i | noise_ij]) against target_i. cond may have zero
/// columns. noise is [n*m x net.noise_dim()].
Var conditional_energy_loss(Tape& tape, const GeneratorNet& net, const Matrix& cond, const Matrix& target,
                            std::size_t m, const Matrix& noise);
Var conditional_energy_loss(Tape& tape, const GeneratorNet& net, const Matrix& cond, const Matrix& target,
                            std::size_t m, Rng& rng);

Var loss_zx(Tape& tape, const GeneratorNet& g, const Matrix& batch, std::size_t m, const Matrix& eps);
Var loss_zx(Tape& tape, const GeneratorNet& g, const Matrix& batch, const EnergyLossConfig& cfg, Rng& rng);

Var loss_aux(Tape& tape, const GeneratorNet& e, const Matrix& x0, const Matrix& z, std::size_t m,
             const Matrix& zeta);
Var loss_aux(Tape& tape, const GeneratorNet& e, const Matrix& x0, const Matrix& z, const EnergyLossConfig& cfg,
             Rng& rng);

/// Noise for the outcome objective. xi and xi_prime are [n*m x d_y]; eta_target is [n x d_y].
struct OutcomeNoise {
    Matrix xi;
    Matrix xi_prime;
    Matrix eta_target;

    static OutcomeNoise draw(std::size_t n, std::size_t m, std::size_t d_y, Rng& rng);
};

/// Outcome objective on prepared inputs.
///   f_cond        [n x df]      what f conditions on (the treatment, plus history in the sequential model)
///   h_cond        [n x dh]      what h conditions on for the fit term
///   h_cond_prime  [n*m x dh]    h's conditioning with Z replaced by an independent Z'
Var outcome_energy_loss(Tape& tape, const Margin& f, const GeneratorNet& h, const Matrix& f_cond,
                        const Matrix& h_cond, const Matrix& h_cond_prime, const Matrix& y, std::size_t m,
                        const OutcomeNoise& noise);

/// Z' by an independent uniform permutation of the batch for each draw j.
struct PermutationSource {};

/// Z' drawn from the auxiliary model e given the row's X0 columns.
struct AuxiliarySource {
    const GeneratorNet* e = nullptr;
    std::vector<std::size_t> x0_columns;  // indices into the treatment block
};

using ZPrimeSource = std::variant<std::monostate, PermutationSource, AuxiliarySource>;

/// [n*m x d_z] draws of Z' for each (row, draw) pair.
Matrix draw_zprime(const Matrix& z, const Matrix& x, const ZPrimeSource& source, std::size_t m, Rng& rng);

/// Outcome objective for static data: h sees [z | x], f sees x. Throws
/// ConfigurationError when no source is given, or when X0 is declared and the
/// source is a permutation.
Var loss_y_given_zx(Tape& tape, const Margin& f, const GeneratorNet& h, const Matrix& z, const Matrix& x,
                    const Matrix& y, const ZPrimeSource& source, bool x0_declared, const EnergyLossConfig& cfg,
                    Rng& rng);

}  // namespace fren
