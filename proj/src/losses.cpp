#include "fren/losses.hpp"

#include <cmath>
#include <string>

namespace fren {

void EnergyLossConfig::validate() const {
    if (m < 2) throw DegenerateSampleError("energy loss needs m >= 2 draws per observation");
    if (minibatch < 1) throw ConfigurationError("minibatch size must be >= 1");
}

namespace {

double row_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

// Sum over unordered pairs j < j' of |a_j - a_j'|.
double within_pair_sum(const Matrix& a) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.rows(); ++j)
        for (std::size_t k = j + 1; k < a.rows(); ++k) s += row_distance(a.row(j), a.row(k));
    return s;
}

void require_rows(const Matrix& a, std::size_t rows, const char* what) {
    if (a.rows() != rows) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + " rows, got " +
                             std::to_string(a.rows()));
    }
}

}  // namespace

double energy_score(const Matrix& samples, std::span<const double> u) {
    const std::size_t m = samples.rows();
    if (m < 2) throw DegenerateSampleError("energy_score: need at least 2 samples");
    if (samples.cols() != u.size()) throw DimensionError("energy_score: observation width differs from samples");
    double to_obs = 0.0;
    for (std::size_t j = 0; j < m; ++j) to_obs += row_distance(samples.row(j), u);
    const double md = static_cast<double>(m);
    return 2.0 * within_pair_sum(samples) / (2.0 * md * (md - 1.0)) - to_obs / md;
}

double energy_distance(const Matrix& p, const Matrix& q) {
    if (p.rows() < 2 || q.rows() < 2) throw DegenerateSampleError("energy_distance: need at least 2 samples per side");
    if (p.cols() != q.cols()) throw DimensionError("energy_distance: sample widths differ");
    double cross = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < q.rows(); ++j) cross += row_distance(p.row(i), q.row(j));
    const double np = static_cast<double>(p.rows());
    const double nq = static_cast<double>(q.rows());
    const double within_p = 2.0 * within_pair_sum(p) / (np * (np - 1.0));
    const double within_q = 2.0 * within_pair_sum(q) / (nq * (nq - 1.0));
    return 2.0 * cross / (np * nq) - within_p - within_q;
}

Var energy_loss(Tape& tape, Var samples, const Matrix& targets, std::size_t m) {
    if (m < 2) throw DegenerateSampleError("energy_loss: need m >= 2");
    const std::size_t n = targets.rows();
    if (samples.rows() != n * m || samples.cols() != targets.cols()) {
        throw DimensionError("energy_loss: samples " + samples.value().shape_string() + " vs targets " +
                             targets.shape_string() + " with m=" + std::to_string(m));
    }
    Var fit = mean(row_norms(sub(samples, tape.constant(repeat_rows(targets, m)))));

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    left.reserve(n * m * (m - 1) / 2);
    right.reserve(n * m * (m - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = j + 1; k < m; ++k) {
                left.push_back(i * m + j);
                right.push_back(i * m + k);
            }
        }
    }
    // Mean over unordered pairs equals 2/(m(m-1)) sum_{j<j'}, so halve it.
    Var spread = mean(row_norms(sub(gather_rows(samples, std::move(left)), gather_rows(samples, std::move(right)))));
    return sub(fit, scale(spread, 0.5));
}

Var conditional_energy_loss(Tape& tape, const GeneratorNet& net, const Matrix& cond, const Matrix& target,
                            std::size_t m, const Matrix& noise) {
    const std::size_t n = target.rows();
    require_rows(cond, n, "conditional_energy_loss cond");
    require_rows(noise, n * m, "conditional_energy_loss noise");
    Matrix input = cond.cols() == 0 ? noise : hconcat(repeat_rows(cond, m), noise);
    return energy_loss(tape, net.forward(tape, tape.constant(std::move(input))), target, m);
}

Var conditional_energy_loss(Tape& tape, const GeneratorNet& net, const Matrix& cond, const Matrix& target,
                            std::size_t m, Rng& rng) {
    return conditional_energy_loss(tape, net, cond, target, m, rng.normal_matrix(target.rows() * m, net.noise_dim()));
}

Var loss_zx(Tape& tape, const GeneratorNet& g, const Matrix& batch, std::size_t m, const Matrix& eps) {
    if (g.role() != Role::PastG) throw ContractError("loss_zx: expected a PastG net");
    return conditional_energy_loss(tape, g, Matrix(batch.rows(), 0), batch, m, eps);
}

Var loss_zx(Tape& tape, const GeneratorNet& g, const Matrix& batch, const EnergyLossConfig& cfg, Rng& rng) {
    cfg.validate();
    return loss_zx(tape, g, batch, cfg.m, rng.normal_matrix(batch.rows() * cfg.m, g.noise_dim()));
}

Var loss_aux(Tape& tape, const GeneratorNet& e, const Matrix& x0, const Matrix& z, std::size_t m,
             const Matrix& zeta) {
    if (e.role() != Role::AuxE) throw ContractError("loss_aux: expected an AuxE net");
    return conditional_energy_loss(tape, e, x0, z, m, zeta);
}

Var loss_aux(Tape& tape, const GeneratorNet& e, const Matrix& x0, const Matrix& z, const EnergyLossConfig& cfg,
             Rng& rng) {
    cfg.validate();
    return loss_aux(tape, e, x0, z, cfg.m, rng.normal_matrix(z.rows() * cfg.m, e.noise_dim()));
}

OutcomeNoise OutcomeNoise::draw(std::size_t n, std::size_t m, std::size_t d_y, Rng& rng) {
    OutcomeNoise out;
    out.xi = rng.normal_matrix(n * m, d_y);
    out.xi_prime = rng.normal_matrix(n * m, d_y);
    out.eta_target = rng.normal_matrix(n, d_y);
    return out;
}

Var outcome_energy_loss(Tape& tape, const Margin& f, const GeneratorNet& h, const Matrix& f_cond,
                        const Matrix& h_cond, const Matrix& h_cond_prime, const Matrix& y, std::size_t m,
                        const OutcomeNoise& noise) {
    if (h.role() != Role::CopulaH) throw ContractError("outcome loss: expected a CopulaH net");
    const std::size_t n = y.rows();
    require_rows(f_cond, n, "outcome loss f_cond");
    require_rows(h_cond, n, "outcome loss h_cond");
    require_rows(h_cond_prime, n * m, "outcome loss h_cond_prime");
    require_rows(noise.xi, n * m, "outcome loss xi");
    require_rows(noise.xi_prime, n * m, "outcome loss xi_prime");
    require_rows(noise.eta_target, n, "outcome loss eta_target");

    Var eta_tilde = h.forward(tape, tape.constant(hconcat(repeat_rows(h_cond, m), noise.xi)));
    Var y_hat = forward_f(tape, f, tape.constant(repeat_rows(f_cond, m)), eta_tilde);
    Var fit = energy_loss(tape, y_hat, y, m);

    Var eta_bar = h.forward(tape, tape.constant(hconcat(h_cond_prime, noise.xi_prime)));
    Var normality = energy_loss(tape, eta_bar, noise.eta_target, m);
    return add(fit, normality);
}

Matrix draw_zprime(const Matrix& z, const Matrix& x, const ZPrimeSource& source, std::size_t m, Rng& rng) {
    const std::size_t n = z.rows();
    require_rows(x, n, "draw_zprime x");
    if (std::holds_alternative<std::monostate>(source)) {
        throw ConfigurationError("outcome loss: no source for the independent Z' draws");
    }
    if (std::holds_alternative<PermutationSource>(source)) {
        Matrix out(n * m, z.cols());
        for (std::size_t j = 0; j < m; ++j) {
            const auto perm = rng.permutation(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto src = z.row(perm[i]);
                std::copy(src.begin(), src.end(), out.row(i * m + j).begin());
            }
        }
        return out;
    }
    const auto& aux = std::get<AuxiliarySource>(source);
    if (aux.e == nullptr) throw ConfigurationError("outcome loss: auxiliary source has no model");
    if (aux.x0_columns.empty()) throw ConfigurationError("outcome loss: auxiliary source has no X0 columns");
    Matrix x0(n, aux.x0_columns.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < aux.x0_columns.size(); ++k) x0(i, k) = x(i, aux.x0_columns.at(k));
    Matrix zeta = rng.normal_matrix(n * m, aux.e->noise_dim());
    Matrix out = forward_e(*aux.e, repeat_rows(x0, m), zeta);
    if (out.cols() != z.cols()) throw DimensionError("auxiliary model output width differs from Z");
    return out;
}

Var loss_y_given_zx(Tape& tape, const Margin& f, const GeneratorNet& h, const Matrix& z, const Matrix& x,
                    const Matrix& y, const ZPrimeSource& source, bool x0_declared, const EnergyLossConfig& cfg,
                    Rng& rng) {
    cfg.validate();
    if (x0_declared && !std::holds_alternative<AuxiliarySource>(source)) {
        throw ConfigurationError("outcome loss: X0 is declared, so Z' must come from the auxiliary model");
    }
    const std::size_t n = y.rows();
    require_rows(z, n, "loss_y_given_zx z");
    require_rows(x, n, "loss_y_given_zx x");
    Matrix zprime = draw_zprime(z, x, source, cfg.m, rng);
    Matrix h_cond_prime = hconcat(zprime, repeat_rows(x, cfg.m));
    OutcomeNoise noise = OutcomeNoise::draw(n, cfg.m, y.cols(), rng);
    return outcome_energy_loss(tape, f, h, x, hconcat(z, x), h_cond_prime, y, cfg.m, noise);
}

}  // namespace fren
