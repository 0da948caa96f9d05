#include "fren/frengression.hpp"

#include "fren/csv.hpp"
#include "fren/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fren {

namespace {

std::vector<std::string> default_names(const char* prefix, std::size_t d) {
    if (d == 1) return {prefix};
    std::vector<std::string> out;
    for (std::size_t k = 0; k < d; ++k) out.push_back(prefix + std::to_string(k + 1));
    return out;
}

Matrix repeat_row_vector(std::span<const double> x, std::size_t n) {
    Matrix out(n, x.size());
    for (std::size_t i = 0; i < n; ++i) std::copy(x.begin(), x.end(), out.row(i).begin());
    return out;
}

void round_binary(Matrix& block, std::span<const ColumnKind> kinds, Rng& rng) {
    for (std::size_t i = 0; i < block.rows(); ++i)
        for (std::size_t k = 0; k < kinds.size(); ++k)
            if (kinds[k] == ColumnKind::Binary) block(i, k) = rng.uniform() < std::clamp(block(i, k), 0.0, 1.0) ? 1.0 : 0.0;
}

void check_data(const Matrix& data, const ColumnSchema& schema) {
    if (data.cols() != schema.width()) {
        throw InputError("data has " + std::to_string(data.cols()) + " columns, schema declares " +
                         std::to_string(schema.width()));
    }
    if (data.rows() < 2) throw InputError("need at least two rows to fit");
    const auto kinds = schema.kinds();
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t k = 0; k < data.cols(); ++k) {
            const double v = data(i, k);
            if (!std::isfinite(v)) {
                throw InputError("non-finite value at row " + std::to_string(i) + ", column " + std::to_string(k));
            }
            if (kinds[k] == ColumnKind::Binary && v != 0.0 && v != 1.0) {
                throw InputError("binary column " + std::to_string(k) + " holds " + format_double(v) + " at row " +
                                 std::to_string(i));
            }
        }
    }
}

}  // namespace

std::vector<ColumnKind> ColumnSchema::kinds() const {
    std::vector<ColumnKind> out(z_kinds);
    out.insert(out.end(), x_kinds.begin(), x_kinds.end());
    out.insert(out.end(), y_kinds.begin(), y_kinds.end());
    return out;
}

void ColumnSchema::validate() const {
    if (d_z() == 0 || d_x() == 0 || d_y() == 0) throw SpecError("schema: Z, X and Y each need a column");
    if (z_kinds.size() != d_z() || x_kinds.size() != d_x() || y_kinds.size() != d_y()) {
        throw SpecError("schema: one kind per column expected");
    }
    std::vector<bool> seen(d_x(), false);
    for (std::size_t k : x0) {
        if (k >= d_x()) throw SpecError("schema: X0 index " + std::to_string(k) + " outside the treatment block");
        if (seen[k]) throw SpecError("schema: X0 index repeated");
        seen[k] = true;
    }
}

ColumnSchema ColumnSchema::continuous(std::size_t d_z, std::size_t d_x, std::size_t d_y) {
    ColumnSchema s;
    s.z_names = default_names("Z", d_z);
    s.x_names = default_names("X", d_x);
    s.y_names = default_names("Y", d_y);
    s.z_kinds.assign(d_z, ColumnKind::Continuous);
    s.x_kinds.assign(d_x, ColumnKind::Continuous);
    s.y_kinds.assign(d_y, ColumnKind::Continuous);
    return s;
}

void FitConfig::validate() const {
    if (epochs == 0) throw SpecError("fit: epochs must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw SpecError("fit: learning rate must be positive");
    if (hidden_layers == 0 || hidden_width == 0) throw SpecError("fit: empty architecture");
    if (!(monotonicity_weight >= 0.0)) throw SpecError("fit: negative monotonicity weight");
    loss_config().validate();
}

Standardizer Standardizer::identity(std::size_t width) {
    return {std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

Standardizer Standardizer::fit(const Matrix& data, const std::vector<ColumnKind>& kinds) {
    if (kinds.size() != data.cols()) throw DimensionError("standardizer: one kind per column expected");
    Standardizer s = identity(data.cols());
    for (std::size_t k = 0; k < data.cols(); ++k) {
        if (kinds[k] == ColumnKind::Binary) continue;
        const auto col = column_values(data, k);
        s.loc[k] = sample_mean(col);
        const double sd = sample_sd(col);
        s.scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Matrix Standardizer::forward(const Matrix& block, std::size_t start) const {
    if (start + block.cols() > loc.size()) throw DimensionError("standardizer: block beyond the layout");
    Matrix out(block.rows(), block.cols());
    for (std::size_t i = 0; i < block.rows(); ++i)
        for (std::size_t k = 0; k < block.cols(); ++k) out(i, k) = (block(i, k) - loc[start + k]) / scale[start + k];
    return out;
}

Matrix Standardizer::inverse(const Matrix& block, std::size_t start) const {
    if (start + block.cols() > loc.size()) throw DimensionError("standardizer: block beyond the layout");
    Matrix out(block.rows(), block.cols());
    for (std::size_t i = 0; i < block.rows(); ++i)
        for (std::size_t k = 0; k < block.cols(); ++k) out(i, k) = block(i, k) * scale[start + k] + loc[start + k];
    return out;
}

void FrengressionModel::validate() const {
    schema.validate();
    const std::size_t dzx = schema.d_z() + schema.d_x();
    if (g.role() != Role::PastG || g.cond_dim() != 0 || g.out_dim() != dzx) {
        throw DimensionError("model: g does not generate the (Z, X) block");
    }
    if (margin_treatment_dim(f) != schema.d_x() || margin_outcome_dim(f) != schema.d_y()) {
        throw DimensionError("model: f does not map X to Y");
    }
    if (h.role() != Role::CopulaH || h.cond_dim() != dzx || h.noise_dim() != schema.d_y() ||
        h.out_dim() != schema.d_y()) {
        throw DimensionError("model: h does not map (Z, X, noise) to the outcome noise");
    }
    if (schema.has_x0() != e.has_value()) throw DimensionError("model: auxiliary model present iff X0 is declared");
    if (e && (e->cond_dim() != schema.x0.size() || e->out_dim() != schema.d_z())) {
        throw DimensionError("model: e does not map X0 to Z");
    }
    if (scaling.loc.size() != schema.width() || scaling.scale.size() != schema.width()) {
        throw DimensionError("model: scaling width differs from the schema");
    }
}

FrengressionModel make_model(const ColumnSchema& schema, const FitConfig& cfg, Rng& init) {
    schema.validate();
    cfg.validate();
    const std::size_t dz = schema.d_z(), dx = schema.d_x(), dy = schema.d_y();
    const std::size_t L = cfg.hidden_layers, W = cfg.hidden_width;
    GeneratorNet g(Role::PastG, 0, dz + dx, dz + dx, L, W, init);
    Margin f = [&]() -> Margin {
        if (cfg.pre_anm) {
            if (dx != 1 || dy != 1) throw SpecError("pre-ANM margin needs one treatment and one outcome column");
            return PreAnmMargin(L, W, init);
        }
        return GeneratorNet(Role::MarginF, dx, dy, dy, L, W, init);
    }();
    GeneratorNet h(Role::CopulaH, dz + dx, dy, dy, L, W, init);
    std::optional<GeneratorNet> e;
    if (schema.has_x0()) e.emplace(Role::AuxE, schema.x0.size(), dz, dz, L, W, init);
    return FrengressionModel{schema, std::move(g), std::move(f), std::move(h), std::move(e),
                             Standardizer::identity(schema.width()), {}};
}

std::vector<double> train_loop(const std::string& stage, std::size_t n, const FitConfig& cfg,
                               std::span<Matrix* const> params, Rng& shuffle, const BatchLoss& batch_loss) {
    if (n == 0) throw InputError(stage + ": no rows to train on");
    AdamState adam;
    adam.options.lr = cfg.lr;
    const std::size_t batch = std::min(cfg.minibatch, n);
    std::vector<double> history;
    history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffle.permutation(n);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            Tape tape;
            Var loss = batch_loss(tape, std::span(order).subspan(start, len));
            const double value = loss.value()(0, 0);
            if (!std::isfinite(value)) {
                throw TrainingError(stage + ": loss became non-finite in epoch " + std::to_string(epoch), epoch);
            }
            adam_step(adam, params, tape.backward(loss));
            total += value;
            ++batches;
        }
        history.push_back(total / static_cast<double>(batches));
    }
    return history;
}

FrengressionModel fit(const Matrix& data, const ColumnSchema& schema, const FitConfig& cfg) {
    schema.validate();
    cfg.validate();
    check_data(data, schema);
    const std::size_t n = data.rows();
    const std::size_t dz = schema.d_z(), dx = schema.d_x(), dy = schema.d_y();

    Rng master(cfg.seed);
    Rng init = master.split(Stream::Init);
    FrengressionModel model = make_model(schema, cfg, init);
    model.scaling = cfg.standardize ? Standardizer::fit(data, schema.kinds()) : Standardizer::identity(schema.width());

    const Matrix std_data = model.scaling.forward(data, 0);
    const Matrix zx = slice_cols(std_data, 0, dz + dx);
    const Matrix z = slice_cols(std_data, 0, dz);
    const Matrix x = slice_cols(std_data, dz, dx);
    const Matrix y = slice_cols(std_data, dz + dx, dy);
    const EnergyLossConfig lcfg = cfg.loss_config();

    // Past model.
    {
        Rng shuffle = master.split(Stream::Shuffle, 0);
        Rng noise = master.split(Stream::Epsilon);
        auto params = model.g.parameters();
        model.log.g = train_loop("g", n, cfg, params, shuffle, [&](Tape& tape, std::span<const std::size_t> rows) {
            return loss_zx(tape, model.g, gather_rows(zx, rows), lcfg, noise);
        });
    }

    // Auxiliary model for Z | X0.
    ZPrimeSource source = PermutationSource{};
    if (model.e) {
        Matrix x0(n, schema.x0.size());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < schema.x0.size(); ++k) x0(i, k) = x(i, schema.x0[k]);
        Rng shuffle = master.split(Stream::Shuffle, 1);
        Rng noise = master.split(Stream::Zeta);
        auto params = model.e->parameters();
        model.log.e = train_loop("e", n, cfg, params, shuffle, [&](Tape& tape, std::span<const std::size_t> rows) {
            return loss_aux(tape, *model.e, gather_rows(x0, rows), gather_rows(z, rows), lcfg, noise);
        });
        source = AuxiliarySource{&*model.e, schema.x0};
    }

    // Margin and dependency model, jointly.
    {
        Rng shuffle = master.split(Stream::Shuffle, 2);
        Rng noise = master.split(Stream::Xi);
        auto params = margin_parameters(model.f);
        for (Matrix* p : model.h.parameters()) params.push_back(p);
        const auto* pre_anm = std::get_if<PreAnmMargin>(&model.f);
        model.log.fh = train_loop("f,h", n, cfg, params, shuffle, [&](Tape& tape, std::span<const std::size_t> rows) {
            Var loss = loss_y_given_zx(tape, model.f, model.h, gather_rows(z, rows), gather_rows(x, rows),
                                       gather_rows(y, rows), source, schema.has_x0(), lcfg, noise);
            if (pre_anm && cfg.monotonicity_weight > 0.0) {
                loss = add(loss, monotonicity_penalty(tape, *pre_anm, cfg.monotonicity_weight));
            }
            return loss;
        });
    }
    model.validate();
    return model;
}

Matrix margin_draws(const FrengressionModel& model, const Matrix& x, const Matrix& eta) {
    const std::size_t dz = model.schema.d_z();
    if (std::holds_alternative<ClosedFormMargin>(model.f)) return forward_f(model.f, x, eta);
    const Matrix out = forward_f(model.f, model.scaling.forward(x, dz), eta);
    return model.scaling.inverse(out, dz + model.schema.d_x());
}

Matrix sample_past(const FrengressionModel& model, std::size_t n, Rng& rng) {
    const std::size_t dzx = model.schema.d_z() + model.schema.d_x();
    if (n == 0) return Matrix(0, dzx);
    Matrix past = model.scaling.inverse(forward_g(model.g, rng.normal_matrix(n, model.g.noise_dim())), 0);
    const auto kinds = model.schema.kinds();
    round_binary(past, std::span(kinds).first(dzx), rng);
    return past;
}

Matrix sample_aux(const FrengressionModel& model, std::span<const double> x0, std::size_t n, Rng& rng) {
    if (!model.e) throw ContractError("sample_aux: the model has no X0 block");
    if (x0.size() != model.schema.x0.size()) throw DimensionError("sample_aux: X0 width");
    const std::size_t dz = model.schema.d_z();
    Matrix x0_std(n, x0.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < x0.size(); ++k) {
            const std::size_t col = dz + model.schema.x0[k];
            x0_std(i, k) = (x0[k] - model.scaling.loc[col]) / model.scaling.scale[col];
        }
    const Matrix z = forward_e(*model.e, x0_std, rng.normal_matrix(n, model.e->noise_dim()));
    return model.scaling.inverse(z, 0);
}

Matrix sample_interventional(const FrengressionModel& model, std::span<const double> x, std::size_t n, Rng& rng) {
    if (x.size() != model.schema.d_x()) throw DimensionError("sample_interventional: treatment width");
    if (n == 0) return Matrix(0, model.schema.d_y());
    Matrix y = margin_draws(model, repeat_row_vector(x, n), rng.normal_matrix(n, model.schema.d_y()));
    round_binary(y, model.schema.y_kinds, rng);
    return y;
}

namespace {

// Past draws, h noise at those draws, and the outcome at the given treatments
// (the sampled ones when x_prime is empty).
Matrix chain(const FrengressionModel& model, std::span<const double> x_prime, std::size_t n, Rng& rng) {
    const std::size_t dz = model.schema.d_z(), dx = model.schema.d_x(), dy = model.schema.d_y();
    if (n == 0) return Matrix(0, dz + dx + dy);
    const Matrix past = sample_past(model, n, rng);
    const Matrix past_std = model.scaling.forward(past, 0);
    const Matrix eta = forward_h(model.h, slice_cols(past_std, 0, dz), slice_cols(past_std, dz, dx),
                                 rng.normal_matrix(n, dy));
    const Matrix x = x_prime.empty() ? slice_cols(past, dz, dx) : repeat_row_vector(x_prime, n);
    Matrix y = margin_draws(model, x, eta);
    round_binary(y, model.schema.y_kinds, rng);
    return hconcat(past, y);
}

}  // namespace

Matrix sample_joint(const FrengressionModel& model, std::size_t n, Rng& rng) { return chain(model, {}, n, rng); }

Matrix sample_swig(const FrengressionModel& model, std::span<const double> x_prime, std::size_t n, Rng& rng) {
    if (x_prime.size() != model.schema.d_x()) throw DimensionError("sample_swig: treatment width");
    return chain(model, x_prime, n, rng);
}

FrengressionModel replace_margin(const FrengressionModel& model, Margin new_f) {
    if (margin_treatment_dim(new_f) != model.schema.d_x() || margin_outcome_dim(new_f) != model.schema.d_y()) {
        throw DimensionError("replace_margin: new margin maps " + std::to_string(margin_treatment_dim(new_f)) +
                             " treatments to " + std::to_string(margin_outcome_dim(new_f)) + " outcomes, schema has " +
                             std::to_string(model.schema.d_x()) + " and " + std::to_string(model.schema.d_y()));
    }
    if (const auto* net = std::get_if<GeneratorNet>(&new_f); net && net->role() != Role::MarginF) {
        throw ContractError("replace_margin: expected a MarginF net");
    }
    FrengressionModel out = model;
    out.f = std::move(new_f);
    return out;
}

Estimate estimate_ate(const FrengressionModel& model, std::span<const double> x1, std::span<const double> x0,
                      std::size_t draws, Rng& rng) {
    if (draws < 2) throw std::invalid_argument("estimate_ate: need at least two draws");
    const auto y1 = column_values(sample_interventional(model, x1, draws, rng), 0);
    const auto y0 = column_values(sample_interventional(model, x0, draws, rng), 0);
    const double n = static_cast<double>(draws);
    const double v1 = std::pow(sample_sd(y1), 2), v0 = std::pow(sample_sd(y0), 2);
    return {sample_mean(y1) - sample_mean(y0), std::sqrt(v1 / n + v0 / n)};
}

double estimate_quantile(const FrengressionModel& model, std::span<const double> x, double alpha, std::size_t draws,
                         Rng& rng) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("estimate_quantile: alpha must lie in (0, 1)");
    if (draws == 0) throw std::invalid_argument("estimate_quantile: no draws");
    return empirical_quantile(column_values(sample_interventional(model, x, draws, rng), 0), alpha);
}

}  // namespace fren
