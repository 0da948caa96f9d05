#include "fren/seqfrengression.hpp"

#include "fren/binary_io.hpp"
#include "fren/csv.hpp"
#include "fren/stats.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace fren {

namespace {

constexpr std::size_t kStratBins = 8;

std::vector<ColumnKind> concat_kinds(std::initializer_list<const std::vector<ColumnKind>*> parts) {
    std::vector<ColumnKind> out;
    for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
    return out;
}

void round_binary(Matrix& block, std::span<const ColumnKind> kinds, Rng& rng) {
    for (std::size_t i = 0; i < block.rows(); ++i)
        for (std::size_t k = 0; k < kinds.size(); ++k)
            if (kinds[k] == ColumnKind::Binary) block(i, k) = rng.uniform() < std::clamp(block(i, k), 0.0, 1.0) ? 1.0 : 0.0;
}

bool only_zero_one(const Matrix& m, std::size_t col, std::span<const std::size_t> rows) {
    for (std::size_t i : rows)
        if (m(i, col) != 0.0 && m(i, col) != 1.0) return false;
    return true;
}

Matrix concat(const std::vector<const Matrix*>& parts, std::size_t rows) {
    if (parts.empty()) return Matrix(rows, 0);
    return hconcat(std::span<const Matrix* const>(parts));
}

// Standardized blocks of one trajectory batch, in the layout the nets see.
struct StdBlocks {
    Matrix c;
    std::vector<Matrix> z, x, y;

    Matrix g_hist(std::size_t t) const {
        std::vector<const Matrix*> parts{&c};
        for (std::size_t s = 0; s < t; ++s) parts.push_back(&z[s]);
        for (std::size_t s = 0; s < t; ++s) parts.push_back(&x[s]);
        return concat(parts, c.rows());
    }
    Matrix f_hist(std::size_t t) const {
        std::vector<const Matrix*> parts{&c};
        for (std::size_t s = 0; s <= t; ++s) parts.push_back(&x[s]);
        return concat(parts, c.rows());
    }
    Matrix h_hist(std::size_t t) const {
        std::vector<const Matrix*> parts{&c};
        for (std::size_t s = 0; s <= t; ++s) parts.push_back(&z[s]);
        for (std::size_t s = 0; s <= t; ++s) parts.push_back(&x[s]);
        return concat(parts, c.rows());
    }
};

void check_batch(const TrajectoryBatch& data, const SeqSchema& schema) {
    try {
        data.validate();
    } catch (const std::exception& e) {
        throw InputError(std::string("trajectory data: ") + e.what());
    }
    if (data.rows() < 2) throw InputError("need at least two trajectories to fit");
    if (data.d_c() != schema.d_c() || data.d_z() != schema.d_z() || data.d_x() != schema.d_x() ||
        data.d_y() != schema.d_y()) {
        throw InputError("trajectory data widths differ from the schema");
    }
    auto check = [&](const Matrix& m, const std::vector<ColumnKind>& kinds, const std::string& what) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t k = 0; k < m.cols(); ++k) {
                if (!std::isfinite(m(i, k))) throw InputError(what + ": non-finite value at row " + std::to_string(i));
                if (kinds[k] == ColumnKind::Binary && m(i, k) != 0.0 && m(i, k) != 1.0) {
                    throw InputError(what + ": binary column holds " + format_double(m(i, k)));
                }
            }
    };
    check(data.c, schema.c_kinds, "C");
    for (std::size_t t = 0; t < data.horizon(); ++t) {
        const std::string s = std::to_string(t);
        check(data.z[t], schema.z_kinds, "Z" + s);
        check(data.x[t], schema.x_kinds, "X" + s);
        check(data.y[t], schema.y_kinds, "Y" + s);
    }
}

std::vector<std::size_t> training_rows(const TrajectoryBatch& data, std::size_t t) {
    if (data.kind == SeqKind::Surv) return data.at_risk_rows(t);
    std::vector<std::size_t> all(data.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

std::vector<std::size_t> map_rows(std::span<const std::size_t> batch, const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> out(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) out[k] = rows[batch[k]];
    return out;
}

// [n*m x cols] with row i*m + j drawn from row perm_j[i] of block.
Matrix permuted_draws(const Matrix& block, const Matrix& c, std::size_t m, Rng& rng) {
    const std::size_t n = block.rows();
    Matrix out(n * m, block.cols());
    for (std::size_t j = 0; j < m; ++j) {
        const auto perm = stratified_permutation(c, kStratBins, rng);
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = block.row(perm[i]);
            std::copy(src.begin(), src.end(), out.row(i * m + j).begin());
        }
    }
    return out;
}

// h's conditioning with Z_0..Z_t replaced by draws that ignore the row's own
// covariates: Z_0 by a C-stratified permutation, later steps chained through
// e_s given (c, earlier Z', the row's own treatments).
Matrix h_cond_prime(const SeqModel& model, std::size_t t, const StdBlocks& b, std::size_t m, Rng& rng) {
    const std::size_t n = b.c.rows();
    const Matrix c_rep = repeat_rows(b.c, m);
    std::vector<Matrix> x_rep, zp;
    for (std::size_t s = 0; s <= t; ++s) x_rep.push_back(repeat_rows(b.x[s], m));
    zp.push_back(permuted_draws(b.z[0], b.c, m, rng));
    for (std::size_t s = 1; s <= t; ++s) {
        const GeneratorNet& e = *model.steps[s].e;
        std::vector<const Matrix*> parts{&c_rep};
        for (std::size_t r = 0; r < s; ++r) parts.push_back(&zp[r]);
        for (std::size_t r = 0; r < s; ++r) parts.push_back(&x_rep[r]);
        zp.push_back(forward_e(e, concat(parts, n * m), rng.normal_matrix(n * m, e.noise_dim())));
    }
    std::vector<const Matrix*> parts{&c_rep};
    for (const Matrix& z : zp) parts.push_back(&z);
    for (const Matrix& x : x_rep) parts.push_back(&x);
    return concat(parts, n * m);
}

Matrix with_input(const Matrix& cond, const Matrix& noise) { return cond.cols() == 0 ? noise : hconcat(cond, noise); }

void put_doubles(std::ostream& os, const std::vector<double>& v) {
    binio::put_u64(os, v.size());
    for (double d : v) binio::put_f64(os, d);
}

std::vector<double> get_doubles(std::istream& is) {
    const auto n = binio::get_u64(is);
    if (n > (1ULL << 32)) throw binio::FormatError("array length implausible");
    std::vector<double> v(n);
    for (double& d : v) d = binio::get_f64(is);
    return v;
}

void put_kinds(std::ostream& os, const std::vector<ColumnKind>& kinds) {
    binio::put_u64(os, kinds.size());
    for (ColumnKind k : kinds) binio::put_u32(os, k == ColumnKind::Binary ? 1U : 0U);
}

std::vector<ColumnKind> get_kinds(std::istream& is) {
    const auto n = binio::get_u64(is);
    if (n > (1ULL << 20)) throw binio::FormatError("column count implausible");
    std::vector<ColumnKind> out;
    for (std::uint64_t k = 0; k < n; ++k) {
        const auto tag = binio::get_u32(is);
        if (tag > 1) throw binio::FormatError("bad column kind tag");
        out.push_back(tag == 1 ? ColumnKind::Binary : ColumnKind::Continuous);
    }
    return out;
}

}  // namespace

SeqSchema SeqSchema::infer(const TrajectoryBatch& data) {
    data.validate();
    SeqSchema s;
    const auto all = training_rows(data, 0);
    for (std::size_t k = 0; k < data.d_c(); ++k)
        s.c_kinds.push_back(only_zero_one(data.c, k, all) ? ColumnKind::Binary : ColumnKind::Continuous);
    auto block_kind = [&](const std::vector<Matrix>& blocks, std::size_t k) {
        for (std::size_t t = 0; t < data.horizon(); ++t)
            if (!only_zero_one(blocks[t], k, training_rows(data, t))) return ColumnKind::Continuous;
        return ColumnKind::Binary;
    };
    for (std::size_t k = 0; k < data.d_z(); ++k) s.z_kinds.push_back(block_kind(data.z, k));
    for (std::size_t k = 0; k < data.d_x(); ++k) s.x_kinds.push_back(block_kind(data.x, k));
    for (std::size_t k = 0; k < data.d_y(); ++k)
        s.y_kinds.push_back(data.kind == SeqKind::Surv ? ColumnKind::Binary : block_kind(data.y, k));
    return s;
}

void SeqSchema::validate() const {
    if (d_c() == 0 || d_z() == 0 || d_x() == 0 || d_y() == 0) throw SpecError("sequential schema: C, Z, X and Y each need a column");
}

std::size_t SeqModel::g_cond_dim(std::size_t t) const { return schema.d_c() + t * (schema.d_z() + schema.d_x()); }
std::size_t SeqModel::f_cond_dim(std::size_t t) const { return schema.d_c() + (t + 1) * schema.d_x(); }
std::size_t SeqModel::h_cond_dim(std::size_t t) const {
    return schema.d_c() + (t + 1) * (schema.d_z() + schema.d_x());
}

void SeqModel::validate() const {
    schema.validate();
    const std::size_t dc = schema.d_c(), dz = schema.d_z(), dx = schema.d_x(), dy = schema.d_y();
    if (g_c.role() != Role::BaselineGc || g_c.cond_dim() != 0 || g_c.out_dim() != dc) {
        throw DimensionError("sequential model: g_c does not generate C");
    }
    if (c_scaling.loc.size() != dc || c_scaling.scale.size() != dc) throw DimensionError("sequential model: C scaling width");
    if (kind == SeqKind::Surv && (dy != 1 || schema.y_kinds[0] != ColumnKind::Binary)) {
        throw DimensionError("sequential model: survival outcome must be one binary column");
    }
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const SeqStep& s = steps[t];
        const std::string at = " at t=" + std::to_string(t);
        if (s.g.role() != Role::PastG || s.g.cond_dim() != g_cond_dim(t) || s.g.out_dim() != dz + dx) {
            throw DimensionError("sequential model: g" + at);
        }
        const auto* f = std::get_if<GeneratorNet>(&s.f);
        if (f == nullptr || f->role() != Role::MarginF || f->cond_dim() != f_cond_dim(t) || f->out_dim() != dy) {
            throw DimensionError("sequential model: f" + at);
        }
        if (s.h.role() != Role::CopulaH || s.h.cond_dim() != h_cond_dim(t) || s.h.noise_dim() != dy ||
            s.h.out_dim() != dy) {
            throw DimensionError("sequential model: h" + at);
        }
        if ((t == 0) == s.e.has_value()) throw DimensionError("sequential model: e present iff t >= 1" + at);
        if (s.e && (s.e->role() != Role::AuxE || s.e->cond_dim() != g_cond_dim(t) || s.e->out_dim() != dz)) {
            throw DimensionError("sequential model: e" + at);
        }
        if (s.scaling.loc.size() != dz + dx + dy || s.scaling.scale.size() != dz + dx + dy) {
            throw DimensionError("sequential model: scaling width" + at);
        }
    }
}

SeqModel make_seq_model(SeqKind kind, const SeqSchema& schema, std::size_t horizon, const FitConfig& cfg, Rng& init) {
    schema.validate();
    cfg.validate();
    if (cfg.pre_anm) throw SpecError("sequential model: pre-ANM margins are not supported");
    const std::size_t dc = schema.d_c(), dz = schema.d_z(), dx = schema.d_x(), dy = schema.d_y();
    const std::size_t L = cfg.hidden_layers, W = cfg.hidden_width;
    SeqModel model{kind, schema, GeneratorNet(Role::BaselineGc, 0, dc, dc, L, W, init), Standardizer::identity(dc),
                   {}, {}, {}};
    for (std::size_t t = 0; t < horizon; ++t) {
        GeneratorNet g(Role::PastG, model.g_cond_dim(t), dz + dx, dz + dx, L, W, init);
        Margin f = GeneratorNet(Role::MarginF, model.f_cond_dim(t), dy, dy, L, W, init);
        GeneratorNet h(Role::CopulaH, model.h_cond_dim(t), dy, dy, L, W, init);
        std::optional<GeneratorNet> e;
        if (t > 0) e.emplace(Role::AuxE, model.g_cond_dim(t), dz, dz, L, W, init);
        model.steps.push_back(SeqStep{std::move(g), std::move(f), std::move(h), std::move(e),
                                      Standardizer::identity(dz + dx + dy), {}, 0});
    }
    model.validate();
    return model;
}

std::vector<std::size_t> stratified_permutation(const Matrix& c, std::size_t bins, Rng& rng) {
    const std::size_t n = c.rows();
    if (c.cols() == 0 || bins <= 1 || n < 2) return rng.permutation(n);
    // Bin edges at the k/bins quantiles; equal values always share a bin.
    auto values = column_values(c, 0);
    std::vector<double> edges;
    for (std::size_t k = 1; k < bins; ++k) edges.push_back(empirical_quantile(values, double(k) / double(bins)));
    std::vector<std::vector<std::size_t>> groups(bins);
    for (std::size_t i = 0; i < n; ++i) {
        const auto bin = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
        groups[bin].push_back(i);
    }
    std::vector<std::size_t> out(n);
    for (const auto& g : groups) {
        const auto perm = rng.permutation(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) out[g[k]] = g[perm[k]];
    }
    return out;
}

SeqModel fit_seq(const TrajectoryBatch& data, const FitConfig& cfg) { return fit_seq(data, SeqSchema::infer(data), cfg); }

SeqModel fit_seq(const TrajectoryBatch& data, const SeqSchema& schema, const FitConfig& cfg) {
    schema.validate();
    cfg.validate();
    check_batch(data, schema);
    const std::size_t n = data.rows();
    const std::size_t dz = schema.d_z(), dx = schema.d_x(), dy = schema.d_y();
    const std::size_t T = data.horizon();
    const EnergyLossConfig lcfg = cfg.loss_config();

    Rng master(cfg.seed);
    Rng init = master.split(Stream::Init);
    SeqModel model = make_seq_model(data.kind, schema, T, cfg, init);

    // Baseline model.
    model.c_scaling = cfg.standardize ? Standardizer::fit(data.c, schema.c_kinds) : Standardizer::identity(schema.d_c());
    StdBlocks b;
    b.c = model.c_scaling.forward(data.c, 0);
    {
        Rng shuffle = master.split(Stream::Shuffle, 0);
        Rng noise = master.split(Stream::Epsilon, 0);
        auto params = model.g_c.parameters();
        model.g_c_log = train_loop("g_c", n, cfg, params, shuffle, [&](Tape& tape, std::span<const std::size_t> rows) {
            return conditional_energy_loss(tape, model.g_c, Matrix(rows.size(), 0), gather_rows(b.c, rows), lcfg.m,
                                           noise);
        });
    }

    const auto zxy_kinds = concat_kinds({&schema.z_kinds, &schema.x_kinds, &schema.y_kinds});
    for (std::size_t t = 0; t < T; ++t) {
        const std::vector<std::size_t> rows = training_rows(data, t);
        const std::string at = "t=" + std::to_string(t);
        if (rows.size() < 2) {
            model.warnings.push_back("horizon truncated to " + std::to_string(t) + ": fewer than two rows at risk at " +
                                     at);
            model.steps.erase(model.steps.begin() + static_cast<std::ptrdiff_t>(t), model.steps.end());
            break;
        }
        SeqStep& step = model.steps[t];
        step.train_rows = rows.size();
        const Matrix zxy = hconcat(std::vector<const Matrix*>{&data.z[t], &data.x[t], &data.y[t]});
        step.scaling = cfg.standardize ? Standardizer::fit(gather_rows(zxy, rows), zxy_kinds)
                                       : Standardizer::identity(dz + dx + dy);
        const Matrix zxy_std = step.scaling.forward(zxy, 0);
        b.z.push_back(slice_cols(zxy_std, 0, dz));
        b.x.push_back(slice_cols(zxy_std, dz, dx));
        b.y.push_back(slice_cols(zxy_std, dz + dx, dy));
        const Matrix zx_t = slice_cols(zxy_std, 0, dz + dx);
        const Matrix g_hist = b.g_hist(t);
        const std::uint64_t k = 1 + 3 * t;

        {
            Rng shuffle = master.split(Stream::Shuffle, k);
            Rng noise = master.split(Stream::Epsilon, k);
            auto params = step.g.parameters();
            step.log.g = train_loop("g " + at, rows.size(), cfg, params, shuffle,
                                    [&](Tape& tape, std::span<const std::size_t> batch) {
                                        const auto r = map_rows(batch, rows);
                                        return conditional_energy_loss(tape, step.g, gather_rows(g_hist, r),
                                                                       gather_rows(zx_t, r), lcfg.m, noise);
                                    });
        }
        if (step.e) {
            Rng shuffle = master.split(Stream::Shuffle, k + 1);
            Rng noise = master.split(Stream::Zeta, k + 1);
            auto params = step.e->parameters();
            step.log.e = train_loop("e " + at, rows.size(), cfg, params, shuffle,
                                    [&](Tape& tape, std::span<const std::size_t> batch) {
                                        const auto r = map_rows(batch, rows);
                                        return loss_aux(tape, *step.e, gather_rows(g_hist, r), gather_rows(b.z[t], r),
                                                        lcfg, noise);
                                    });
        }
        {
            const Matrix f_hist = b.f_hist(t);
            const Matrix h_hist = b.h_hist(t);
            Rng shuffle = master.split(Stream::Shuffle, k + 2);
            Rng noise = master.split(Stream::Xi, k + 2);
            auto params = margin_parameters(step.f);
            for (Matrix* p : step.h.parameters()) params.push_back(p);
            step.log.fh = train_loop("f,h " + at, rows.size(), cfg, params, shuffle,
                                     [&](Tape& tape, std::span<const std::size_t> batch) {
                                         const auto r = map_rows(batch, rows);
                                         StdBlocks sub;
                                         sub.c = gather_rows(b.c, r);
                                         for (std::size_t s = 0; s <= t; ++s) {
                                             sub.z.push_back(gather_rows(b.z[s], r));
                                             sub.x.push_back(gather_rows(b.x[s], r));
                                         }
                                         const Matrix prime = h_cond_prime(model, t, sub, lcfg.m, noise);
                                         const OutcomeNoise eta = OutcomeNoise::draw(r.size(), lcfg.m, dy, noise);
                                         return outcome_energy_loss(tape, step.f, step.h, gather_rows(f_hist, r),
                                                                    gather_rows(h_hist, r), prime,
                                                                    gather_rows(b.y[t], r), lcfg.m, eta);
                                     });
        }
    }
    model.validate();
    return model;
}

Matrix sample_baseline(const SeqModel& model, std::size_t n, Rng& rng) {
    if (n == 0) return Matrix(0, model.schema.d_c());
    Matrix c = model.c_scaling.inverse(model.g_c.evaluate(rng.normal_matrix(n, model.g_c.noise_dim())), 0);
    round_binary(c, model.schema.c_kinds, rng);
    return c;
}

TrajectoryBatch sample_trajectory_joint(const SeqModel& model, std::size_t n, Rng& rng) {
    const SeqSchema& sc = model.schema;
    const std::size_t dz = sc.d_z(), dx = sc.d_x(), dy = sc.d_y(), T = model.horizon();
    const bool surv = model.kind == SeqKind::Surv;
    TrajectoryBatch out = TrajectoryBatch::empty(model.kind, n, T, sc.d_c(), dz, dx, dy);
    if (n == 0) return out;
    const auto zx_kinds = concat_kinds({&sc.z_kinds, &sc.x_kinds});
    out.c = sample_baseline(model, n, rng);
    StdBlocks b;
    b.c = model.c_scaling.forward(out.c, 0);
    std::vector<bool> alive(n, true);
    for (std::size_t t = 0; t < T; ++t) {
        const SeqStep& step = model.steps[t];
        Matrix zx = step.scaling.inverse(step.g.evaluate(with_input(b.g_hist(t), rng.normal_matrix(n, dz + dx))), 0);
        round_binary(zx, zx_kinds, rng);
        const Matrix zx_std = step.scaling.forward(zx, 0);
        b.z.push_back(slice_cols(zx_std, 0, dz));
        b.x.push_back(slice_cols(zx_std, dz, dx));
        const Matrix eta = step.h.evaluate(hconcat(b.h_hist(t), rng.normal_matrix(n, dy)));
        Matrix y = step.scaling.inverse(forward_f(step.f, b.f_hist(t), eta), dz + dx);
        round_binary(y, sc.y_kinds, rng);
        for (std::size_t i = 0; i < n; ++i) {
            if (surv && !alive[i]) {
                out.at_risk(i, t) = 0.0;
                out.y[t](i, 0) = 1.0;
                continue;
            }
            for (std::size_t k = 0; k < dz; ++k) out.z[t](i, k) = zx(i, k);
            for (std::size_t k = 0; k < dx; ++k) out.x[t](i, k) = zx(i, dz + k);
            for (std::size_t k = 0; k < dy; ++k) out.y[t](i, k) = y(i, k);
            if (surv && y(i, 0) == 1.0) alive[i] = false;
        }
    }
    return out;
}

std::vector<Matrix> sample_trajectory_interventional(const SeqModel& model, const Matrix& xbar,
                                                     const std::optional<std::vector<double>>& c, std::size_t n,
                                                     Rng& rng) {
    const SeqSchema& sc = model.schema;
    const std::size_t dz = sc.d_z(), dx = sc.d_x(), dy = sc.d_y(), T = model.horizon();
    if (xbar.rows() != T || xbar.cols() != dx) {
        throw DimensionError("sample_trajectory_interventional: regime is " + xbar.shape_string() + ", model needs [" +
                             std::to_string(T) + " x " + std::to_string(dx) + "]");
    }
    if (c && c->size() != sc.d_c()) throw DimensionError("sample_trajectory_interventional: baseline width");
    const bool surv = model.kind == SeqKind::Surv;
    Matrix c_data(n, sc.d_c());
    if (c) {
        for (std::size_t i = 0; i < n; ++i) std::copy(c->begin(), c->end(), c_data.row(i).begin());
    } else {
        c_data = sample_baseline(model, n, rng);
    }
    StdBlocks b;
    b.c = model.c_scaling.forward(c_data, 0);
    std::vector<Matrix> out;
    for (std::size_t t = 0; t < T; ++t) {
        const SeqStep& step = model.steps[t];
        Matrix x(n, dx);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < dx; ++k) x(i, k) = xbar(t, k);
        b.x.push_back(step.scaling.forward(x, dz));
        Matrix y = step.scaling.inverse(forward_f(step.f, b.f_hist(t), rng.normal_matrix(n, dy)), dz + dx);
        round_binary(y, sc.y_kinds, rng);
        if (surv && t > 0)
            for (std::size_t i = 0; i < n; ++i)
                if (out[t - 1](i, 0) == 1.0) y(i, 0) = 1.0;
        out.push_back(std::move(y));
    }
    return out;
}

std::vector<double> kaplan_meier(const std::vector<std::optional<std::size_t>>& event_times, std::size_t horizon) {
    if (event_times.empty()) throw std::invalid_argument("kaplan_meier: no observations");
    std::vector<std::size_t> events(horizon + 1, 0);
    for (const auto& e : event_times) {
        if (!e) continue;
        if (*e < 1 || *e > horizon) throw std::invalid_argument("kaplan_meier: event time outside 1..T");
        ++events[*e];
    }
    std::vector<double> s(horizon + 1, 1.0);
    std::size_t at_risk = event_times.size();
    for (std::size_t t = 1; t <= horizon; ++t) {
        s[t] = s[t - 1];
        if (at_risk > 0) s[t] *= 1.0 - double(events[t]) / double(at_risk);
        at_risk -= events[t];
    }
    return s;
}

std::vector<double> kaplan_meier(const TrajectoryBatch& batch) {
    std::vector<std::optional<std::size_t>> times(batch.rows());
    for (std::size_t i = 0; i < batch.rows(); ++i) times[i] = batch.event_time(i);
    return kaplan_meier(times, batch.horizon());
}

void write_seq_model(std::ostream& os, const SeqModel& model) {
    model.validate();
    binio::put_magic(os, "FRS1");
    binio::put_u32(os, model.kind == SeqKind::Surv ? 1U : 0U);
    for (const auto* k : {&model.schema.c_kinds, &model.schema.z_kinds, &model.schema.x_kinds, &model.schema.y_kinds})
        put_kinds(os, *k);
    model.g_c.write(os);
    write_standardizer(os, model.c_scaling);
    put_doubles(os, model.g_c_log);
    binio::put_u64(os, model.steps.size());
    for (const SeqStep& s : model.steps) {
        s.g.write(os);
        write_margin(os, s.f);
        s.h.write(os);
        binio::put_u32(os, s.e ? 1U : 0U);
        if (s.e) s.e->write(os);
        write_standardizer(os, s.scaling);
        put_doubles(os, s.log.g);
        put_doubles(os, s.log.e);
        put_doubles(os, s.log.fh);
        binio::put_u64(os, s.train_rows);
    }
    binio::put_u64(os, model.warnings.size());
    for (const auto& w : model.warnings) binio::put_string(os, w);
    if (!os) throw std::runtime_error("write_seq_model: stream failure");
}

SeqModel read_seq_model(std::istream& is) {
    binio::expect_magic(is, "FRS1");
    const auto kind_tag = binio::get_u32(is);
    if (kind_tag > 1) throw binio::FormatError("bad sequence kind");
    SeqSchema schema;
    schema.c_kinds = get_kinds(is);
    schema.z_kinds = get_kinds(is);
    schema.x_kinds = get_kinds(is);
    schema.y_kinds = get_kinds(is);
    GeneratorNet g_c = GeneratorNet::read(is);
    SeqModel model{kind_tag == 1 ? SeqKind::Surv : SeqKind::Seq, std::move(schema), std::move(g_c),
                   read_standardizer(is), get_doubles(is), {}, {}};
    const auto T = binio::get_u64(is);
    if (T > 10000) throw binio::FormatError("horizon implausible");
    for (std::uint64_t t = 0; t < T; ++t) {
        GeneratorNet g = GeneratorNet::read(is);
        Margin f = read_margin(is);
        GeneratorNet h = GeneratorNet::read(is);
        std::optional<GeneratorNet> e;
        const auto has_e = binio::get_u32(is);
        if (has_e > 1) throw binio::FormatError("bad auxiliary flag");
        if (has_e) e = GeneratorNet::read(is);
        Standardizer scaling = read_standardizer(is);
        TrainingLog log;
        log.g = get_doubles(is);
        log.e = get_doubles(is);
        log.fh = get_doubles(is);
        const auto rows = binio::get_u64(is);
        model.steps.push_back(
            SeqStep{std::move(g), std::move(f), std::move(h), std::move(e), std::move(scaling), std::move(log), rows});
    }
    const auto nw = binio::get_u64(is);
    if (nw > 1000) throw binio::FormatError("warning count implausible");
    for (std::uint64_t k = 0; k < nw; ++k) model.warnings.push_back(binio::get_string(is));
    try {
        model.validate();
    } catch (const std::exception& ex) {
        throw binio::FormatError(std::string("sequential model file inconsistent: ") + ex.what());
    }
    return model;
}

}  // namespace fren
