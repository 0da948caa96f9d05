#include "fren/ndiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace fren {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not match " + shape_string());
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Eigen::Map<EigenRowMatrix> Matrix::eigen() {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
}

Eigen::Map<const EigenRowMatrix> Matrix::eigen() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

// ---------------------------------------------------------------------------
// kernels

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + a.shape_string() + " x " + b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    if (a.cols() == 0) return out;
    out.eigen().noalias() = a.eigen() * b.eigen();
    return out;
}

Matrix relu(const Matrix& a) {
    Matrix out = a;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError("add_row_broadcast: " + a.shape_string() + " + " + row.shape_string());
    }
    Matrix out = a;
    if (a.rows() > 0) out.eigen().rowwise() += row.eigen().row(0);
    return out;
}

Matrix hconcat(std::span<const Matrix* const> parts) {
    if (parts.empty()) return {};
    const std::size_t rows = parts.front()->rows();
    std::size_t cols = 0;
    for (const Matrix* p : parts) {
        if (p->rows() != rows) throw DimensionError("hconcat: row counts differ");
        cols += p->cols();
    }
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double* dst = out.row(r).data();
        for (const Matrix* p : parts) {
            const auto src = p->row(r);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    const Matrix* parts[] = {&a, &b};
    return hconcat(parts);
}

Matrix slice_cols(const Matrix& a, std::size_t start, std::size_t count) {
    if (start + count > a.cols()) throw DimensionError("slice_cols: range exceeds " + a.shape_string());
    Matrix out(a.rows(), count);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto src = a.row(r);
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(start),
                  src.begin() + static_cast<std::ptrdiff_t>(start + count), out.row(r).begin());
    }
    return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> index) {
    Matrix out(index.size(), a.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= a.rows()) throw DimensionError("gather_rows: index out of range");
        const auto src = a.row(index[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

Matrix dense(const Matrix& x, const Matrix& w, const Matrix& b, bool rectify) {
    if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
        throw DimensionError("dense: " + x.shape_string() + " x " + w.shape_string() + " + " + b.shape_string());
    }
    Matrix out(x.rows(), w.cols());
    if (x.rows() == 0) return out;
    auto o = out.eigen();
    if (x.cols() > 0) o.noalias() = x.eigen() * w.eigen();
    o.rowwise() += b.eigen().row(0);
    if (rectify) o = o.cwiseMax(0.0);
    return out;
}

Matrix repeat_rows(const Matrix& a, std::size_t times) {
    std::vector<std::size_t> index(a.rows() * times);
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = i / times;
    return gather_rows(a, index);
}

// ---------------------------------------------------------------------------
// tape

Tape& Var::tape() const {
    if (tape_ == nullptr) throw ContractError("Var: not attached to a tape");
    return *tape_;
}

const Matrix& Var::value() const { return tape().node(id_).value; }

const Matrix* GradientMap::find(const Matrix* param) const {
    const auto it = grads_.find(param);
    return it == grads_.end() ? nullptr : &it->second;
}

void GradientMap::insert(const Matrix* param, Matrix grad) { grads_[param] = std::move(grad); }

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    n.op = OpKind::Constant;
    return push(std::move(n));
}

Var Tape::parameter(const Matrix* storage) {
    if (storage == nullptr) throw ContractError("Tape::parameter: null storage");
    if (const auto it = param_ids_.find(storage); it != param_ids_.end()) return Var(this, it->second);
    Node n;
    n.value = *storage;
    n.op = OpKind::Parameter;
    n.source = storage;
    n.requires_grad = true;
    Var v = push(std::move(n));
    param_ids_.emplace(storage, v.id());
    return v;
}

namespace {

void same_tape(Var a, Var b, const char* op) {
    if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

Var record(Tape& tape, OpKind op, Matrix value, std::vector<std::size_t> parents, double scalar = 0.0,
           std::vector<std::size_t> index = {}) {
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.scalar = scalar;
    n.index = std::move(index);
    for (std::size_t p : parents) n.requires_grad = n.requires_grad || tape.node(p).requires_grad;
    n.parents = std::move(parents);
    return tape.push(std::move(n));
}

void accumulate(Node& node, const Matrix& delta) {
    if (node.grad.empty()) {
        node.grad = delta;
        return;
    }
    node.grad.eigen() += delta.eigen();
}

Matrix& grad_of(Node& node) {
    if (node.grad.empty() && !node.value.empty()) node.grad = Matrix(node.value.rows(), node.value.cols());
    return node.grad;
}

}  // namespace

Var matmul(Var a, Var b) {
    same_tape(a, b, "matmul");
    return record(a.tape(), OpKind::MatMul, matmul(a.value(), b.value()), {a.id(), b.id()});
}

Var add(Var a, Var b) {
    same_tape(a, b, "add");
    if (!a.value().same_shape(b.value())) {
        throw DimensionError("add: " + a.value().shape_string() + " + " + b.value().shape_string());
    }
    Matrix out = a.value();
    out.eigen() += b.value().eigen();
    return record(a.tape(), OpKind::Add, std::move(out), {a.id(), b.id()});
}

Var add_row_broadcast(Var a, Var row) {
    same_tape(a, row, "add_row_broadcast");
    return record(a.tape(), OpKind::AddRowBroadcast, add_row_broadcast(a.value(), row.value()),
                  {a.id(), row.id()});
}

Var sub(Var a, Var b) {
    same_tape(a, b, "sub");
    if (!a.value().same_shape(b.value())) {
        throw DimensionError("sub: " + a.value().shape_string() + " - " + b.value().shape_string());
    }
    Matrix out = a.value();
    out.eigen() -= b.value().eigen();
    return record(a.tape(), OpKind::Sub, std::move(out), {a.id(), b.id()});
}

Var scale(Var a, double factor) {
    Matrix out = a.value();
    out.eigen() *= factor;
    return record(a.tape(), OpKind::Scale, std::move(out), {a.id()}, factor);
}

Var add_scalar(Var a, double offset) {
    Matrix out = a.value();
    out.eigen().array() += offset;
    return record(a.tape(), OpKind::AddScalar, std::move(out), {a.id()});
}

Var relu(Var a) { return record(a.tape(), OpKind::Relu, relu(a.value()), {a.id()}); }

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no operands");
    std::vector<const Matrix*> mats;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        same_tape(parts.front(), p, "concat_cols");
        mats.push_back(&p.value());
        ids.push_back(p.id());
    }
    return record(parts.front().tape(), OpKind::ConcatCols, hconcat(mats), std::move(ids));
}

Var concat_cols(Var a, Var b) {
    const Var parts[] = {a, b};
    return concat_cols(parts);
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
    return record(a.tape(), OpKind::SliceCols, slice_cols(a.value(), start, count), {a.id()}, 0.0, {start});
}

Var gather_rows(Var a, std::vector<std::size_t> index) {
    Matrix out = gather_rows(a.value(), index);
    return record(a.tape(), OpKind::GatherRows, std::move(out), {a.id()}, 0.0, std::move(index));
}

Var dense(Var x, Var w, Var b, bool rectify) {
    same_tape(x, w, "dense");
    same_tape(x, b, "dense");
    return record(x.tape(), OpKind::Dense, dense(x.value(), w.value(), b.value(), rectify), {x.id(), w.id(), b.id()},
                  rectify ? 1.0 : 0.0);
}

Var row_norms(Var a) {
    const Matrix& x = a.value();
    Matrix out(x.rows(), 1);
    if (x.rows() > 0 && x.cols() > 0) out.eigen().col(0) = x.eigen().rowwise().norm();
    return record(a.tape(), OpKind::RowNorms, std::move(out), {a.id()});
}

Var sum(Var a) {
    return record(a.tape(), OpKind::Sum, Matrix(1, 1, a.value().eigen().sum()), {a.id()});
}

Var mean(Var a) {
    const Matrix& x = a.value();
    if (x.empty()) throw DimensionError("mean: empty operand");
    return record(a.tape(), OpKind::Mean, Matrix(1, 1, x.eigen().sum() / static_cast<double>(x.size())),
                  {a.id()});
}

GradientMap Tape::backward(Var root) {
    if (&root.tape() != this) throw ContractError("backward: root belongs to another tape");
    const Node& r = nodes_.at(root.id());
    if (r.value.rows() != 1 || r.value.cols() != 1) {
        throw ContractError("backward: root must be 1x1, got " + r.value.shape_string());
    }
    for (Node& n : nodes_) n.grad = Matrix();

    GradientMap out;
    if (!r.requires_grad) return out;
    nodes_[root.id()].grad = Matrix(1, 1, 1.0);

    for (std::size_t id = root.id() + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty()) continue;
        const Matrix& g = n.grad;
        auto parent = [&](std::size_t k) -> Node& { return nodes_[n.parents[k]]; };

        switch (n.op) {
            case OpKind::Constant:
                break;
            case OpKind::Parameter:
                out.insert(n.source, g);
                break;
            case OpKind::MatMul: {
                Node& a = parent(0);
                Node& b = parent(1);
                if (a.requires_grad) grad_of(a).eigen().noalias() += g.eigen() * b.value.eigen().transpose();
                if (b.requires_grad) grad_of(b).eigen().noalias() += a.value.eigen().transpose() * g.eigen();
                break;
            }
            case OpKind::Add:
                if (parent(0).requires_grad) accumulate(parent(0), g);
                if (parent(1).requires_grad) accumulate(parent(1), g);
                break;
            case OpKind::AddRowBroadcast:
                if (parent(0).requires_grad) accumulate(parent(0), g);
                if (parent(1).requires_grad) grad_of(parent(1)).eigen().row(0) += g.eigen().colwise().sum();
                break;
            case OpKind::Sub:
                if (parent(0).requires_grad) accumulate(parent(0), g);
                if (parent(1).requires_grad) grad_of(parent(1)).eigen() -= g.eigen();
                break;
            case OpKind::Scale:
                if (parent(0).requires_grad) grad_of(parent(0)).eigen() += n.scalar * g.eigen();
                break;
            case OpKind::AddScalar:
                if (parent(0).requires_grad) accumulate(parent(0), g);
                break;
            case OpKind::Relu:
                if (parent(0).requires_grad) {
                    Matrix& pg = grad_of(parent(0));
                    const auto out_v = n.value.values();
                    const auto gv = g.values();
                    auto dst = pg.values();
                    for (std::size_t k = 0; k < gv.size(); ++k) {
                        if (out_v[k] > 0.0) dst[k] += gv[k];
                    }
                }
                break;
            case OpKind::ConcatCols: {
                std::size_t offset = 0;
                for (std::size_t k = 0; k < n.parents.size(); ++k) {
                    Node& p = parent(k);
                    const std::size_t w = p.value.cols();
                    if (p.requires_grad && w > 0 && g.rows() > 0) {
                        grad_of(p).eigen() += g.eigen().middleCols(static_cast<Eigen::Index>(offset),
                                                                   static_cast<Eigen::Index>(w));
                    }
                    offset += w;
                }
                break;
            }
            case OpKind::SliceCols:
                if (parent(0).requires_grad && g.size() > 0) {
                    grad_of(parent(0)).eigen().middleCols(static_cast<Eigen::Index>(n.index[0]),
                                                          static_cast<Eigen::Index>(g.cols())) += g.eigen();
                }
                break;
            case OpKind::GatherRows:
                if (parent(0).requires_grad) {
                    Matrix& pg = grad_of(parent(0));
                    for (std::size_t k = 0; k < n.index.size(); ++k) {
                        auto dst = pg.row(n.index[k]);
                        const auto src = g.row(k);
                        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                    }
                }
                break;
            case OpKind::RowNorms:
                if (parent(0).requires_grad) {
                    Node& a = parent(0);
                    Matrix& pg = grad_of(a);
                    for (std::size_t i = 0; i < a.value.rows(); ++i) {
                        const double norm = n.value(i, 0);
                        if (norm <= 0.0) continue;  // subgradient 0 at the origin
                        const double coef = g(i, 0) / norm;
                        auto dst = pg.row(i);
                        const auto src = a.value.row(i);
                        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += coef * src[c];
                    }
                }
                break;
            case OpKind::Sum:
                if (parent(0).requires_grad) grad_of(parent(0)).eigen().array() += g(0, 0);
                break;
            case OpKind::Dense: {
                Node& x = parent(0);
                Node& w = parent(1);
                Node& b = parent(2);
                Matrix masked;
                const Matrix* gm = &g;
                if (n.scalar != 0.0) {
                    masked = g;
                    masked.eigen() = (n.value.eigen().array() > 0.0).select(g.eigen(), 0.0);
                    gm = &masked;
                }
                if (w.requires_grad && x.value.cols() > 0) {
                    grad_of(w).eigen().noalias() += x.value.eigen().transpose() * gm->eigen();
                }
                if (b.requires_grad) grad_of(b).eigen().row(0) += gm->eigen().colwise().sum();
                if (x.requires_grad && x.value.cols() > 0) {
                    grad_of(x).eigen().noalias() += gm->eigen() * w.value.eigen().transpose();
                }
                break;
            }
            case OpKind::Mean:
                if (parent(0).requires_grad) {
                    Node& a = parent(0);
                    grad_of(a).eigen().array() += g(0, 0) / static_cast<double>(a.value.size());
                }
                break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(AdamState& state, std::span<Matrix* const> params, const GradientMap& grads) {
    if (state.first_moment.empty() && state.step_count == 0) {
        for (const Matrix* p : params) {
            state.first_moment.emplace_back(p->rows(), p->cols());
            state.second_moment.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw DimensionError("adam_step: parameter count changed between steps");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k]->same_shape(state.first_moment[k])) {
            throw DimensionError("adam_step: parameter " + std::to_string(k) + " shape " +
                                 params[k]->shape_string() + " != accumulator " +
                                 state.first_moment[k].shape_string());
        }
        if (const Matrix* g = grads.find(params[k]); g != nullptr && !g->same_shape(*params[k])) {
            throw DimensionError("adam_step: gradient shape mismatch for parameter " + std::to_string(k));
        }
    }

    ++state.step_count;
    const auto& o = state.options;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(o.beta1, t);
    const double bc2 = 1.0 - std::pow(o.beta2, t);

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto m = state.first_moment[k].eigen().array();
        auto v = state.second_moment[k].eigen().array();
        if (const Matrix* g = grads.find(params[k]); g != nullptr) {
            const auto ga = g->eigen().array();
            m = o.beta1 * m + (1.0 - o.beta1) * ga;
            v = o.beta2 * v + (1.0 - o.beta2) * ga.square();
        } else {
            m *= o.beta1;
            v *= o.beta2;
        }
        params[k]->eigen().array() -= o.lr * (m / bc1) / ((v / bc2).sqrt() + o.eps);
    }
}

}  // namespace fren
