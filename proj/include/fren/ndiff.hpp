#pragma once

// Dense matrices, a recording tape with exact reverse-mode gradients, and Adam.
//
// Every tape node holds a whole Matrix, so one node per layer-level operation
// rather than per scalar. Nodes are appended in creation order, which is a
// topological order of the graph: backward() walks the tape once in reverse.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fren {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using EigenRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix column(std::span<const double> values);
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    Eigen::Map<EigenRowMatrix> eigen();
    Eigen::Map<const EigenRowMatrix> eigen() const;

    bool all_finite() const;
    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
    std::string shape_string() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Plain (untaped) kernels. The tape ops below call the same kernels so taped and
// untaped evaluation agree bit for bit.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix relu(const Matrix& a);
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);
Matrix hconcat(std::span<const Matrix* const> parts);
Matrix hconcat(const Matrix& a, const Matrix& b);
Matrix slice_cols(const Matrix& a, std::size_t start, std::size_t count);
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> index);
Matrix repeat_rows(const Matrix& a, std::size_t times);  // row i -> rows i*times .. i*times+times-1
/// x * w + b (b is [1 x out]), then ReLU when `rectify`.
Matrix dense(const Matrix& x, const Matrix& w, const Matrix& b, bool rectify);

enum class OpKind : std::uint8_t {
    Constant,
    Parameter,
    MatMul,
    Add,
    AddRowBroadcast,
    Sub,
    Scale,
    AddScalar,
    Relu,
    ConcatCols,
    SliceCols,
    GatherRows,
    RowNorms,
    Sum,
    Mean,
    Dense,  // parents x, w, b; scalar != 0 means rectified
};

struct Node {
    Matrix value;
    Matrix grad;
    OpKind op = OpKind::Constant;
    std::vector<std::size_t> parents;
    std::vector<std::size_t> index;   // GatherRows row index, or SliceCols {start}
    double scalar = 0.0;              // Scale factor
    const Matrix* source = nullptr;   // Parameter storage
    bool requires_grad = false;
};

class Tape;

/// Handle to a node on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape& tape() const;
    std::size_t id() const noexcept { return id_; }
    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Gradients keyed by the address of the parameter storage they belong to.
class GradientMap {
public:
    const Matrix* find(const Matrix* param) const;
    bool contains(const Matrix* param) const { return find(param) != nullptr; }
    std::size_t size() const noexcept { return grads_.size(); }
    bool empty() const noexcept { return grads_.empty(); }
    void insert(const Matrix* param, Matrix grad);

private:
    std::unordered_map<const Matrix*, Matrix> grads_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    /// Registers external storage as a differentiable leaf. Registering the same
    /// storage twice returns the same node.
    Var parameter(const Matrix* storage);

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t id) const { return nodes_.at(id); }

    /// Reverse sweep from a 1x1 root. Returns d(root)/d(parameter) for every
    /// parameter that the root depends on.
    GradientMap backward(Var root);

    /// Appends a fully formed node; used by the op functions below.
    Var push(Node node);

private:
    std::vector<Node> nodes_;
    std::unordered_map<const Matrix*, std::size_t> param_ids_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_row_broadcast(Var a, Var row);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var relu(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var gather_rows(Var a, std::vector<std::size_t> index);
Var dense(Var x, Var w, Var b, bool rectify);
Var row_norms(Var a);  // [n x d] -> [n x 1] Euclidean norms
Var sum(Var a);        // -> 1x1
Var mean(Var a);       // -> 1x1

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamOptions options;
    std::int64_t step_count = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update. Parameters absent from `grads` get a zero
/// gradient. Accumulators are sized on the first call and shape-checked after.
void adam_step(AdamState& state, std::span<Matrix* const> params, const GradientMap& grads);

}  // namespace fren
