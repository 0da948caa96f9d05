#include "fren/nets.hpp"

#include "fren/binary_io.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fren {

const char* role_name(Role role) {
    switch (role) {
        case Role::PastG: return "PastG";
        case Role::MarginF: return "MarginF";
        case Role::CopulaH: return "CopulaH";
        case Role::AuxE: return "AuxE";
        case Role::BaselineGc: return "BaselineGc";
    }
    return "?";
}

void MlpSpec::validate() const {
    if (in_dim < 1 || out_dim < 1) throw DimensionError("MlpSpec: in_dim and out_dim must be >= 1");
    if (hidden_layers < 1) throw DimensionError("MlpSpec: hidden_layers must be >= 1");
    if (hidden_width < 1) throw DimensionError("MlpSpec: hidden_width must be >= 1");
}

GeneratorNet::GeneratorNet(Role role, std::size_t cond_dim, std::size_t noise_dim, MlpSpec spec)
    : role_(role), cond_dim_(cond_dim), noise_dim_(noise_dim), spec_(spec) {
    spec_.validate();
    std::size_t fan_in = spec_.in_dim;
    for (std::size_t l = 0; l <= spec_.hidden_layers; ++l) {
        const std::size_t fan_out = l == spec_.hidden_layers ? spec_.out_dim : spec_.hidden_width;
        weights_.emplace_back(fan_in, fan_out);
        biases_.emplace_back(1, fan_out);
        fan_in = fan_out;
    }
}

GeneratorNet::GeneratorNet(Role role, std::size_t cond_dim, std::size_t noise_dim, std::size_t out_dim,
                           std::size_t hidden_layers, std::size_t hidden_width, Rng& init)
    : GeneratorNet(role, cond_dim, noise_dim, MlpSpec{cond_dim + noise_dim, out_dim, hidden_layers, hidden_width}) {
    for (Matrix& w : weights_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (double& v : w.values()) v = (2.0 * init.uniform() - 1.0) * limit;
    }
}

GeneratorNet GeneratorNet::zeros(Role role, std::size_t cond_dim, std::size_t noise_dim, std::size_t out_dim,
                                 std::size_t hidden_layers, std::size_t hidden_width) {
    return GeneratorNet(role, cond_dim, noise_dim, MlpSpec{cond_dim + noise_dim, out_dim, hidden_layers, hidden_width});
}

std::vector<Matrix*> GeneratorNet::parameters() {
    std::vector<Matrix*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

void GeneratorNet::check_input(std::size_t cols) const {
    if (cols != spec_.in_dim) {
        throw DimensionError(std::string(role_name(role_)) + " net expects " + std::to_string(spec_.in_dim) +
                             " input columns, got " + std::to_string(cols));
    }
}

Var GeneratorNet::forward(Tape& tape, Var input) const {
    check_input(input.cols());
    Var h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = dense(h, tape.parameter(&weights_[l]), tape.parameter(&biases_[l]), l + 1 < weights_.size());
    }
    return h;
}

Matrix GeneratorNet::evaluate(const Matrix& input) const {
    check_input(input.cols());
    Matrix h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = dense(h, weights_[l], biases_[l], l + 1 < weights_.size());
    }
    return h;
}

namespace {
constexpr char kNetMagic[5] = "FGN1";
}

void GeneratorNet::write(std::ostream& os) const {
    binio::put_magic(os, kNetMagic);
    binio::put_u32(os, static_cast<std::uint32_t>(role_));
    binio::put_u64(os, cond_dim_);
    binio::put_u64(os, noise_dim_);
    binio::put_u64(os, spec_.out_dim);
    binio::put_u64(os, spec_.hidden_layers);
    binio::put_u64(os, spec_.hidden_width);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (double v : weights_[l].values()) binio::put_f64(os, v);
        for (double v : biases_[l].values()) binio::put_f64(os, v);
    }
}

GeneratorNet GeneratorNet::read(std::istream& is) {
    binio::expect_magic(is, kNetMagic);
    const std::uint32_t role = binio::get_u32(is);
    if (role > static_cast<std::uint32_t>(Role::BaselineGc)) throw binio::FormatError("unknown net role");
    const std::size_t cond = binio::get_u64(is);
    const std::size_t noise = binio::get_u64(is);
    const std::size_t out = binio::get_u64(is);
    const std::size_t layers = binio::get_u64(is);
    const std::size_t width = binio::get_u64(is);
    if (layers > 64 || width > (1U << 16) || cond + noise > (1U << 20) || out > (1U << 20)) {
        throw binio::FormatError("net header implausible");
    }
    GeneratorNet net = zeros(static_cast<Role>(role), cond, noise, out, layers, width);
    for (std::size_t l = 0; l < net.weights_.size(); ++l) {
        for (double& v : net.weights_[l].values()) v = binio::get_f64(is);
        for (double& v : net.biases_[l].values()) v = binio::get_f64(is);
    }
    return net;
}

// ---------------------------------------------------------------------------

PreAnmMargin::PreAnmMargin(std::size_t hidden_layers, std::size_t hidden_width, Rng& init)
    : outer(Role::MarginF, 1, 0, 1, hidden_layers, hidden_width, init),
      noise(Role::MarginF, 0, 1, 1, hidden_layers, hidden_width, init) {}

PreAnmMargin::PreAnmMargin(GeneratorNet outer_net, GeneratorNet noise_net)
    : outer(std::move(outer_net)), noise(std::move(noise_net)) {
    if (outer.spec().in_dim != 1 || outer.out_dim() != 1 || noise.spec().in_dim != 1 || noise.out_dim() != 1) {
        throw DimensionError("PreAnmMargin: both nets must map R -> R");
    }
}

Var PreAnmMargin::forward(Tape& tape, Var x, Var eta) const {
    if (x.cols() != 1 || eta.cols() != 1 || x.rows() != eta.rows()) {
        throw DimensionError("PreAnmMargin: x and eta must be matching [n x 1] columns");
    }
    return outer.forward(tape, add(x, noise.forward(tape, eta)));
}

Matrix PreAnmMargin::evaluate(const Matrix& x, const Matrix& eta) const {
    if (x.cols() != 1 || eta.cols() != 1 || x.rows() != eta.rows()) {
        throw DimensionError("PreAnmMargin: x and eta must be matching [n x 1] columns");
    }
    Matrix u = noise.evaluate(eta);
    u.eigen() += x.eigen();
    return outer.evaluate(u);
}

std::vector<Matrix*> PreAnmMargin::parameters() {
    auto out = outer.parameters();
    for (Matrix* p : noise.parameters()) out.push_back(p);
    return out;
}

namespace {

Matrix probe_grid(double lo, double hi, std::size_t points) {
    if (points < 2 || !(hi > lo)) throw ContractError("monotonicity probe: need >= 2 points on a nonempty range");
    Matrix grid(points, 1);
    for (std::size_t k = 0; k < points; ++k) {
        grid(k, 0) = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    return grid;
}

void scan_slopes(const Matrix& values, double step, double tolerance, double& min_slope, std::size_t& violations) {
    min_slope = std::numeric_limits<double>::infinity();
    violations = 0;
    for (std::size_t k = 0; k + 1 < values.rows(); ++k) {
        const double slope = (values(k + 1, 0) - values(k, 0)) / step;
        min_slope = std::min(min_slope, slope);
        if (slope < -tolerance) ++violations;
    }
}

}  // namespace

MonotonicityReport probe_monotonicity(const PreAnmMargin& margin, double lo, double hi, std::size_t points,
                                      double tolerance) {
    const Matrix grid = probe_grid(lo, hi, points);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    MonotonicityReport r;
    scan_slopes(margin.outer.evaluate(grid), step, tolerance, r.min_slope_outer, r.violations_outer);
    scan_slopes(margin.noise.evaluate(grid), step, tolerance, r.min_slope_noise, r.violations_noise);
    return r;
}

Var monotonicity_penalty(Tape& tape, const PreAnmMargin& margin, double weight, double lo, double hi,
                         std::size_t points) {
    const Matrix grid = probe_grid(lo, hi, points);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    std::vector<std::size_t> upper(points - 1);
    std::vector<std::size_t> lower(points - 1);
    std::iota(upper.begin(), upper.end(), std::size_t{1});
    std::iota(lower.begin(), lower.end(), std::size_t{0});

    auto hinge = [&](const GeneratorNet& net) {
        Var out = net.forward(tape, tape.constant(grid));
        Var slope = scale(sub(gather_rows(out, upper), gather_rows(out, lower)), 1.0 / step);
        return sum(relu(scale(slope, -1.0)));
    };
    return scale(add(hinge(margin.outer), hinge(margin.noise)), weight);
}

// ---------------------------------------------------------------------------

Matrix ClosedFormMargin::evaluate(const Matrix& x, const Matrix& eta) const {
    if (x.rows() != eta.rows() || eta.cols() != 1 || x.cols() != law.treatment_dim()) {
        throw DimensionError("ClosedFormMargin: expects x [n x " + std::to_string(law.treatment_dim()) +
                             "] and eta [n x 1]");
    }
    Matrix y(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) y(i, 0) = law.quantile(x.row(i), normal_cdf(eta(i, 0)));
    return y;
}

std::size_t margin_treatment_dim(const Margin& f) {
    struct {
        std::size_t operator()(const GeneratorNet& n) const { return n.cond_dim(); }
        std::size_t operator()(const PreAnmMargin&) const { return 1; }
        std::size_t operator()(const ClosedFormMargin& c) const { return c.law.treatment_dim(); }
    } visitor;
    return std::visit(visitor, f);
}

std::size_t margin_outcome_dim(const Margin& f) {
    struct {
        std::size_t operator()(const GeneratorNet& n) const { return n.out_dim(); }
        std::size_t operator()(const PreAnmMargin&) const { return 1; }
        std::size_t operator()(const ClosedFormMargin&) const { return 1; }
    } visitor;
    return std::visit(visitor, f);
}

std::vector<Matrix*> margin_parameters(Margin& f) {
    struct {
        std::vector<Matrix*> operator()(GeneratorNet& n) const { return n.parameters(); }
        std::vector<Matrix*> operator()(PreAnmMargin& p) const { return p.parameters(); }
        std::vector<Matrix*> operator()(ClosedFormMargin&) const { return {}; }
    } visitor;
    return std::visit(visitor, f);
}

namespace {

void require_role(const GeneratorNet& net, Role role, const char* op) {
    if (net.role() != role) {
        throw ContractError(std::string(op) + ": expected a " + role_name(role) + " net, got " +
                            role_name(net.role()));
    }
}

void require_rows(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows()) throw DimensionError(std::string(op) + ": batch sizes differ");
}

}  // namespace

Matrix forward_g(const GeneratorNet& g, const Matrix& noise) {
    require_role(g, Role::PastG, "forward_g");
    if (g.cond_dim() != 0) throw ContractError("forward_g: net is conditional");
    return g.evaluate(noise);
}

Matrix forward_f(const Margin& f, const Matrix& x, const Matrix& eta) {
    require_rows(x, eta, "forward_f");
    if (const auto* net = std::get_if<GeneratorNet>(&f)) {
        require_role(*net, Role::MarginF, "forward_f");
        if (x.cols() != net->cond_dim() || eta.cols() != net->noise_dim()) {
            throw DimensionError("forward_f: x/eta widths do not match the margin net");
        }
        return net->evaluate(hconcat(x, eta));
    }
    if (const auto* pre = std::get_if<PreAnmMargin>(&f)) return pre->evaluate(x, eta);
    return std::get<ClosedFormMargin>(f).evaluate(x, eta);
}

Var forward_f(Tape& tape, const Margin& f, Var x, Var eta) {
    if (x.rows() != eta.rows()) throw DimensionError("forward_f: batch sizes differ");
    if (const auto* net = std::get_if<GeneratorNet>(&f)) {
        require_role(*net, Role::MarginF, "forward_f");
        return net->forward(tape, concat_cols(x, eta));
    }
    if (const auto* pre = std::get_if<PreAnmMargin>(&f)) return pre->forward(tape, x, eta);
    throw ContractError("forward_f: a closed-form margin has no trainable path");
}

Matrix forward_h(const GeneratorNet& h, const Matrix& z, const Matrix& x, const Matrix& xi) {
    require_role(h, Role::CopulaH, "forward_h");
    require_rows(z, x, "forward_h");
    require_rows(z, xi, "forward_h");
    const Matrix* parts[] = {&z, &x, &xi};
    return h.evaluate(hconcat(parts));
}

Matrix forward_e(const GeneratorNet& e, const Matrix& x0, const Matrix& zeta) {
    require_role(e, Role::AuxE, "forward_e");
    require_rows(x0, zeta, "forward_e");
    return e.evaluate(hconcat(x0, zeta));
}

// ---------------------------------------------------------------------------

namespace {
enum class MarginTag : std::uint32_t { Net = 1, PreAnm = 2, ClosedForm = 3 };
}

void write_margin(std::ostream& os, const Margin& f) {
    if (const auto* net = std::get_if<GeneratorNet>(&f)) {
        binio::put_u32(os, static_cast<std::uint32_t>(MarginTag::Net));
        net->write(os);
    } else if (const auto* pre = std::get_if<PreAnmMargin>(&f)) {
        binio::put_u32(os, static_cast<std::uint32_t>(MarginTag::PreAnm));
        pre->outer.write(os);
        pre->noise.write(os);
    } else {
        const auto& law = std::get<ClosedFormMargin>(f).law;
        binio::put_u32(os, static_cast<std::uint32_t>(MarginTag::ClosedForm));
        binio::put_u32(os, static_cast<std::uint32_t>(law.family));
        binio::put_f64(os, law.intercept);
        binio::put_u64(os, law.slope.size());
        for (double s : law.slope) binio::put_f64(os, s);
        binio::put_f64(os, law.scale);
    }
}

Margin read_margin(std::istream& is) {
    switch (static_cast<MarginTag>(binio::get_u32(is))) {
        case MarginTag::Net:
            return GeneratorNet::read(is);
        case MarginTag::PreAnm: {
            GeneratorNet outer = GeneratorNet::read(is);
            GeneratorNet noise = GeneratorNet::read(is);
            return PreAnmMargin(std::move(outer), std::move(noise));
        }
        case MarginTag::ClosedForm: {
            MarginLaw law;
            const std::uint32_t family = binio::get_u32(is);
            if (family > 2) throw binio::FormatError("unknown margin family");
            law.family = static_cast<MarginLaw::Family>(family);
            law.intercept = binio::get_f64(is);
            const std::uint64_t k = binio::get_u64(is);
            if (k > 4096) throw binio::FormatError("margin slope length implausible");
            for (std::uint64_t j = 0; j < k; ++j) law.slope.push_back(binio::get_f64(is));
            law.scale = binio::get_f64(is);
            return ClosedFormMargin{law};
        }
    }
    throw binio::FormatError("unknown margin tag");
}

}  // namespace fren
