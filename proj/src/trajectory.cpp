#include "fren/trajectory.hpp"

#include "fren/csv.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <tuple>

namespace fren {

void TrajectoryBatch::validate() const {
    const std::size_t n = rows();
    const std::size_t T = horizon();
    if (T == 0) throw DimensionError("trajectory: horizon must be >= 1");
    if (x.size() != T || y.size() != T) throw DimensionError("trajectory: Z, X, Y block counts differ");
    for (std::size_t t = 0; t < T; ++t) {
        if (z[t].rows() != n || x[t].rows() != n || y[t].rows() != n) {
            throw DimensionError("trajectory: block at t=" + std::to_string(t) + " has the wrong row count");
        }
        if (z[t].cols() != d_z() || x[t].cols() != d_x() || y[t].cols() != d_y()) {
            throw DimensionError("trajectory: block widths change over time");
        }
    }
    if (at_risk.rows() != n || at_risk.cols() != T) throw DimensionError("trajectory: mask shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            const double m = at_risk(i, t);
            if (m != 0.0 && m != 1.0) throw std::invalid_argument("trajectory: mask entries must be 0 or 1");
            if (t > 0 && m > at_risk(i, t - 1)) throw std::invalid_argument("trajectory: mask increases over time");
        }
    }
    if (kind != SeqKind::Surv) return;
    if (d_y() != 1) throw DimensionError("trajectory: survival outcome must be one column");
    const Matrix expected = mask_from_outcomes(y);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            const double v = y[t](i, 0);
            if (v != 0.0 && v != 1.0) throw std::invalid_argument("trajectory: survival outcomes must be 0 or 1");
            if (t > 0 && v < y[t - 1](i, 0)) throw std::invalid_argument("trajectory: event indicator reverts to 0");
            if (at_risk(i, t) != expected(i, t)) throw std::invalid_argument("trajectory: mask disagrees with outcomes");
        }
    }
}

std::optional<std::size_t> TrajectoryBatch::event_time(std::size_t row) const {
    for (std::size_t t = 0; t < horizon(); ++t)
        if (y[t](row, 0) == 1.0) return t + 1;
    return std::nullopt;
}

std::vector<std::size_t> TrajectoryBatch::at_risk_rows(std::size_t t) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows(); ++i)
        if (at_risk(i, t) == 1.0) out.push_back(i);
    return out;
}

Matrix TrajectoryBatch::mask_from_outcomes(const std::vector<Matrix>& y) {
    const std::size_t T = y.size();
    const std::size_t n = T ? y.front().rows() : 0;
    Matrix mask(n, T, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 1; t < T; ++t) mask(i, t) = y[t - 1](i, 0) == 1.0 ? 0.0 : mask(i, t - 1);
    return mask;
}

TrajectoryBatch TrajectoryBatch::empty(SeqKind kind, std::size_t n, std::size_t horizon, std::size_t d_c,
                                       std::size_t d_z, std::size_t d_x, std::size_t d_y) {
    TrajectoryBatch b;
    b.kind = kind;
    b.c = Matrix(n, d_c);
    for (std::size_t t = 0; t < horizon; ++t) {
        b.z.emplace_back(n, d_z);
        b.x.emplace_back(n, d_x);
        b.y.emplace_back(n, d_y);
    }
    b.at_risk = Matrix(n, horizon, 1.0);
    return b;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryBatch& batch) {
    std::vector<std::string> header;
    std::vector<const Matrix*> blocks;
    for (std::size_t k = 0; k < batch.d_c(); ++k) header.push_back("C_" + std::to_string(k));
    blocks.push_back(&batch.c);
    for (std::size_t t = 0; t < batch.horizon(); ++t) {
        const std::string ts = std::to_string(t);
        for (std::size_t k = 0; k < batch.d_z(); ++k) header.push_back("Z" + ts + "_" + std::to_string(k));
        for (std::size_t k = 0; k < batch.d_x(); ++k) header.push_back("X" + ts + "_" + std::to_string(k));
        for (std::size_t k = 0; k < batch.d_y(); ++k) header.push_back("Y" + ts + "_" + std::to_string(k));
        blocks.push_back(&batch.z[t]);
        blocks.push_back(&batch.x[t]);
        blocks.push_back(&batch.y[t]);
    }
    write_csv(os, header, hconcat(blocks));
}

TrajectoryBatch read_trajectory_csv(std::istream& is, SeqKind kind) {
    const NumericTable table = read_csv(is);
    // (block letter, t, k) -> column
    std::map<std::tuple<char, std::size_t, std::size_t>, std::size_t> where;
    std::size_t horizon = 0;
    std::size_t dims[4] = {0, 0, 0, 0};  // C, Z, X, Y widths
    for (std::size_t col = 0; col < table.header.size(); ++col) {
        const std::string& h = table.header[col];
        const auto us = h.find('_');
        if (h.empty() || us == std::string::npos) throw InputError("trajectory csv: bad column name '" + h + "'");
        const char block = h[0];
        std::size_t t = 0;
        try {
            if (block != 'C') t = std::stoul(h.substr(1, us - 1));
            const std::size_t k = std::stoul(h.substr(us + 1));
            const int slot = block == 'C' ? 0 : block == 'Z' ? 1 : block == 'X' ? 2 : block == 'Y' ? 3 : -1;
            if (slot < 0) throw InputError("trajectory csv: unknown block in '" + h + "'");
            where[{block, t, k}] = col;
            dims[slot] = std::max(dims[slot], k + 1);
            if (block != 'C') horizon = std::max(horizon, t + 1);
        } catch (const std::logic_error&) {
            throw InputError("trajectory csv: bad column name '" + h + "'");
        }
    }
    const std::size_t n = table.values.rows();
    TrajectoryBatch b = TrajectoryBatch::empty(kind, n, horizon, dims[0], dims[1], dims[2], dims[3]);
    auto fill = [&](Matrix& m, char block, std::size_t t) {
        for (std::size_t k = 0; k < m.cols(); ++k) {
            const auto it = where.find({block, t, k});
            if (it == where.end()) throw InputError(std::string("trajectory csv: missing column for block ") + block);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = table.values(i, it->second);
                if (!std::isfinite(v)) throw InputError("trajectory csv: non-finite value");
                m(i, k) = v;
            }
        }
    };
    fill(b.c, 'C', 0);
    for (std::size_t t = 0; t < horizon; ++t) {
        fill(b.z[t], 'Z', t);
        fill(b.x[t], 'X', t);
        fill(b.y[t], 'Y', t);
    }
    if (kind == SeqKind::Surv) b.at_risk = TrajectoryBatch::mask_from_outcomes(b.y);
    b.validate();
    return b;
}

}  // namespace fren
