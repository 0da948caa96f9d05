#pragma once

// Rectangular storage for longitudinal and survival data.

#include "fren/ndiff.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fren {

enum class SeqKind { Seq, Surv };

/// Baseline C, per-step blocks Z_t, X_t, Y_t and the at-risk mask. For survival
/// data Y_t is the cumulative event indicator and blocks of rows no longer at
/// risk hold zeros.
struct TrajectoryBatch {
    SeqKind kind = SeqKind::Seq;
    Matrix c;                // [n x d_c]
    std::vector<Matrix> z;   // T blocks of [n x d_z]
    std::vector<Matrix> x;   // T blocks of [n x d_x]
    std::vector<Matrix> y;   // T blocks of [n x d_y]
    Matrix at_risk;          // [n x T], 1 when the unit had no event before t

    std::size_t rows() const noexcept { return c.rows(); }
    std::size_t horizon() const noexcept { return z.size(); }
    std::size_t d_c() const noexcept { return c.cols(); }
    std::size_t d_z() const { return z.empty() ? 0 : z.front().cols(); }
    std::size_t d_x() const { return x.empty() ? 0 : x.front().cols(); }
    std::size_t d_y() const { return y.empty() ? 0 : y.front().cols(); }

    /// Throws DimensionError / std::invalid_argument on broken invariants.
    void validate() const;

    /// First step with an event, counted from 1; nullopt if none within the horizon.
    std::optional<std::size_t> event_time(std::size_t row) const;

    /// Rows at risk at step t.
    std::vector<std::size_t> at_risk_rows(std::size_t t) const;

    /// Mask recomputed from the outcome columns (survival kind).
    static Matrix mask_from_outcomes(const std::vector<Matrix>& y);

    static TrajectoryBatch empty(SeqKind kind, std::size_t n, std::size_t horizon, std::size_t d_c, std::size_t d_z,
                                 std::size_t d_x, std::size_t d_y);
};

/// One row per unit: C_*, then Z{t}_*, X{t}_*, Y{t}_* grouped by t.
void write_trajectory_csv(std::ostream& os, const TrajectoryBatch& batch);
TrajectoryBatch read_trajectory_csv(std::istream& is, SeqKind kind);

}  // namespace fren
