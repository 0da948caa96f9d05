#pragma once

// Sequential frengression for longitudinal and survival data. A baseline model
// g_c for C, then per step t a past model g_t for (Z_t, X_t) given the history,
// a causal margin f_t for Y_t(x_0..x_t) given C, a dependency model h_t and,
// from t = 1 on, an auxiliary e_t for Z_t given the history.
//
// Histories are flat concatenations:
//   g_t, e_t : [c | z_0 .. z_{t-1} | x_0 .. x_{t-1}]
//   f_t      : [c | x_0 .. x_t]
//   h_t      : [c | z_0 .. z_t | x_0 .. x_t]

#include "fren/frengression.hpp"
#include "fren/trajectory.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fren {

struct SeqSchema {
    std::vector<ColumnKind> c_kinds, z_kinds, x_kinds, y_kinds;

    std::size_t d_c() const noexcept { return c_kinds.size(); }
    std::size_t d_z() const noexcept { return z_kinds.size(); }
    std::size_t d_x() const noexcept { return x_kinds.size(); }
    std::size_t d_y() const noexcept { return y_kinds.size(); }

    /// Columns holding only 0 and 1 on at-risk rows are binary; survival outcomes always are.
    static SeqSchema infer(const TrajectoryBatch& data);
    void validate() const;
    bool operator==(const SeqSchema&) const = default;
};

struct SeqStep {
    GeneratorNet g;
    Margin f;  // a MarginF net
    GeneratorNet h;
    std::optional<GeneratorNet> e;  // absent at t = 0
    Standardizer scaling;           // over [z_t | x_t | y_t]
    TrainingLog log;
    std::size_t train_rows = 0;

    bool operator==(const SeqStep&) const = default;
};

struct SeqModel {
    SeqKind kind = SeqKind::Seq;
    SeqSchema schema;
    GeneratorNet g_c;
    Standardizer c_scaling;
    std::vector<double> g_c_log;
    std::vector<SeqStep> steps;
    /// Set when the horizon was cut short during fitting.
    std::vector<std::string> warnings;

    std::size_t horizon() const noexcept { return steps.size(); }

    std::size_t g_cond_dim(std::size_t t) const;
    std::size_t f_cond_dim(std::size_t t) const;
    std::size_t h_cond_dim(std::size_t t) const;

    void validate() const;
    bool operator==(const SeqModel&) const = default;
};

/// Fresh nets with the architecture fit_seq would build.
SeqModel make_seq_model(SeqKind kind, const SeqSchema& schema, std::size_t horizon, const FitConfig& cfg, Rng& init);

/// Fits g_c, then for each t: g_t, e_t (t >= 1), then (f_t, h_t) jointly. The
/// survival kind trains step t on the rows at risk at t; a step with fewer than
/// two such rows ends the horizon and leaves a warning in the model.
SeqModel fit_seq(const TrajectoryBatch& data, const SeqSchema& schema, const FitConfig& cfg);
SeqModel fit_seq(const TrajectoryBatch& data, const FitConfig& cfg);

Matrix sample_baseline(const SeqModel& model, std::size_t n, Rng& rng);

/// Chained draws of (C, Z_t, X_t, Y_t). Survival trajectories stop at their
/// first event: later blocks are zero with Y = 1 and the mask cleared.
TrajectoryBatch sample_trajectory_joint(const SeqModel& model, std::size_t n, Rng& rng);

/// Outcome blocks Y_t(xbar_0..xbar_t), one [n x d_y] matrix per step. xbar is
/// [T x d_x]. With c empty each draw gets its own baseline from g_c. The
/// survival kind keeps Y at 1 once an event is drawn.
std::vector<Matrix> sample_trajectory_interventional(const SeqModel& model, const Matrix& xbar,
                                                     const std::optional<std::vector<double>>& c, std::size_t n,
                                                     Rng& rng);

/// Product-limit survival curve on steps 0..T. Event times lie in 1..T;
/// nullopt means censored at T. Returns S(0) = 1, S(1), ..., S(T).
std::vector<double> kaplan_meier(const std::vector<std::optional<std::size_t>>& event_times, std::size_t horizon);
std::vector<double> kaplan_meier(const TrajectoryBatch& batch);

/// Permutation within groups of equal rank bin of the first column of c (8 bins).
std::vector<std::size_t> stratified_permutation(const Matrix& c, std::size_t bins, Rng& rng);

void write_seq_model(std::ostream& os, const SeqModel& model);
SeqModel read_seq_model(std::istream& is);

}  // namespace fren
