#pragma once

#include <array>
#include <vector>

#include "mambaio/tensor.hpp"

namespace mambaio::metrics {

// Planar time-indexed positions at a fixed step.
struct Trajectory {
    double dt = 0;
    std::vector<std::array<double, 2>> positions;

    void validate() const;
};

struct ExplainedVariance {
    std::vector<double> ratios;      // per-component share of total variance
    std::vector<double> cumulative;  // prefix sums, truncated to k
};

struct RigidTransform {
    double angle = 0;                 // rotation applied to the estimate
    std::array<double, 2> shift{};    // translation applied after rotation
};

// Rectangle-rule integration: positions[t] = p0 + dt * sum_{i<=t} v_i.
Trajectory integrate_velocity(const std::vector<std::array<double, 2>>& v_seq, double dt,
                              const std::array<double, 2>& p0);

// Closed-form planar rigid alignment (rotation + translation, no scale) of
// est onto gt; falls back to translation only when the point sets are
// degenerate.
RigidTransform align_rigid(const Trajectory& est, const Trajectory& gt);

// RMSE between gt and the rigidly aligned estimate.
double ate(const Trajectory& est, const Trajectory& gt);

// RMSE of endpoint error over fixed-duration windows whose starts are
// translated to a common origin.
double rte(const Trajectory& est, const Trajectory& gt, double window_s = 60.0);

// Column-centered singular-value energy: ratios are sigma_i^2 / sum sigma^2
// over all components, reported for the top k.
ExplainedVariance pca_explained_variance(const Tensor<double>& features, int k = 50);

}  // namespace mambaio::metrics
