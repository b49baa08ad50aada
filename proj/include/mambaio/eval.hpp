#pragma once

#include <array>
#include <functional>

#include "mambaio/data.hpp"
#include "mambaio/metrics.hpp"

namespace mambaio::eval {

struct SeqEval {
    double ate_m = 0;
    double rte_m = 0;
    double window_s = 0;
    int n_windows = 0;
    metrics::Trajectory est, gt;
};

// Per-window planar velocity in the frame the windows were cut in.
using Predictor = std::function<std::array<double, 2>(const data::TrainingWindow&)>;

// Integrates window-level velocity predictions into a trajectory anchored at
// the first window's ground-truth endpoint and scores it against the
// ground-truth positions at the window-end timestamps. Body-frame
// predictions are rotated to global with the window-end orientation first.
inline SeqEval evaluate_sequence(const data::ImuSequence& seq, int window_len, int stride,
                                 frames::Frame frame, const Predictor& predict,
                                 double rte_window_s = 60.0, bool rte_auto = true) {
    auto windows = data::make_windows(seq, window_len, stride, frame);
    if (windows.size() < 2) throw DataError("eval: sequence too short for two windows");

    const double traj_dt = stride * seq.dt();
    SeqEval r;
    r.gt.dt = traj_dt;
    r.est.dt = traj_dt;

    std::vector<std::array<double, 2>> vels(windows.size());
    const int64_t n = static_cast<int64_t>(windows.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const auto& w = windows[static_cast<size_t>(i)];
        auto v = predict(w);
        if (frame == frames::Frame::body) {
            const auto& s = seq.samples[static_cast<size_t>(w.start + window_len - 1)];
            const auto rot = frames::quat_to_rotation(s.quat);
            const frames::Vec3 vg = rot.apply({v[0], v[1], 0});
            v = {vg.x, vg.y};
        }
        vels[static_cast<size_t>(i)] = v;
    }

    for (const auto& w : windows) {
        const auto& p = seq.samples[static_cast<size_t>(w.start + window_len - 1)].pos;
        r.gt.positions.push_back({p.x, p.y});
    }
    r.est.positions.push_back(r.gt.positions[0]);
    for (size_t i = 1; i < windows.size(); ++i) {
        const auto& prev = r.est.positions.back();
        r.est.positions.push_back(
            {prev[0] + vels[i][0] * traj_dt, prev[1] + vels[i][1] * traj_dt});
    }

    const double duration = (static_cast<double>(windows.size()) - 1) * traj_dt;
    r.window_s = rte_window_s;
    if (rte_auto && r.window_s >= duration) r.window_s = duration / 2;
    r.ate_m = metrics::ate(r.est, r.gt);
    r.rte_m = metrics::rte(r.est, r.gt, r.window_s);
    r.n_windows = static_cast<int>(windows.size());
    return r;
}

}  // namespace mambaio::eval
