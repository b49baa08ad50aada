#pragma once

#include <array>
#include <string>
#include <vector>

#include "mambaio/frames.hpp"
#include "mambaio/tensor.hpp"

namespace mambaio::data {

struct ImuSample {
    double t = 0;
    frames::Vec3 gyro;   // rad/s
    frames::Vec3 accel;  // m/s^2, gravity-inclusive
    frames::Quat quat;   // body -> global, wxyz
    frames::Vec3 pos;    // global, m
};

struct ImuSequence {
    double sample_rate = 200.0;
    std::string frame = "body";  // frame of gyro/accel columns
    std::vector<ImuSample> samples;

    double dt() const { return 1.0 / sample_rate; }
    void validate() const;
};

struct TrainingWindow {
    Tensor<double> x;  // 6 x L: three gyro rows then three accel rows
    std::array<double, 2> label{};  // planar velocity, m/s
    int start = 0;
};

struct GenParams {
    double speed_min = 0.6;        // m/s
    double speed_max = 1.8;
    double turn_rate_max = 0.5;    // rad/s
    double turn_freq_hz = 0.08;
    double speed_freq_hz = 0.05;
    double gait_freq_hz = 1.9;
    double gait_speed_amp = 0.15;  // m/s speed modulation at gait frequency
    double roll_amp = 0.12;        // rad, gait-locked roll oscillation
    double noise_gyro_std = 0.0;   // rad/s
    double noise_accel_std = 0.0;  // m/s^2
    bool random_mount_yaw = true;  // constant per-sequence device yaw offset

    void validate() const;
    static GenParams from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// Per-sample ground truth kept alongside a generated sequence.
struct GenTruth {
    std::vector<frames::Vec3> vel_global;
    std::vector<frames::Vec3> accel_true_global;  // gravity-free
};

// Smooth piecewise-turning planar walk with gait oscillation. Measurements
// follow the body-frame convention: accel includes rotated gravity, gyro is
// the exact body rate of the generated orientation.
ImuSequence generate_trajectory(uint64_t seed, double duration_s, const GenParams& params,
                                double sample_rate = 200.0, GenTruth* truth = nullptr);

// Directory layout: <dir>/meta.json + <dir>/data.csv with header
// t,gx,gy,gz,ax,ay,az,qw,qx,qy,qz,px,py,pz. Values print as %.17g so the
// round trip is exact.
void save_sequence(const ImuSequence& seq, const std::string& dir);
ImuSequence load_sequence(const std::string& dir);

// Rewrites the measurement columns into the requested frame using the
// per-sample quaternions; positions and quaternions are untouched.
ImuSequence transform_sequence(const ImuSequence& seq, frames::Frame target);

// Cuts length-L windows at the given stride. Global mode rotates each
// sample into the global frame; body mode passes raw measurements and
// relabels the velocity into the frame of the window's last sample.
// Label = (pos[end] - pos[start]) / ((L-1) dt), planar components.
std::vector<TrainingWindow> make_windows(const ImuSequence& seq, int window_len, int stride,
                                         frames::Frame frame);

}  // namespace mambaio::data
