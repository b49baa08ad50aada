#include "mambaio/data.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mambaio/errors.hpp"

namespace mambaio::data {

using frames::Quat;
using frames::RotationMatrix;
using frames::Vec3;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kGravity = 9.81;

Quat quat_mul(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat quat_yaw(double a) { return {std::cos(a / 2), 0, 0, std::sin(a / 2)}; }
Quat quat_roll(double a) { return {std::cos(a / 2), std::sin(a / 2), 0, 0}; }

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void ImuSequence::validate() const {
    if (samples.size() < 2) throw DataError("sequence: needs at least two samples");
    if (sample_rate <= 0) throw DataError("sequence: nonpositive sample rate");
    const double step = dt();
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!std::isfinite(s.t) || !s.gyro.finite() || !s.accel.finite() || !s.pos.finite())
            throw DataError("sequence: non-finite values at sample " + std::to_string(i));
        if (std::abs(s.quat.norm() - 1.0) > 1e-6)
            throw DataError("sequence: non-unit quaternion at sample " + std::to_string(i));
        if (i > 0) {
            const double d = s.t - samples[i - 1].t;
            if (d <= 0) throw DataError("sequence: non-monotone time at sample " +
                                        std::to_string(i));
            if (std::abs(d - step) > 1e-6 * step)
                throw DataError("sequence: non-uniform time step at sample " +
                                std::to_string(i));
        }
    }
    if (frame != "body" && frame != "global")
        throw DataError("sequence: unknown frame tag " + frame);
}

void GenParams::validate() const {
    if (speed_min <= 0 || speed_max < speed_min)
        throw ConfigError("generator: need 0 < speed_min <= speed_max");
    if ((speed_max - speed_min) / 2 < gait_speed_amp)
        throw ConfigError("generator: gait_speed_amp too large for the speed range");
    if (turn_rate_max < 0 || gait_freq_hz <= 0 || turn_freq_hz <= 0 || speed_freq_hz <= 0)
        throw ConfigError("generator: rates and frequencies must be positive");
    if (noise_gyro_std < 0 || noise_accel_std < 0)
        throw ConfigError("generator: negative noise level");
}

GenParams GenParams::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("generator params: bad JSON: ") + e.what());
    }
    GenParams p;
    p.speed_min = j.value("speed_min", p.speed_min);
    p.speed_max = j.value("speed_max", p.speed_max);
    p.turn_rate_max = j.value("turn_rate_max", p.turn_rate_max);
    p.turn_freq_hz = j.value("turn_freq_hz", p.turn_freq_hz);
    p.speed_freq_hz = j.value("speed_freq_hz", p.speed_freq_hz);
    p.gait_freq_hz = j.value("gait_freq_hz", p.gait_freq_hz);
    p.gait_speed_amp = j.value("gait_speed_amp", p.gait_speed_amp);
    p.roll_amp = j.value("roll_amp", p.roll_amp);
    p.noise_gyro_std = j.value("noise_gyro_std", p.noise_gyro_std);
    p.noise_accel_std = j.value("noise_accel_std", p.noise_accel_std);
    p.random_mount_yaw = j.value("random_mount_yaw", p.random_mount_yaw);
    p.validate();
    return p;
}

std::string GenParams::to_json_text() const {
    nlohmann::json j = {{"speed_min", speed_min},
                        {"speed_max", speed_max},
                        {"turn_rate_max", turn_rate_max},
                        {"turn_freq_hz", turn_freq_hz},
                        {"speed_freq_hz", speed_freq_hz},
                        {"gait_freq_hz", gait_freq_hz},
                        {"gait_speed_amp", gait_speed_amp},
                        {"roll_amp", roll_amp},
                        {"noise_gyro_std", noise_gyro_std},
                        {"noise_accel_std", noise_accel_std},
                        {"random_mount_yaw", random_mount_yaw}};
    return j.dump(2);
}

ImuSequence generate_trajectory(uint64_t seed, double duration_s, const GenParams& params,
                                double sample_rate, GenTruth* truth) {
    params.validate();
    if (sample_rate <= 0) throw ConfigError("generator: nonpositive sample rate");
    if (duration_s <= 0) throw ConfigError("generator: nonpositive duration");

    Rng rng(seed);
    // per-sequence draws
    const double psi0 = rng.uniform(-kPi, kPi);
    const double w0 = rng.uniform(-0.6, 0.6) * params.turn_rate_max;
    const double w_amp =
        rng.uniform(0.2, 0.4) * params.turn_rate_max / (2 * kPi * params.turn_freq_hz);
    const double phase_turn = rng.uniform(0, 2 * kPi);
    const double margin = (params.speed_max - params.speed_min) / 2 - params.gait_speed_amp;
    const double s_dev = rng.uniform(0.2, 0.8) * margin;
    const double s_mid = rng.uniform(params.speed_min + s_dev + params.gait_speed_amp,
                                     params.speed_max - s_dev - params.gait_speed_amp);
    const double phase_speed = rng.uniform(0, 2 * kPi);
    const double phase_gait = rng.uniform(0, 2 * kPi);
    const double phase_roll = rng.uniform(0, 2 * kPi);
    const double mount_yaw = params.random_mount_yaw ? rng.uniform(-kPi, kPi) : 0.0;

    const double wt = 2 * kPi * params.turn_freq_hz;
    const double ws = 2 * kPi * params.speed_freq_hz;
    const double wg = 2 * kPi * params.gait_freq_hz;

    auto heading = [&](double t) { return psi0 + w0 * t + w_amp * std::sin(wt * t + phase_turn); };
    auto heading_rate = [&](double t) { return w0 + w_amp * wt * std::cos(wt * t + phase_turn); };
    auto speed = [&](double t) {
        return s_mid + s_dev * std::sin(ws * t + phase_speed) +
               params.gait_speed_amp * std::sin(wg * t + phase_gait);
    };
    auto speed_rate = [&](double t) {
        return s_dev * ws * std::cos(ws * t + phase_speed) +
               params.gait_speed_amp * wg * std::cos(wg * t + phase_gait);
    };
    auto roll = [&](double t) { return params.roll_amp * std::sin(wg * t + phase_roll); };
    auto roll_rate = [&](double t) { return params.roll_amp * wg * std::cos(wg * t + phase_roll); };

    const double step = 1.0 / sample_rate;
    const int n = static_cast<int>(std::llround(duration_s * sample_rate)) + 1;

    ImuSequence seq;
    seq.sample_rate = sample_rate;
    seq.frame = "body";
    seq.samples.resize(static_cast<size_t>(n));
    if (truth) {
        truth->vel_global.resize(static_cast<size_t>(n));
        truth->accel_true_global.resize(static_cast<size_t>(n));
    }

    Vec3 pos{0, 0, 0};
    Vec3 vel_prev;
    for (int i = 0; i < n; ++i) {
        const double t = i * step;
        const double psi = heading(t), dpsi = heading_rate(t);
        const double sp = speed(t), dsp = speed_rate(t);
        const double c = std::cos(psi), s = std::sin(psi);
        const Vec3 vel{sp * c, sp * s, 0};
        const Vec3 acc{dsp * c - sp * dpsi * s, dsp * s + sp * dpsi * c, 0};

        if (i > 0) pos = pos + (vel_prev + vel) * (0.5 * step);  // trapezoid, exact vs labels
        vel_prev = vel;

        const double phi = roll(t), dphi = roll_rate(t);
        const double alpha = psi + mount_yaw;
        const Quat q = quat_mul(quat_yaw(alpha), quat_roll(phi));
        const RotationMatrix r = frames::quat_to_rotation(q);
        const RotationMatrix r_t = r.transpose();

        // body rate of Rz(alpha) Rx(phi): [phi', alpha' sin(phi), alpha' cos(phi)]
        const Vec3 gyro_body{dphi, dpsi * std::sin(phi), dpsi * std::cos(phi)};
        const Vec3 accel_body = r_t.apply(acc + Vec3{0, 0, kGravity});

        auto& smp = seq.samples[static_cast<size_t>(i)];
        smp.t = t;
        smp.quat = q;
        smp.pos = pos;
        smp.gyro = gyro_body;
        smp.accel = accel_body;
        if (params.noise_gyro_std > 0 || params.noise_accel_std > 0) {
            smp.gyro = smp.gyro + Vec3{rng.normal(0, params.noise_gyro_std),
                                       rng.normal(0, params.noise_gyro_std),
                                       rng.normal(0, params.noise_gyro_std)};
            smp.accel = smp.accel + Vec3{rng.normal(0, params.noise_accel_std),
                                         rng.normal(0, params.noise_accel_std),
                                         rng.normal(0, params.noise_accel_std)};
        }
        if (truth) {
            truth->vel_global[static_cast<size_t>(i)] = vel;
            truth->accel_true_global[static_cast<size_t>(i)] = acc;
        }
    }
    return seq;
}

void save_sequence(const ImuSequence& seq, const std::string& dir) {
    seq.validate();
    std::filesystem::create_directories(dir);
    {
        nlohmann::json meta = {
            {"sample_rate", seq.sample_rate},
            {"frame", seq.frame},
            {"axes", "gyro xyz, accel xyz, quaternion wxyz (body->global), position xyz"},
            {"units", {{"t", "s"}, {"gyro", "rad/s"}, {"accel", "m/s^2"}, {"pos", "m"}}}};
        std::ofstream f(dir + "/meta.json");
        if (!f) throw ConfigError("save_sequence: cannot write meta.json in " + dir);
        f << meta.dump(2) << "\n";
    }
    std::ofstream f(dir + "/data.csv");
    if (!f) throw ConfigError("save_sequence: cannot write data.csv in " + dir);
    f << "t,gx,gy,gz,ax,ay,az,qw,qx,qy,qz,px,py,pz\n";
    for (const auto& s : seq.samples) {
        f << fmt17(s.t) << ',' << fmt17(s.gyro.x) << ',' << fmt17(s.gyro.y) << ','
          << fmt17(s.gyro.z) << ',' << fmt17(s.accel.x) << ',' << fmt17(s.accel.y) << ','
          << fmt17(s.accel.z) << ',' << fmt17(s.quat.w) << ',' << fmt17(s.quat.x) << ','
          << fmt17(s.quat.y) << ',' << fmt17(s.quat.z) << ',' << fmt17(s.pos.x) << ','
          << fmt17(s.pos.y) << ',' << fmt17(s.pos.z) << '\n';
    }
}

ImuSequence load_sequence(const std::string& dir) {
    ImuSequence seq;
    {
        std::ifstream f(dir + "/meta.json");
        if (!f) throw ParseError("load_sequence: missing meta.json in " + dir);
        nlohmann::json meta;
        try {
            f >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("load_sequence: bad meta.json: ") + e.what());
        }
        seq.sample_rate = meta.value("sample_rate", 200.0);
        seq.frame = meta.value("frame", std::string("body"));
    }
    std::ifstream f(dir + "/data.csv");
    if (!f) throw ParseError("load_sequence: missing data.csv in " + dir);
    std::string line;
    if (!std::getline(f, line) || line != "t,gx,gy,gz,ax,ay,az,qw,qx,qy,qz,px,py,pz")
        throw ParseError("load_sequence: bad or missing header in data.csv");
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::array<double, 14> v{};
        size_t pos = 0;
        for (int k = 0; k < 14; ++k) {
            const size_t comma = line.find(',', pos);
            const std::string cell = line.substr(pos, comma == std::string::npos
                                                          ? std::string::npos
                                                          : comma - pos);
            try {
                size_t used = 0;
                v[static_cast<size_t>(k)] = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument("trailing junk");
            } catch (const std::exception&) {
                throw ParseError("load_sequence: data.csv line " + std::to_string(lineno) +
                                 ": bad field " + std::to_string(k + 1));
            }
            if (comma == std::string::npos) {
                if (k != 13)
                    throw ParseError("load_sequence: data.csv line " + std::to_string(lineno) +
                                     ": expected 14 fields");
                pos = line.size();
            } else {
                pos = comma + 1;
            }
        }
        ImuSample s;
        s.t = v[0];
        s.gyro = {v[1], v[2], v[3]};
        s.accel = {v[4], v[5], v[6]};
        s.quat = {v[7], v[8], v[9], v[10]};
        s.pos = {v[11], v[12], v[13]};
        seq.samples.push_back(s);
    }
    seq.validate();
    return seq;
}

ImuSequence transform_sequence(const ImuSequence& seq, frames::Frame target) {
    seq.validate();
    const bool to_global = target == frames::Frame::global;
    if ((to_global && seq.frame == "global") || (!to_global && seq.frame == "body")) return seq;
    ImuSequence out = seq;
    out.frame = to_global ? "global" : "body";
    for (auto& s : out.samples) {
        const RotationMatrix r = frames::quat_to_rotation(s.quat);
        const RotationMatrix use = to_global ? r : r.transpose();
        s.gyro = use.apply(s.gyro);
        s.accel = use.apply(s.accel);
    }
    return out;
}

std::vector<TrainingWindow> make_windows(const ImuSequence& seq, int window_len, int stride,
                                         frames::Frame frame) {
    seq.validate();
    if (window_len < 2 || stride < 1) throw ConfigError("make_windows: bad window or stride");
    const int n = static_cast<int>(seq.samples.size());
    if (n < window_len)
        throw DataError("make_windows: sequence shorter than one window");

    // Work from body-frame measurements regardless of storage frame.
    const ImuSequence base =
        seq.frame == "body" ? seq : transform_sequence(seq, frames::Frame::body);

    const double step = base.dt();
    std::vector<TrainingWindow> out;
    for (int start = 0; start + window_len <= n; start += stride) {
        const int last = start + window_len - 1;
        const auto& s0 = base.samples[static_cast<size_t>(start)];
        const auto& s1 = base.samples[static_cast<size_t>(last)];
        const double dur = (window_len - 1) * step;
        const Vec3 vel_global = (s1.pos - s0.pos) * (1.0 / dur);

        TrainingWindow w;
        w.start = start;
        w.x = Tensor<double>({6, window_len});
        if (frame == frames::Frame::global) {
            for (int i = 0; i < window_len; ++i) {
                const auto& s = base.samples[static_cast<size_t>(start + i)];
                const RotationMatrix r = frames::quat_to_rotation(s.quat);
                const Vec3 g = r.apply(s.gyro), a = r.apply(s.accel);
                w.x.at(0, i) = g.x;
                w.x.at(1, i) = g.y;
                w.x.at(2, i) = g.z;
                w.x.at(3, i) = a.x;
                w.x.at(4, i) = a.y;
                w.x.at(5, i) = a.z;
            }
            w.label = {vel_global.x, vel_global.y};
        } else {
            for (int i = 0; i < window_len; ++i) {
                const auto& s = base.samples[static_cast<size_t>(start + i)];
                w.x.at(0, i) = s.gyro.x;
                w.x.at(1, i) = s.gyro.y;
                w.x.at(2, i) = s.gyro.z;
                w.x.at(3, i) = s.accel.x;
                w.x.at(4, i) = s.accel.y;
                w.x.at(5, i) = s.accel.z;
            }
            const RotationMatrix r_end = frames::quat_to_rotation(s1.quat);
            const frames::VelocityLabel lbl{vel_global, 2, frames::Frame::global};
            const auto body = frames::relabel_velocity(lbl, r_end.transpose());
            w.label = {body.v.x, body.v.y};
        }
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace mambaio::data
