#include "mambaio/frames.hpp"

#include <cmath>

#include "mambaio/errors.hpp"

namespace mambaio::frames {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

bool Vec3::finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

RotationMatrix::RotationMatrix() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

RotationMatrix::RotationMatrix(const std::array<double, 9>& entries) : m_(entries) { validate(); }

RotationMatrix RotationMatrix::yaw(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return RotationMatrix({c, -s, 0, s, c, 0, 0, 0, 1});
}

RotationMatrix RotationMatrix::roll(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return RotationMatrix({1, 0, 0, 0, c, -s, 0, s, c});
}

RotationMatrix RotationMatrix::pitch(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return RotationMatrix({c, 0, s, 0, 1, 0, -s, 0, c});
}

Vec3 RotationMatrix::apply(const Vec3& v) const {
    return {m_[0] * v.x + m_[1] * v.y + m_[2] * v.z,
            m_[3] * v.x + m_[4] * v.y + m_[5] * v.z,
            m_[6] * v.x + m_[7] * v.y + m_[8] * v.z};
}

RotationMatrix RotationMatrix::transpose() const {
    return RotationMatrix({m_[0], m_[3], m_[6], m_[1], m_[4], m_[7], m_[2], m_[5], m_[8]});
}

RotationMatrix RotationMatrix::compose(const RotationMatrix& o) const {
    std::array<double, 9> r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += entry(i, k) * o.entry(k, j);
            r[static_cast<size_t>(i) * 3 + j] = acc;
        }
    return RotationMatrix(r);
}

double RotationMatrix::max_orthogonality_defect() const {
    double worst = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += entry(i, k) * entry(j, k);  // R R^T
            const double want = (i == j) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(acc - want));
        }
    return worst;
}

double RotationMatrix::det() const {
    return m_[0] * (m_[4] * m_[8] - m_[5] * m_[7]) - m_[1] * (m_[3] * m_[8] - m_[5] * m_[6]) +
           m_[2] * (m_[3] * m_[7] - m_[4] * m_[6]);
}

void RotationMatrix::validate() const {
    if (max_orthogonality_defect() > 1e-9)
        throw ContractError("invalid rotation: R R^T deviates from identity by more than 1e-9");
    if (std::abs(det() - 1.0) > 1e-9)
        throw ContractError("invalid rotation: det(R) is not +1 within 1e-9");
}

ImuSampleGlobal body_to_global(const ImuSampleBody& s, const RotationMatrix& r_b2g) {
    return {s.t, r_b2g.apply(s.omega), r_b2g.apply(s.accel)};
}

ImuSampleBody global_to_body(const ImuSampleGlobal& s, const RotationMatrix& r_g2b) {
    return {s.t, r_g2b.apply(s.omega), r_g2b.apply(s.accel)};
}

VelocityLabel relabel_velocity(const VelocityLabel& v, const RotationMatrix& r_g2b) {
    if (v.frame != Frame::global)
        throw ContractError("relabel_velocity: expected a global-frame label");
    Vec3 in = v.v;
    if (v.dims == 2) in.z = 0;
    Vec3 out = r_g2b.apply(in);
    if (v.dims == 2) out.z = 0;
    return {out, v.dims, Frame::body};
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

RotationMatrix quat_to_rotation(const Quat& q) {
    const double n = q.norm();
    if (n < 1e-9) throw DataError("degenerate orientation: zero quaternion");
    const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
    return RotationMatrix({1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                           2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                           2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)});
}

}  // namespace mambaio::frames
