#pragma once

#include <array>
#include <cstddef>

namespace mambaio::frames {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double norm() const;
    bool finite() const;
};

// 3x3 rotation matrix, row-major. Construction validates orthonormality
// and det = +1 to 1e-9.
class RotationMatrix {
public:
    RotationMatrix();  // identity
    explicit RotationMatrix(const std::array<double, 9>& entries);

    static RotationMatrix identity() { return RotationMatrix(); }
    static RotationMatrix yaw(double radians);
    static RotationMatrix roll(double radians);   // about x
    static RotationMatrix pitch(double radians);  // about y

    Vec3 apply(const Vec3& v) const;
    RotationMatrix transpose() const;
    RotationMatrix compose(const RotationMatrix& o) const;  // this * o

    double entry(int r, int c) const { return m_[static_cast<size_t>(r) * 3 + c]; }
    double max_orthogonality_defect() const;
    double det() const;

private:
    std::array<double, 9> m_;
    void validate() const;
};

// Unit quaternion, wxyz order.
struct Quat {
    double w = 1, x = 0, y = 0, z = 0;
    double norm() const;
};

struct GravityVector {
    Vec3 g{0, 0, 9.81};
};

struct ImuSampleBody {
    double t = 0;
    Vec3 omega;  // rad/s
    Vec3 accel;  // m/s^2, gravity-inclusive
};

struct ImuSampleGlobal {
    double t = 0;
    Vec3 omega;
    Vec3 accel;
};

enum class Frame { body, global };

struct VelocityLabel {
    Vec3 v;
    int dims = 2;  // 2-D labels are stored embedded with v.z = 0
    Frame frame = Frame::global;
};

// Eq. 2: rotate body-frame measurements into the global frame. The
// accelerometer sample already contains R_{g->b} g, so rotating it yields
// a_true^global + g directly.
ImuSampleGlobal body_to_global(const ImuSampleBody& s, const RotationMatrix& r_b2g);

// Eq. 1: the inverse map.
ImuSampleBody global_to_body(const ImuSampleGlobal& s, const RotationMatrix& r_g2b);

// Eq. 1 label line: v^body = R_{g->b} v^global. 2-D labels are embedded as
// [vx, vy, 0] before rotation; the rotated z component is dropped on output.
VelocityLabel relabel_velocity(const VelocityLabel& v, const RotationMatrix& r_g2b);

// Standard quaternion-to-matrix formula; q is renormalized internally.
RotationMatrix quat_to_rotation(const Quat& q);

}  // namespace mambaio::frames
