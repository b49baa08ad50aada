#include "mambaio/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mambaio/errors.hpp"
#include "mambaio/kernels.hpp"

namespace mambaio::metrics {

void Trajectory::validate() const {
    if (positions.size() < 2) throw ContractError("trajectory: needs at least two positions");
    if (dt <= 0) throw ContractError("trajectory: dt must be positive");
    for (const auto& p : positions)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
            throw NumericError("trajectory: non-finite position");
}

Trajectory integrate_velocity(const std::vector<std::array<double, 2>>& v_seq, double dt,
                              const std::array<double, 2>& p0) {
    if (dt <= 0) throw ContractError("integrate_velocity: dt must be positive");
    Trajectory out;
    out.dt = dt;
    out.positions.reserve(v_seq.size());
    double x = p0[0], y = p0[1];
    for (const auto& v : v_seq) {
        x += dt * v[0];
        y += dt * v[1];
        out.positions.push_back({x, y});
    }
    return out;
}

RigidTransform align_rigid(const Trajectory& est, const Trajectory& gt) {
    est.validate();
    gt.validate();
    if (est.positions.size() != gt.positions.size() || est.dt != gt.dt)
        throw ContractError("align: trajectories must share length and dt");
    const size_t n = est.positions.size();

    double emx = 0, emy = 0, gmx = 0, gmy = 0;
    for (size_t i = 0; i < n; ++i) {
        emx += est.positions[i][0];
        emy += est.positions[i][1];
        gmx += gt.positions[i][0];
        gmy += gt.positions[i][1];
    }
    emx /= static_cast<double>(n);
    emy /= static_cast<double>(n);
    gmx /= static_cast<double>(n);
    gmy /= static_cast<double>(n);

    // cross-covariance of centered point sets; optimal angle from its
    // symmetric/antisymmetric parts
    double dot = 0, cross = 0, enorm = 0;
    for (size_t i = 0; i < n; ++i) {
        const double ex = est.positions[i][0] - emx, ey = est.positions[i][1] - emy;
        const double gx = gt.positions[i][0] - gmx, gy = gt.positions[i][1] - gmy;
        dot += ex * gx + ey * gy;
        cross += ex * gy - ey * gx;
        enorm += ex * ex + ey * ey;
    }

    RigidTransform tf;
    // degenerate: all points coincide, translation-only alignment
    if (enorm < 1e-18 || (dot * dot + cross * cross) < 1e-30) {
        tf.angle = 0;
    } else {
        tf.angle = std::atan2(cross, dot);
    }
    const double c = std::cos(tf.angle), s = std::sin(tf.angle);
    tf.shift = {gmx - (c * emx - s * emy), gmy - (s * emx + c * emy)};
    return tf;
}

double ate(const Trajectory& est, const Trajectory& gt) {
    const RigidTransform tf = align_rigid(est, gt);
    const double c = std::cos(tf.angle), s = std::sin(tf.angle);
    double acc = 0;
    const size_t n = est.positions.size();
    for (size_t i = 0; i < n; ++i) {
        const double ax = c * est.positions[i][0] - s * est.positions[i][1] + tf.shift[0];
        const double ay = s * est.positions[i][0] + c * est.positions[i][1] + tf.shift[1];
        const double dx = ax - gt.positions[i][0];
        const double dy = ay - gt.positions[i][1];
        acc += dx * dx + dy * dy;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

double rte(const Trajectory& est, const Trajectory& gt, double window_s) {
    est.validate();
    gt.validate();
    if (est.positions.size() != gt.positions.size() || est.dt != gt.dt)
        throw ContractError("rte: trajectories must share length and dt");
    if (window_s <= 0) throw ContractError("rte: window must be positive");
    const int n = static_cast<int>(est.positions.size());
    const int w = static_cast<int>(std::llround(window_s / est.dt));
    if (w < 1 || w > n - 1)
        throw ContractError("rte: window longer than the trajectory");

    double acc = 0;
    int count = 0;
    for (int i = 0; i + w < n; ++i) {
        const double ex = est.positions[static_cast<size_t>(i + w)][0] -
                          est.positions[static_cast<size_t>(i)][0];
        const double ey = est.positions[static_cast<size_t>(i + w)][1] -
                          est.positions[static_cast<size_t>(i)][1];
        const double gx = gt.positions[static_cast<size_t>(i + w)][0] -
                          gt.positions[static_cast<size_t>(i)][0];
        const double gy = gt.positions[static_cast<size_t>(i + w)][1] -
                          gt.positions[static_cast<size_t>(i)][1];
        const double dx = ex - gx, dy = ey - gy;
        acc += dx * dx + dy * dy;
        ++count;
    }
    return std::sqrt(acc / count);
}

namespace {

// Cyclic Jacobi eigensolver for a symmetric matrix held in a; returns the
// eigenvalues. Deterministic sweep order.
std::vector<double> jacobi_eigenvalues(std::vector<double>& a, int n) {
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += std::abs(a[static_cast<size_t>(p) * n + q]);
        if (off < 1e-14) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[static_cast<size_t>(p) * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double app = a[static_cast<size_t>(p) * n + p];
                const double aqq = a[static_cast<size_t>(q) * n + q];
                const double theta = (aqq - app) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1.0 / std::sqrt(t * t + 1);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[static_cast<size_t>(k) * n + p];
                    const double akq = a[static_cast<size_t>(k) * n + q];
                    a[static_cast<size_t>(k) * n + p] = c * akp - s * akq;
                    a[static_cast<size_t>(k) * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[static_cast<size_t>(p) * n + k];
                    const double aqk = a[static_cast<size_t>(q) * n + k];
                    a[static_cast<size_t>(p) * n + k] = c * apk - s * aqk;
                    a[static_cast<size_t>(q) * n + k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * n + i];
    return ev;
}

}  // namespace

ExplainedVariance pca_explained_variance(const Tensor<double>& features, int k) {
    if (features.rank() != 2) throw ShapeError("pca: expected an M x F matrix");
    const int m = features.dim(0), f = features.dim(1);
    if (m < 2) throw ContractError("pca: need at least two rows");
    if (k < 1 || k > std::min(m, f))
        throw ContractError("pca: k must be in [1, min(M, F)]");

    // center columns
    Tensor<double> x = features;
    for (int j = 0; j < f; ++j) {
        double mu = 0;
        for (int i = 0; i < m; ++i) mu += x.at(i, j);
        mu /= m;
        for (int i = 0; i < m; ++i) x.at(i, j) -= mu;
    }

    double total = 0;
    for (int64_t i = 0; i < x.size(); ++i) total += x[i] * x[i];
    if (total < 1e-18) throw ContractError("pca: degenerate input, all rows identical");

    // eigenvalues of the smaller Gram matrix equal the squared singular values
    const bool use_rows = m <= f;
    const int n = use_rows ? m : f;
    std::vector<double> gram(static_cast<size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static) if (kernels::parallelize(static_cast<int64_t>(n) * n * (use_rows ? f : m)))
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double acc = 0;
            if (use_rows) {
                for (int p = 0; p < f; ++p) acc += x.at(i, p) * x.at(j, p);
            } else {
                for (int p = 0; p < m; ++p) acc += x.at(p, i) * x.at(p, j);
            }
            gram[static_cast<size_t>(i) * n + j] = acc;
            gram[static_cast<size_t>(j) * n + i] = acc;
        }

    std::vector<double> ev = jacobi_eigenvalues(gram, n);
    std::sort(ev.begin(), ev.end(), std::greater<double>());

    ExplainedVariance out;
    out.ratios.reserve(static_cast<size_t>(k));
    out.cumulative.reserve(static_cast<size_t>(k));
    double run = 0;
    for (int i = 0; i < k; ++i) {
        const double r = std::max(0.0, ev[static_cast<size_t>(i)]) / total;
        run += r;
        out.ratios.push_back(r);
        out.cumulative.push_back(run);
    }
    return out;
}

}  // namespace mambaio::metrics
