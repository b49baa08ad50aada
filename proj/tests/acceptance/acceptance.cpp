// Acceptance suite: one pass/fail line per criterion. Exit code is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "mambaio/data.hpp"
#include "mambaio/eval.hpp"
#include "mambaio/fdcheck.hpp"
#include "mambaio/frames.hpp"
#include "mambaio/metrics.hpp"
#include "mambaio/model.hpp"
#include "mambaio/mpc.hpp"
#include "mambaio/pyramid.hpp"
#include "mambaio/ssm.hpp"
#include "mambaio/trainer.hpp"

using namespace mambaio;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor<double> randn(Rng& rng, std::vector<int> shape, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0, scale);
    return t;
}

void randomize_params(ParamStore<double>& ps, uint64_t seed) {
    Rng rng(seed);
    for (auto& [name, p] : ps)
        for (int64_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.uniform(-0.5, 0.5);
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

// ---- 1: exact reconstruction -------------------------------------------

Outcome criterion_reconstruction() {
    const auto t0 = Clock::now();
    Rng rng(101);
    int64_t entries = 0, mismatched = 0;
    double worst_ulp = 0;

    // half plain gaussian windows at mixed scales, half windows cut from
    // generated global-frame IMU sequences
    data::GenParams gp;
    const auto seq = data::generate_trajectory(7, 60.0, gp);
    const auto imu_windows = data::make_windows(seq, 200, 20, frames::Frame::global);

    for (int trial = 0; trial < 1000; ++trial) {
        Tensor<double> x({6, 200});
        if (trial % 2 == 0) {
            const double scale = std::pow(10.0, rng.uniform(-2, 2));
            for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal(0, scale);
        } else {
            x = imu_windows[static_cast<size_t>(rng.integer(imu_windows.size()))].x;
        }
        const auto bands = pyramid::decompose(x);
        for (int64_t i = 0; i < x.size(); ++i) {
            ++entries;
            const double rec = bands.low[i] + bands.high[i];
            if (rec != x[i]) {
                ++mismatched;
                const double ulp =
                    std::abs(x[i]) > 0
                        ? std::abs(rec - x[i]) /
                              (std::abs(x[i]) * std::numeric_limits<double>::epsilon())
                        : 1e300;
                worst_ulp = std::max(worst_ulp, ulp);
            }
        }
    }
    const double elapsed = seconds_since(t0);

    Outcome o;
    char buf[512];
    if (mismatched == 0) {
        std::snprintf(buf, sizeof(buf), "all %lld entries bitwise, %.2f s",
                      static_cast<long long>(entries), elapsed);
        o.pass = elapsed < 5.0;
    } else {
        // Bitwise reconstruction of arbitrary doubles is unattainable: when
        // |low| > 2|x| the sums of representable (low, high) pairs lie on a
        // grid coarser than ulp(x) and can miss x for any band values. The
        // split is exact to one ulp of the larger band, and bitwise whenever
        // x and low share a binade.
        std::snprintf(buf, sizeof(buf),
                      "%lld of %lld entries differ (worst %.2f ulp of x, <= 1 ulp of the "
                      "larger band); bitwise equality is not representable for arbitrary "
                      "doubles, %.2f s",
                      static_cast<long long>(mismatched), static_cast<long long>(entries),
                      worst_ulp, elapsed);
        o.pass = false;
    }
    o.detail = buf;
    return o;
}

// ---- 2: ZOH against the series oracle ----------------------------------

Outcome criterion_zoh() {
    Rng rng(102);
    double worst = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const double a = -rng.uniform(0.01, 4.0);
        const double b = rng.normal();
        const double delta = rng.uniform(1e-4, 0.5);
        const auto d = ssm::zoh_discretize<double>({a}, {b}, delta);

        const double u = delta * a;
        double abar = 0, term = 1;
        for (int n = 0; n < 20; ++n) {
            abar += term;
            term *= u / (n + 1);
        }
        double phi = 0;
        term = 1;
        for (int n = 0; n < 20; ++n) {
            phi += term / (n + 1);
            term *= u / (n + 1);
        }
        const double bbar = delta * phi * b;
        worst = std::max(worst, std::abs(d.a_bar[0] - abar) / std::max(std::abs(abar), 1e-12));
        worst = std::max(worst, std::abs(d.b_bar[0] - bbar) / std::max(std::abs(bbar), 1e-12));
    }
    bool limit_ok = true;
    for (double b : {1.0, -2.5, 0.125}) {
        const auto d = ssm::zoh_discretize<double>({0.0}, {b}, 0.25);
        if (d.b_bar[0] != 0.25 * b || d.a_bar[0] != 1.0) limit_ok = false;
    }
    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "worst relative error %.3g over 10^4 draws; A=0 limit %s",
                  worst, limit_ok ? "exact" : "WRONG");
    o.detail = buf;
    o.pass = worst < 1e-10 && limit_ok;
    return o;
}

// ---- 3: recurrence-kernel duality ---------------------------------------

Outcome criterion_duality() {
    double worst = 0;
    for (int s : {8, 32, 64}) {
        for (int seed = 0; seed < 100; ++seed) {
            Rng rng(5000 + static_cast<uint64_t>(seed));
            const int h = 4, d_ch = 3;
            std::vector<double> a(h), b(h), c(h);
            for (int i = 0; i < h; ++i) {
                a[static_cast<size_t>(i)] = -rng.uniform(0.05, 3.0);
                b[static_cast<size_t>(i)] = rng.normal();
                c[static_cast<size_t>(i)] = rng.normal();
            }
            const auto dis = ssm::zoh_discretize(a, b, rng.uniform(0.01, 0.5));
            const auto x = randn(rng, {s, d_ch});
            const auto via_scan = ssm::scan_time_invariant(dis.a_bar, dis.b_bar, c, x);
            const auto k = ssm::ssm_kernel(dis.a_bar, dis.b_bar, c, s);
            const auto via_conv = ssm::causal_conv(k, x);
            for (int64_t i = 0; i < via_scan.size(); ++i)
                worst = std::max(worst, std::abs(via_scan[i] - via_conv[i]));
        }
    }
    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "max |scan - conv| = %.3g over S in {8,32,64} x 100 seeds", worst);
    o.detail = buf;
    o.pass = worst < 1e-6;
    return o;
}

// ---- 4: gradient integrity ----------------------------------------------

double fd_case(ParamStore<double>& ps,
               const std::function<Graph<double>::NodeId(Graph<double>&)>& f) {
    ps.zero_grad();
    {
        Graph<double> g;
        auto l = f(g);
        g.backward(l);
        g.accumulate_param_grads(ps);
    }
    return finite_diff_check(ps, [&] {
        Graph<double> g;
        return g.scalar(f(g));
    });
}

Outcome criterion_gradients() {
    const auto t0 = Clock::now();
    using G = Graph<double>;
    double worst_op = 0, worst_smooth = 0;
    std::string worst_name = "-";
    auto track = [&](const char* name, double err, bool smooth) {
        std::printf("    fd %-20s %.3g\n", name, err);
        std::fflush(stdout);
        if (smooth) {
            worst_smooth = std::max(worst_smooth, err);
        } else if (err > worst_op) {
            worst_op = err;
            worst_name = name;
        }
    };

    Rng rng(104);
    {  // smooth scalar ops
        ParamStore<double> ps;
        ps.create("x", randn(rng, {3, 8}, 0.8));
        for (auto [name, op] : std::initializer_list<std::pair<const char*, int>>{
                 {"sigmoid", 0}, {"softplus", 1}, {"exp", 2}, {"silu", 3}}) {
            const int which = op;
            track(name, fd_case(ps, [&ps, which](G& g) {
                      auto x = g.param(ps, "x");
                      G::NodeId y{};
                      switch (which) {
                          case 0: y = g.sigmoid(x); break;
                          case 1: y = g.softplus(x); break;
                          case 2: y = g.exp(x); break;
                          default: y = g.silu(x); break;
                      }
                      return g.sum_all(g.mul(y, y));
                  }),
                  true);
        }
    }
    {  // arithmetic and structural ops
        ParamStore<double> ps;
        ps.create("a", randn(rng, {4, 6}));
        ps.create("b", randn(rng, {4, 6}));
        track("arith", fd_case(ps, [&ps](G& g) {
                  auto a = g.param(ps, "a");
                  auto b = g.param(ps, "b");
                  auto y = g.add(g.mul(a, b), g.scale(g.sub(a, g.neg(b)), 0.7));
                  auto cat = g.concat_channels({g.slice_rows(y, 0, 2), g.slice_rows(y, 2, 4)});
                  auto p = g.global_avg_pool_time(g.transpose(cat));
                  return g.sum_all(g.mul(p, p));
              }),
              false);
    }
    {  // linear family
        ParamStore<double> ps;
        ps.create("x", randn(rng, {3, 12}));
        ps.create("w", randn(rng, {5, 3}));
        ps.create("b", randn(rng, {5}));
        ps.create("k", randn(rng, {5, 3}));
        for (auto mode : {PaddingMode::zero, PaddingMode::replicate})
            track("conv", fd_case(ps, [&ps, mode](G& g) {
                      auto h = g.pointwise_conv1d(g.param(ps, "x"), g.param(ps, "w"),
                                                  g.param(ps, "b"), 2);
                      auto y = g.depthwise_conv1d(h, g.param(ps, "k"), 1, mode);
                      return g.sum_all(g.mul(y, y));
                  }),
                  false);
    }
    {  // normalization, attention pieces
        ParamStore<double> ps;
        ps.create("x", randn(rng, {4, 6}));
        ps.create("gamma", randn(rng, {4}, 0.3));
        ps.create("beta", randn(rng, {4}, 0.3));
        const Tensor<double> wv = randn(rng, {4, 6});
        track("norm-softmax-matmul", fd_case(ps, [&ps, wv](G& g) {
                  auto x = g.param(ps, "x");
                  auto n = g.layer_norm(x, g.param(ps, "gamma"), g.param(ps, "beta"));
                  auto sm = g.softmax(g.matmul(g.transpose(n), n), 1);
                  auto y = g.mul(g.matmul(x, sm), g.input(wv));
                  return g.sum_all(g.mul(y, y));
              }),
              false);
    }
    {  // pyramid node
        ParamStore<double> ps;
        ps.create("x", randn(rng, {6, 16}));
        track("decompose", fd_case(ps, [&ps](G& g) {
                  auto x = g.param(ps, "x");
                  auto low = g.decompose_low(x, 5, 2);
                  auto high = g.sub(x, low);
                  return g.sum_all(g.add(g.mul(low, low), g.mul(high, high)));
              }),
              false);
    }
    {  // mpc block
        ParamStore<double> ps;
        Rng r2(105);
        mpc::init_block(ps, "blk", 6, 2, r2);
        randomize_params(ps, 106);
        ps.create("x", randn(rng, {6, 16}));
        track("mpc", fd_case(ps, [&ps](G& g) {
                  auto y = mpc::forward(g, ps, "blk", g.param(ps, "x"));
                  return g.sum_all(g.mul(y, y));
              }),
              false);
    }
    {  // selective scan + mamba block
        ParamStore<double> ps;
        Rng r2(107);
        ssm::init_mamba_block(ps, "blk", 8, 4, 3, r2);
        randomize_params(ps, 108);
        ps.create("x", randn(rng, {8, 16}));
        track("mamba", fd_case(ps, [&ps](G& g) {
                  auto y = ssm::mamba_forward(g, ps, "blk", g.param(ps, "x"));
                  return g.sum_all(g.mul(y, y));
              }),
              false);
    }
    {  // attention block
        ParamStore<double> ps;
        Rng r2(109);
        ssm::init_attention(ps, "attn", 8, r2);
        randomize_params(ps, 110);
        ps.create("x", randn(rng, {8, 10}));
        track("attention", fd_case(ps, [&ps](G& g) {
                  auto y = ssm::attention_forward(g, ps, "attn", g.param(ps, "x"), 4);
                  return g.sum_all(g.mul(y, y));
              }),
              false);
    }
    {  // full tiny-config model with mse loss
        model::ModelConfig c;
        c.window_len = 16;
        c.stage_channels = {8, 8, 8, 8};
        c.blocks_per_stage = 2;
        c.ssm.state_size = 4;
        c.attention_heads = 4;
        c.se_ratio = 4;
        auto m = model::Model<double>::build(c, 111);
        Rng redraw(112);
        for (auto& [name, p] : m.params)
            for (int64_t i = 0; i < p.value.size(); ++i) p.value[i] = redraw.uniform(-0.5, 0.5);
        const auto w = randn(rng, {6, 16});
        // a small residual keeps the quadratic loss in its well-conditioned
        // regime; the gradient still exercises the entire backward chain
        const auto out0 = m.predict(w);
        const std::vector<double> label = {out0[0] + 1e-3, out0[1] - 1e-3};
        auto build = [&](Graph<double>& g) { return model::loss(g, m.forward(g, w), label); };
        m.params.zero_grad();
        {
            Graph<double> g;
            auto l = build(g);
            g.backward(l);
            g.accumulate_param_grads(m.params);
        }
        const double err = finite_diff_check(m.params, [&] {
            Graph<double> g;
            return g.scalar(build(g));
        });
        track("tiny-model", err, false);
    }

    const double elapsed = seconds_since(t0);
    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "worst op %.3g (%s), worst smooth scalar %.3g, %.1f s", worst_op,
                  worst_name.c_str(), worst_smooth, elapsed);
    o.detail = buf;
    o.pass = worst_op < 1e-4 && worst_smooth < 1e-6 && elapsed < 120.0;
    return o;
}

// ---- 5: frame coherence ---------------------------------------------------

Outcome criterion_frames() {
    Rng rng(113);
    double worst_rt = 0;
    for (int i = 0; i < 1000; ++i) {
        frames::Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        const double n = q.norm();
        q = {q.w / n, q.x / n, q.y / n, q.z / n};
        const auto r = frames::quat_to_rotation(q);
        frames::ImuSampleBody s{0, {rng.normal(), rng.normal(), rng.normal()},
                                {rng.normal(), rng.normal(), rng.normal(9.81, 1)}};
        const auto back = frames::global_to_body(frames::body_to_global(s, r), r.transpose());
        worst_rt = std::max({worst_rt, std::abs(back.omega.x - s.omega.x),
                             std::abs(back.omega.y - s.omega.y),
                             std::abs(back.omega.z - s.omega.z),
                             std::abs(back.accel.x - s.accel.x),
                             std::abs(back.accel.y - s.accel.y),
                             std::abs(back.accel.z - s.accel.z)});
    }

    data::GenParams gp;
    data::GenTruth truth;
    const auto seq = data::generate_trajectory(114, 10.0, gp, 200.0, &truth);
    double worst_gen = 0;
    for (size_t i = 0; i < seq.samples.size(); ++i) {
        const auto& s = seq.samples[i];
        const auto r = frames::quat_to_rotation(s.quat);
        const auto g = frames::body_to_global({s.t, s.gyro, s.accel}, r);
        const auto want = truth.accel_true_global[i] + frames::Vec3{0, 0, 9.81};
        worst_gen = std::max({worst_gen, std::abs(g.accel.x - want.x),
                              std::abs(g.accel.y - want.y), std::abs(g.accel.z - want.z)});
    }
    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "round-trip worst %.3g (tol 1e-12); generator consistency worst %.3g (tol 1e-9)",
                  worst_rt, worst_gen);
    o.detail = buf;
    o.pass = worst_rt < 1e-12 && worst_gen < 1e-9;
    return o;
}

// ---- 6: metric oracles ----------------------------------------------------

Outcome criterion_metrics() {
    Rng rng(115);
    metrics::Trajectory gt;
    gt.dt = 0.1;
    {
        double x = 0, y = 0;
        for (int i = 0; i < 100; ++i) {
            x += rng.normal(0.02, 0.05);
            y += rng.normal(0, 0.05);
            gt.positions.push_back({x, y});
        }
    }
    metrics::Trajectory est = gt;
    for (auto& p : est.positions) {
        p[0] += rng.normal(0, 0.02);
        p[1] += rng.normal(0, 0.02);
    }
    const double base = metrics::ate(est, gt);
    double worst_inv = 0;
    for (int t = 0; t < 20; ++t) {
        const double ang = rng.uniform(-3.14, 3.14), tx = rng.normal(0, 5),
                     ty = rng.normal(0, 5);
        metrics::Trajectory moved;
        moved.dt = est.dt;
        const double c = std::cos(ang), s = std::sin(ang);
        for (const auto& p : est.positions)
            moved.positions.push_back({c * p[0] - s * p[1] + tx, s * p[0] + c * p[1] + ty});
        worst_inv = std::max(worst_inv, std::abs(metrics::ate(moved, gt) - base));
    }

    // 3-point closed form against a grid-search oracle
    metrics::Trajectory g3{1.0, {{0, 0}, {1, 0}, {2, 0}}};
    metrics::Trajectory e3{1.0, {{0, 0}, {1, 0.3}, {2, 0}}};
    const double closed = metrics::ate(e3, g3);
    double grid_best = 1e300;
    {
        auto rmse_at = [&](double angle) {
            const double c = std::cos(angle), s = std::sin(angle);
            double emx = 0, emy = 0, gmx = 0, gmy = 0;
            for (size_t i = 0; i < 3; ++i) {
                emx += c * e3.positions[i][0] - s * e3.positions[i][1];
                emy += s * e3.positions[i][0] + c * e3.positions[i][1];
                gmx += g3.positions[i][0];
                gmy += g3.positions[i][1];
            }
            emx /= 3; emy /= 3; gmx /= 3; gmy /= 3;
            double acc = 0;
            for (size_t i = 0; i < 3; ++i) {
                const double ax = c * e3.positions[i][0] - s * e3.positions[i][1] - emx + gmx;
                const double ay = s * e3.positions[i][0] + c * e3.positions[i][1] - emy + gmy;
                const double dx = ax - g3.positions[i][0], dy = ay - g3.positions[i][1];
                acc += dx * dx + dy * dy;
            }
            return std::sqrt(acc / 3);
        };
        double best_a = 0;
        for (int k = 0; k < 7200; ++k) {
            const double a = -3.14159265358979 + 2 * 3.14159265358979 * k / 7200.0;
            const double v = rmse_at(a);
            if (v < grid_best) {
                grid_best = v;
                best_a = a;
            }
        }
        double lo = best_a - 1e-3, hi = best_a + 1e-3;
        for (int it = 0; it < 100; ++it) {
            const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
            if (rmse_at(m1) < rmse_at(m2)) hi = m2; else lo = m1;
        }
        grid_best = rmse_at((lo + hi) / 2);
    }

    // linear drift RTE
    metrics::Trajectory d_gt;
    d_gt.dt = 0.1;
    for (int i = 0; i < 1200; ++i) d_gt.positions.push_back({0.1 * i, 0});
    metrics::Trajectory d_est = d_gt;
    const double drift = 0.04;
    for (size_t i = 0; i < d_est.positions.size(); ++i)
        d_est.positions[i][1] += drift * (static_cast<double>(i) * d_est.dt);
    const double rte_err = std::abs(metrics::rte(d_est, d_gt, 60.0) - drift * 60.0);

    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "rigid invariance %.3g (tol 1e-9); grid vs closed %.3g (tol 1e-6); "
                  "drift RTE error %.3g (tol 1e-9)",
                  worst_inv, std::abs(closed - grid_best), rte_err);
    o.detail = buf;
    o.pass = worst_inv < 1e-9 && std::abs(closed - grid_best) < 1e-6 && rte_err < 1e-9;
    return o;
}

// ---- 7 & 8: synthetic end-to-end and frame comparison ---------------------

struct TrainedRun {
    model::Model<float> best;
    double epoch1_val = 0, final_val = 0;
    double test_ate = 0;
    double const_ate = 0;
    int epochs_run = 0;
};

struct SyntheticData {
    std::vector<data::ImuSequence> train, test;
};

SyntheticData make_dataset() {
    SyntheticData d;
    data::GenParams p;
    p.noise_gyro_std = 0.003;
    p.noise_accel_std = 0.03;
    for (int i = 0; i < 40; ++i)
        d.train.push_back(data::generate_trajectory(1000 + static_cast<uint64_t>(i), 60.0, p));
    for (int i = 0; i < 10; ++i)
        d.test.push_back(data::generate_trajectory(2000 + static_cast<uint64_t>(i), 60.0, p));
    return d;
}

TrainedRun train_and_eval(const SyntheticData& data_set, frames::Frame frame, int train_stride,
                          int eval_stride) {
    model::ModelConfig mc;
    mc.stage_channels = {16, 32, 64, 128};
    mc.window_len = 200;
    auto m = model::Model<float>::build(mc, 42);

    std::vector<data::TrainingWindow> train_w, val_w;
    for (size_t i = 0; i < data_set.train.size(); ++i) {
        auto w = data::make_windows(data_set.train[i], mc.window_len, train_stride, frame);
        auto& dst = (i >= data_set.train.size() - 4) ? val_w : train_w;
        for (auto& x : w) dst.push_back(std::move(x));
    }

    trainer::TrainConfig tc;
    tc.batch_size = 16;
    tc.seed = 42;
    auto res = trainer::fit(m, train_w, val_w, tc, true);

    TrainedRun out;
    out.best = res.best_model;
    out.epoch1_val = res.history.front().val_loss;
    out.final_val = res.history.back().val_loss;
    out.epochs_run = static_cast<int>(res.history.size());

    // constant predictor: mean training-set global velocity
    double mx = 0, my = 0;
    int64_t n = 0;
    for (size_t i = 0; i < data_set.train.size(); ++i) {
        for (const auto& w :
             data::make_windows(data_set.train[i], mc.window_len, train_stride,
                                frames::Frame::global)) {
            mx += w.label[0];
            my += w.label[1];
            ++n;
        }
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double ate_sum = 0, const_sum = 0;
    for (const auto& seq : data_set.test) {
        const auto r = eval::evaluate_sequence(
            seq, mc.window_len, eval_stride, frame,
            [&](const data::TrainingWindow& w) {
                auto pred = out.best.predict(w.x.cast<float>());
                return std::array<double, 2>{static_cast<double>(pred[0]),
                                             static_cast<double>(pred[1])};
            });
        ate_sum += r.ate_m;
        const auto rc = eval::evaluate_sequence(
            seq, mc.window_len, eval_stride, frames::Frame::global,
            [&](const data::TrainingWindow&) { return std::array<double, 2>{mx, my}; });
        const_sum += rc.ate_m;
    }
    out.test_ate = ate_sum / static_cast<double>(data_set.test.size());
    out.const_ate = const_sum / static_cast<double>(data_set.test.size());
    return out;
}

Outcome criterion_end_to_end(const TrainedRun& run, double elapsed) {
    Outcome o;
    char buf[512];
    const bool halved = run.final_val < 0.5 * run.epoch1_val;
    const bool beats = run.test_ate < 0.7 * run.const_ate;
    std::snprintf(buf, sizeof(buf),
                  "val MSE %.4g -> %.4g over %d epochs (need < 0.5x); test ATE %.3f m vs "
                  "constant-velocity %.3f m (need < 0.7x); %.1f min (target < 30)",
                  run.epoch1_val, run.final_val, run.epochs_run, run.test_ate, run.const_ate,
                  elapsed / 60.0);
    o.detail = buf;
    o.pass = halved && beats;
    return o;
}

Outcome criterion_frame_comparison(const TrainedRun& global_run, const TrainedRun& body_run) {
    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "test ATE global %.3f m <= body %.3f m",
                  global_run.test_ate, body_run.test_ate);
    o.detail = buf;
    o.pass = global_run.test_ate <= body_run.test_ate;
    return o;
}

// ---- 9: PCA on model latents ----------------------------------------------

Outcome criterion_pca(const TrainedRun& run, const SyntheticData& data_set) {
    std::vector<std::vector<float>> rows;
    for (const auto& seq : data_set.test) {
        auto windows = data::make_windows(seq, run.best.config.window_len, 100,
                                          frames::Frame::global);
        const size_t base = rows.size();
        rows.resize(base + windows.size());
        const int64_t n = static_cast<int64_t>(windows.size());
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i)
            rows[base + static_cast<size_t>(i)] =
                run.best.features(windows[static_cast<size_t>(i)].x.cast<float>());
    }
    Tensor<double> feats({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            feats.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];

    const int full_k = std::min(feats.dim(0), feats.dim(1));
    const auto full = metrics::pca_explained_variance(feats, full_k);
    const auto top = metrics::pca_explained_variance(feats, 50);

    bool nondecreasing = true;
    for (size_t i = 1; i < top.cumulative.size(); ++i)
        if (top.cumulative[i] < top.cumulative[i - 1]) nondecreasing = false;
    const bool truncated = top.ratios.size() == 50 && top.cumulative.size() == 50;
    const bool bounded = full.cumulative.back() <= 1.0 + 1e-9;
    double ratio_sum = 0;
    for (double r : full.ratios) ratio_sum += r;

    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%d x %d latents; k=50 coverage %.4f; full-rank ratio sum %.6f (<= 1+1e-9); "
                  "cumulative nondecreasing: %s",
                  feats.dim(0), feats.dim(1), top.cumulative.back(), ratio_sum,
                  nondecreasing ? "yes" : "NO");
    o.detail = buf;
    o.pass = nondecreasing && truncated && bounded && ratio_sum <= 1.0 + 1e-9;
    return o;
}

// ---- 10: determinism and checkpoint portability ---------------------------

Outcome criterion_determinism() {
    auto run_once = [] {
        model::ModelConfig mc;
        mc.window_len = 200;
        mc.stage_channels = {8, 16};
        mc.blocks_per_stage = 1;
        mc.ssm.state_size = 4;
        mc.attention_heads = 2;
        auto m = model::Model<float>::build(mc, 77);
        data::GenParams p;
        p.noise_accel_std = 0.02;
        std::vector<data::TrainingWindow> train_w, val_w;
        for (int i = 0; i < 3; ++i) {
            auto w = data::make_windows(
                data::generate_trajectory(300 + static_cast<uint64_t>(i), 12.0, p), 200, 200,
                frames::Frame::global);
            auto& dst = (i == 2) ? val_w : train_w;
            for (auto& x : w) dst.push_back(std::move(x));
        }
        trainer::TrainConfig tc;
        tc.max_epochs = 2;
        tc.batch_size = 8;
        tc.seed = 78;
        auto res = trainer::fit(m, train_w, val_w, tc);
        return res;
    };
    const auto a = run_once();
    const auto b = run_once();

    bool identical = true;
    for (const auto& [name, p] : a.best_model.params) {
        const auto& q = b.best_model.params.at(name).value;
        for (int64_t i = 0; i < p.value.size(); ++i)
            if (p.value[i] != q[i]) identical = false;
    }

    // save -> load -> save: byte-identical files, bit-identical forward
    const std::string dir = "/tmp/mio_acceptance";
    std::filesystem::create_directories(dir);
    const std::string p1 = dir + "/a.ckpt", p2 = dir + "/b.ckpt";
    model::save_checkpoint(p1, a.best_model, a.best_meta);
    model::TrainMeta meta;
    auto loaded = model::load_checkpoint(p1, &meta);
    model::save_checkpoint(p2, loaded, meta);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    const bool files_match = !b1.empty() && b1 == b2;

    Rng rng(79);
    Tensor<double> w({6, 200});
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
    const bool forward_match =
        a.best_model.predict(w.cast<float>()) == loaded.predict(w.cast<float>());

    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "same-seed training bit-identical: %s; checkpoint round trip byte-identical: "
                  "%s; forward after load bit-identical: %s",
                  identical ? "yes" : "NO", files_match ? "yes" : "NO",
                  forward_match ? "yes" : "NO");
    o.detail = buf;
    o.pass = identical && files_match && forward_match;
    return o;
}

// ---- 11: linear-time scan --------------------------------------------------

Outcome criterion_linear_scan() {
    const int d_ch = 8, h = 16;
    Rng rng(80);
    auto make_inputs = [&](int s) {
        struct In {
            Tensor<float> x, delta, b, c, a;
        } in{Tensor<float>({d_ch, s}), Tensor<float>({d_ch, s}), Tensor<float>({h, s}),
             Tensor<float>({h, s}), Tensor<float>({d_ch, h})};
        for (int64_t i = 0; i < in.x.size(); ++i) in.x[i] = static_cast<float>(rng.normal());
        for (int64_t i = 0; i < in.delta.size(); ++i)
            in.delta[i] = 0.01f + std::abs(static_cast<float>(rng.normal())) * 0.1f;
        for (int64_t i = 0; i < in.b.size(); ++i) in.b[i] = static_cast<float>(rng.normal());
        for (int64_t i = 0; i < in.c.size(); ++i) in.c[i] = static_cast<float>(rng.normal());
        for (int64_t i = 0; i < in.a.size(); ++i)
            in.a[i] = -0.05f - std::abs(static_cast<float>(rng.normal()));
        return in;
    };
    auto median_time = [&](int s) {
        auto in = make_inputs(s);
        Tensor<float> y({d_ch, s});
        Tensor<float> hs({s, d_ch, h});
        Tensor<float> disc({s, d_ch, 2 * h});
        std::vector<double> times;
        for (int r = 0; r < 100; ++r) {
            const auto t0 = Clock::now();
            kernels::selective_scan(y, hs, disc, in.x, in.delta, in.b, in.c, in.a);
            times.push_back(seconds_since(t0));
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };
    const double t512 = median_time(512);
    const double t1024 = median_time(1024);
    const double ratio = t1024 / t512;
    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "median over 100 runs: S=512 %.3f ms, S=1024 %.3f ms, ratio %.2f (<= 2.5)",
                  t512 * 1e3, t1024 * 1e3, ratio);
    o.detail = buf;
    o.pass = ratio <= 2.5;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto wanted = [&](int n) { return only.empty() || only.count(n); };

    struct Row {
        int n;
        const char* name;
        Outcome o;
    };
    std::vector<Row> rows;
    auto report = [&](int n, const char* name, Outcome o) {
        std::printf("[%s] %2d %-24s %s\n", o.pass ? "PASS" : "FAIL", n, name,
                    o.detail.c_str());
        std::fflush(stdout);
        rows.push_back({n, name, std::move(o)});
    };

    if (wanted(1)) report(1, "exact-reconstruction", criterion_reconstruction());
    if (wanted(2)) report(2, "zoh-correctness", criterion_zoh());
    if (wanted(3)) report(3, "recurrence-kernel-duality", criterion_duality());
    if (wanted(4)) report(4, "gradient-integrity", criterion_gradients());
    if (wanted(5)) report(5, "frame-coherence", criterion_frames());
    if (wanted(6)) report(6, "metric-oracles", criterion_metrics());

    const bool need_training = wanted(7) || wanted(8) || wanted(9);
    if (need_training) {
        const auto data_set = make_dataset();
        const auto t0 = Clock::now();
        std::printf("-- training (global frame, 36+4 sequences, reduced config) --\n");
        std::fflush(stdout);
        const auto global_run = train_and_eval(data_set, frames::Frame::global, 400, 50);
        const double train_time = seconds_since(t0);
        if (wanted(7))
            report(7, "synthetic-end-to-end", criterion_end_to_end(global_run, train_time));
        if (wanted(8)) {
            std::printf("-- training (body frame, same data and config) --\n");
            std::fflush(stdout);
            const auto body_run = train_and_eval(data_set, frames::Frame::body, 400, 50);
            report(8, "frame-comparison", criterion_frame_comparison(global_run, body_run));
        }
        if (wanted(9)) report(9, "pca-model-latents", criterion_pca(global_run, data_set));
    }
    if (wanted(10)) report(10, "determinism-checkpoints", criterion_determinism());
    if (wanted(11)) report(11, "linear-time-scan", criterion_linear_scan());

    int failed = 0;
    for (const auto& r : rows)
        if (!r.o.pass) ++failed;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(rows.size()) - failed,
                rows.size());
    return failed;
}
