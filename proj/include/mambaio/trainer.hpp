#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mambaio/data.hpp"
#include "mambaio/model.hpp"

namespace mambaio::trainer {

struct TrainConfig {
    double lr0 = 1e-4;
    double lr_min = 1e-6;
    int max_epochs = 40;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double plateau_factor = 0.1;
    int plateau_patience = 10;
    int batch_size = 128;
    double clip_norm = 10.0;
    uint64_t seed = 0;

    void validate() const {
        if (!(lr_min > 0 && lr_min < lr0)) throw ConfigError("train: need 0 < lr_min < lr0");
        if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (!(plateau_factor > 0 && plateau_factor < 1))
            throw ConfigError("train: plateau factor must be in (0,1)");
        if (plateau_patience < 1) throw ConfigError("train: patience must be >= 1");
    }
};

// Reduce-on-plateau learning rate. A reduction that reaches lr_min stops
// training (the rate has "decayed to" the floor).
class PlateauSchedule {
public:
    PlateauSchedule(double lr0, double lr_min, double factor, int patience)
        : lr_(lr0), lr_min_(lr_min), factor_(factor), patience_(patience) {}

    void observe(double val_loss) {
        if (val_loss < best_) {
            best_ = val_loss;
            bad_ = 0;
            return;
        }
        if (++bad_ >= patience_) {
            bad_ = 0;
            lr_ *= factor_;
            ++reductions_;
            if (lr_ <= lr_min_ * (1 + 1e-9)) stopped_ = true;
        }
    }

    double lr() const { return lr_; }
    bool stopped() const { return stopped_; }
    int reductions() const { return reductions_; }

private:
    double lr_, lr_min_, factor_;
    int patience_;
    int bad_ = 0;
    int reductions_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
    bool stopped_ = false;
};

template <typename T>
struct AdamState {
    std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments;  // first, second
    int64_t step = 0;

    static AdamState init(const ParamStore<T>& params) {
        AdamState st;
        for (const auto& [name, p] : params)
            st.moments.emplace(name, std::make_pair(Tensor<T>(p.value.shape()),
                                                    Tensor<T>(p.value.shape())));
        return st;
    }
};

// One Adam update from the gradients currently in the store. Uses the
// epsilon-hat form: p -= lr * m_hat / (sqrt(v_hat) + eps * sqrt(1 - b2^t)).
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& st, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8) {
    if (lr <= 0) throw ContractError("adam_step: lr must be positive");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
    const double eps_hat = eps * std::sqrt(bc2);
    for (auto& [name, p] : params) {
        auto& [m, v] = st.moments.at(name);
        for (int64_t i = 0; i < p.value.size(); ++i) {
            const double g = static_cast<double>(p.grad[i]);
            if (!std::isfinite(g))
                throw NumericError("adam_step: non-finite gradient in " + name);
            const double mi = beta1 * static_cast<double>(m[i]) + (1 - beta1) * g;
            const double vi = beta2 * static_cast<double>(v[i]) + (1 - beta2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps_hat);
            p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
        }
    }
}

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double lr = 0;
    int clipped_batches = 0;
};

template <typename T>
struct FitResult {
    model::Model<T> best_model;
    model::TrainMeta best_meta;
    std::vector<EpochStats> history;
    bool diverged = false;
};

namespace detail {

inline int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Mean loss over windows, forward only. Window losses are reduced in index
// order regardless of thread assignment.
template <typename T>
double mean_loss(model::Model<T>& m, const std::vector<data::TrainingWindow>& windows) {
    std::vector<double> losses(windows.size(), 0.0);
    const int64_t n = static_cast<int64_t>(windows.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        Graph<T> g;
        auto out = m.forward(g, windows[static_cast<size_t>(i)].x.template cast<T>());
        std::vector<T> label = {static_cast<T>(windows[static_cast<size_t>(i)].label[0]),
                                static_cast<T>(windows[static_cast<size_t>(i)].label[1])};
        if (m.config.output_dim == 3) label.push_back(T(0));
        losses[static_cast<size_t>(i)] = static_cast<double>(g.scalar(model::loss(g, out, label)));
    }
    double acc = 0;
    for (double l : losses) acc += l;
    return acc / static_cast<double>(windows.size());
}

}  // namespace detail

// Full training loop: seeded per-epoch shuffling, mini-batch Adam with
// gradient clipping, plateau schedule, best-validation snapshot. Gradients
// are merged window-by-window in batch order, so the result is bit-identical
// across runs and thread counts.
template <typename T>
FitResult<T> fit(model::Model<T>& m, const std::vector<data::TrainingWindow>& train,
                 const std::vector<data::TrainingWindow>& val, const TrainConfig& cfg,
                 bool verbose = false) {
    cfg.validate();
    if (train.empty() || val.empty()) throw ContractError("fit: empty train or val split");

    // per-channel mean and standard deviation of the training inputs,
    // stored with the model so inference is self-contained
    {
        const size_t ch = static_cast<size_t>(m.config.in_channels);
        std::vector<double> acc(ch, 0.0), acc2(ch, 0.0);
        int64_t count = 0;
        for (const auto& w : train) {
            for (int c = 0; c < w.x.dim(0); ++c)
                for (int t = 0; t < w.x.dim(1); ++t) {
                    acc[static_cast<size_t>(c)] += w.x.at(c, t);
                    acc2[static_cast<size_t>(c)] += w.x.at(c, t) * w.x.at(c, t);
                }
            count += w.x.dim(1);
        }
        for (int c = 0; c < m.config.in_channels; ++c) {
            const double mu = acc[static_cast<size_t>(c)] / static_cast<double>(count);
            const double var = acc2[static_cast<size_t>(c)] / static_cast<double>(count) - mu * mu;
            m.input_mean[c] = static_cast<T>(mu);
            m.input_std[c] = static_cast<T>(std::sqrt(std::max(var, 1e-12)));
        }
    }

    auto adam = AdamState<T>::init(m.params);
    PlateauSchedule sched(cfg.lr0, cfg.lr_min, cfg.plateau_factor, cfg.plateau_patience);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    FitResult<T> result;
    result.best_meta.val_loss = std::numeric_limits<double>::infinity();

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int slots = detail::worker_count();
    std::vector<double> window_losses(train.size(), 0.0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr = sched.lr();
        shuffle_rng.shuffle(order);
        int clipped = 0;

        for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(cfg.batch_size)) {
            const size_t bsz = std::min(static_cast<size_t>(cfg.batch_size), order.size() - b0);
            m.params.zero_grad();

            for (size_t g0 = 0; g0 < bsz; g0 += static_cast<size_t>(slots)) {
                const int live = static_cast<int>(std::min(static_cast<size_t>(slots), bsz - g0));
                std::vector<Graph<T>> graphs(static_cast<size_t>(live));
#pragma omp parallel for schedule(static)
                for (int gi = 0; gi < live; ++gi) {
                    const auto& w = train[order[b0 + g0 + static_cast<size_t>(gi)]];
                    auto& g = graphs[static_cast<size_t>(gi)];
                    auto out = m.forward(g, w.x.template cast<T>());
                    std::vector<T> label = {static_cast<T>(w.label[0]),
                                            static_cast<T>(w.label[1])};
                    if (m.config.output_dim == 3) label.push_back(T(0));
                    auto l = model::loss(g, out, label);
                    g.backward(l);
                    window_losses[b0 + g0 + static_cast<size_t>(gi)] =
                        static_cast<double>(g.scalar(l));
                }
                // merge in window order: thread-count invariant
                for (int gi = 0; gi < live; ++gi)
                    graphs[static_cast<size_t>(gi)].accumulate_param_grads(
                        m.params, T(1) / static_cast<T>(bsz));
            }

            // global-norm gradient clip
            double norm2 = 0;
            for (const auto& [name, p] : m.params)
                for (int64_t i = 0; i < p.grad.size(); ++i)
                    norm2 += static_cast<double>(p.grad[i]) * static_cast<double>(p.grad[i]);
            const double norm = std::sqrt(norm2);
            if (norm > cfg.clip_norm) {
                const T scale = static_cast<T>(cfg.clip_norm / norm);
                for (auto& [name, p] : m.params)
                    for (int64_t i = 0; i < p.grad.size(); ++i) p.grad[i] *= scale;
                ++clipped;
            }

            adam_step(m.params, adam, lr, cfg.beta1, cfg.beta2, cfg.eps);
        }

        double train_loss = 0;
        for (double l : window_losses) train_loss += l;
        train_loss /= static_cast<double>(train.size());

        const double val_loss = detail::mean_loss(m, val);
        result.history.push_back({epoch, train_loss, val_loss, lr, clipped});
        if (verbose)
            std::fprintf(stderr, "epoch %3d  train %.6g  val %.6g  lr %.3g%s\n", epoch,
                         train_loss, val_loss, lr, clipped ? "  [clipped]" : "");

        if (!std::isfinite(val_loss)) {
            result.diverged = true;
            break;
        }
        if (val_loss < result.best_meta.val_loss) {
            result.best_model = m;
            result.best_meta = {epoch, lr, val_loss};
        }
        sched.observe(val_loss);
        if (sched.stopped()) break;
    }

    if (!std::isfinite(result.best_meta.val_loss))
        throw NumericError("fit: no finite validation loss was ever reached");
    return result;
}

}  // namespace mambaio::trainer
