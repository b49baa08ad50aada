#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mambaio/graph.hpp"
#include "mambaio/mpc.hpp"
#include "mambaio/ssm.hpp"

namespace mambaio::model {

struct PyramidConfig {
    int kernel = 5;
    int stride = 2;
    int depth = 1;
};

struct SsmConfig {
    int state_size = 16;
    int conv_kernel = 3;
};

struct ModelConfig {
    int in_channels = 6;
    int window_len = 200;
    std::vector<int> stage_channels = {64, 128, 256, 512};
    int blocks_per_stage = 2;
    PyramidConfig pyramid;
    SsmConfig ssm;
    int attention_heads = 4;
    int se_ratio = 4;
    int output_dim = 2;
    std::string precision = "f32";

    int stages() const { return static_cast<int>(stage_channels.size()); }

    void validate() const {
        if (in_channels < 1) throw ConfigError("config: in_channels must be >= 1");
        if (stage_channels.empty()) throw ConfigError("config: stage_channels is empty");
        for (size_t i = 1; i < stage_channels.size(); ++i)
            if (stage_channels[i] < stage_channels[i - 1])
                throw ConfigError("config: stage_channels must be ascending");
        if (window_len % 2 != 0) throw ConfigError("config: window_len must be even");
        if (window_len % (1 << (stages() - 1)) != 0)
            throw ConfigError("config: window_len must divide by 2^(stages-1)");
        if (pyramid.kernel % 2 == 0 || pyramid.kernel > window_len)
            throw ConfigError("config: bad pyramid kernel");
        if (pyramid.stride != 2) throw ConfigError("config: pyramid stride must be 2");
        if (pyramid.depth < 1) throw ConfigError("config: pyramid depth must be >= 1");
        for (int c : stage_channels)
            if ((3 * c) % se_ratio != 0)
                throw ConfigError("config: se_ratio must divide 3x every stage width");
        if (stage_channels.back() % attention_heads != 0)
            throw ConfigError("config: attention heads must divide the last stage width");
        if (ssm.state_size < 1) throw ConfigError("config: ssm state_size must be >= 1");
        if (output_dim != 2 && output_dim != 3)
            throw ConfigError("config: output_dim must be 2 or 3");
        if (precision != "f32" && precision != "f64")
            throw ConfigError("config: precision must be f32 or f64");
        // window length at the last stage, after 2x downsampling between stages
        const int last_len = window_len >> (stages() - 1);
        if (last_len < 2) throw ConfigError("config: last stage window shorter than 2");
    }

    nlohmann::json to_json() const {
        return {{"in_channels", in_channels},
                {"window_len", window_len},
                {"stage_channels", stage_channels},
                {"blocks_per_stage", blocks_per_stage},
                {"pyramid", {{"kernel", pyramid.kernel}, {"stride", pyramid.stride},
                             {"depth", pyramid.depth}}},
                {"ssm", {{"state_size", ssm.state_size}, {"conv_kernel", ssm.conv_kernel}}},
                {"attention_heads", attention_heads},
                {"se_ratio", se_ratio},
                {"output_dim", output_dim},
                {"precision", precision}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.in_channels = j.value("in_channels", c.in_channels);
        c.window_len = j.value("window_len", c.window_len);
        if (j.contains("stage_channels"))
            c.stage_channels = j.at("stage_channels").get<std::vector<int>>();
        c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
        if (j.contains("pyramid")) {
            const auto& p = j.at("pyramid");
            c.pyramid.kernel = p.value("kernel", c.pyramid.kernel);
            c.pyramid.stride = p.value("stride", c.pyramid.stride);
            c.pyramid.depth = p.value("depth", c.pyramid.depth);
        }
        if (j.contains("ssm")) {
            const auto& s = j.at("ssm");
            c.ssm.state_size = s.value("state_size", c.ssm.state_size);
            c.ssm.conv_kernel = s.value("conv_kernel", c.ssm.conv_kernel);
        }
        c.attention_heads = j.value("attention_heads", c.attention_heads);
        c.se_ratio = j.value("se_ratio", c.se_ratio);
        c.output_dim = j.value("output_dim", c.output_dim);
        c.precision = j.value("precision", c.precision);
        return c;
    }
};

// The assembled network: one pyramid split at the input, an MPC branch over
// the high band and a Mamba branch over the low band, strided pointwise
// downsampling between stages on both branches, attention on the low branch,
// pointwise fusion, pooled linear head.
template <typename T>
class Model {
public:
    ModelConfig config;
    ParamStore<T> params;
    // per-channel training-set statistics, applied on entry
    Tensor<T> input_mean;
    Tensor<T> input_std;
    uint64_t seed = 0;

    static Model build(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        Model m;
        m.config = cfg;
        m.seed = seed;
        m.input_mean = Tensor<T>({cfg.in_channels});
        m.input_std = Tensor<T>::full({cfg.in_channels}, T(1));
        Rng rng(seed);

        auto dense = [&](const std::string& name, int out, int in) {
            Tensor<T> w({out, in});
            const double bound = std::sqrt(1.0 / in);
            for (int64_t i = 0; i < w.size(); ++i)
                w[i] = static_cast<T>(rng.uniform(-bound, bound));
            m.params.create(name + ".weight", std::move(w));
            Tensor<T> b({out});
            for (int64_t i = 0; i < b.size(); ++i)
                b[i] = static_cast<T>(rng.uniform(-bound, bound));
            m.params.create(name + ".bias", std::move(b));
        };

        dense("stem.high", cfg.stage_channels[0], cfg.in_channels);
        dense("stem.low", cfg.stage_channels[0], cfg.in_channels);
        for (int s = 0; s < cfg.stages(); ++s) {
            const int ch = cfg.stage_channels[static_cast<size_t>(s)];
            for (int b = 0; b < cfg.blocks_per_stage; ++b) {
                const std::string base = "stage" + std::to_string(s);
                mpc::init_block(m.params, base + ".high.block" + std::to_string(b), ch,
                                cfg.se_ratio, rng);
                ssm::init_mamba_block(m.params, base + ".low.block" + std::to_string(b), ch,
                                      cfg.ssm.state_size, cfg.ssm.conv_kernel, rng);
            }
            if (s + 1 < cfg.stages()) {
                const int next = cfg.stage_channels[static_cast<size_t>(s + 1)];
                dense("stage" + std::to_string(s) + ".down.high", next, ch);
                dense("stage" + std::to_string(s) + ".down.low", next, ch);
            }
        }
        ssm::init_attention(m.params, "attn", cfg.stage_channels.back(), rng);
        dense("fusion", cfg.stage_channels.back(), 2 * cfg.stage_channels.back());
        dense("head", cfg.output_dim, cfg.stage_channels.back());
        return m;
    }

    int64_t param_count() const { return params.total_size(); }

    // Builds the forward graph for one window and returns the output node
    // (a vector of output_dim velocities, m/s).
    typename Graph<T>::NodeId forward(Graph<T>& g, const Tensor<T>& window) const {
        auto pooled = forward_pooled(g, window);
        auto out = g.linear(pooled, g.param(params, "head.weight"),
                            g.param(params, "head.bias"));
        g.check_finite(out, "head");
        return out;
    }

    // The fused, time-pooled feature vector feeding the head.
    typename Graph<T>::NodeId forward_pooled(Graph<T>& g, const Tensor<T>& window) const {
        if (window.rank() != 2 || window.dim(0) != config.in_channels ||
            window.dim(1) != config.window_len)
            throw ShapeError("forward: window shape does not match config");
        Tensor<T> centered = window;
        for (int c = 0; c < window.dim(0); ++c) {
            const T inv = T(1) / input_std[c];
            for (int t = 0; t < window.dim(1); ++t)
                centered.at(c, t) = (centered.at(c, t) - input_mean[c]) * inv;
        }

        auto x = g.input(std::move(centered));
        auto low = g.decompose_low(x, config.pyramid.kernel, config.pyramid.stride);
        auto high = g.sub(x, low);

        auto hb = g.pointwise_conv1d(high, g.param(params, "stem.high.weight"),
                                     g.param(params, "stem.high.bias"), 1);
        auto lb = g.pointwise_conv1d(low, g.param(params, "stem.low.weight"),
                                     g.param(params, "stem.low.bias"), 1);
        for (int s = 0; s < config.stages(); ++s) {
            const std::string base = "stage" + std::to_string(s);
            for (int b = 0; b < config.blocks_per_stage; ++b) {
                hb = mpc::forward(g, params, base + ".high.block" + std::to_string(b), hb,
                                  /*strict_len=*/false);
                lb = ssm::mamba_forward(g, params, base + ".low.block" + std::to_string(b), lb);
            }
            g.check_finite(hb, base + ".high");
            g.check_finite(lb, base + ".low");
            if (s + 1 < config.stages()) {
                hb = g.pointwise_conv1d(hb, g.param(params, base + ".down.high.weight"),
                                        g.param(params, base + ".down.high.bias"), 2);
                lb = g.pointwise_conv1d(lb, g.param(params, base + ".down.low.weight"),
                                        g.param(params, base + ".down.low.bias"), 2);
            }
        }
        lb = ssm::attention_forward(g, params, "attn", lb, config.attention_heads);
        g.check_finite(lb, "attn");

        auto fused = g.linear(g.concat_channels({hb, lb}), g.param(params, "fusion.weight"),
                              g.param(params, "fusion.bias"));
        return g.global_avg_pool_time(fused);
    }

    std::vector<T> predict(const Tensor<T>& window) const {
        Graph<T> g;
        auto out = forward(g, window);
        const auto& v = g.value(out);
        return std::vector<T>(v.data(), v.data() + v.size());
    }

    std::vector<T> features(const Tensor<T>& window) const {
        Graph<T> g;
        auto out = forward_pooled(g, window);
        const auto& v = g.value(out);
        return std::vector<T>(v.data(), v.data() + v.size());
    }
};

// Mean squared error over velocity components.
template <typename T>
typename Graph<T>::NodeId loss(Graph<T>& g, typename Graph<T>::NodeId pred,
                               const std::vector<T>& label) {
    return g.mse(pred, Tensor<T>({static_cast<int>(label.size())}, label));
}

// ---- checkpoint format ----
//
// magic "MIOC" | u32 version | u64 json length | UTF-8 JSON header |
// raw little-endian f32 blobs, one per parameter, in header "names" order
// (lexicographic). The header carries config, shapes, offsets, seed,
// normalization stats, and training metadata.

struct TrainMeta {
    int epoch = 0;
    double lr = 0;
    double val_loss = 0;
};

namespace detail {

inline void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& s, uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& s, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(s, bits);
}

inline uint32_t get_u32(const std::string& s, size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    return v;
}

inline uint64_t get_u64(const std::string& s, size_t off) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    return v;
}

inline float get_f32(const std::string& s, size_t off) {
    const uint32_t bits = get_u32(s, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Model<float>& model,
                            const TrainMeta& meta) {
    nlohmann::json names = nlohmann::json::array();
    nlohmann::json shapes = nlohmann::json::object();
    nlohmann::json offsets = nlohmann::json::object();
    int64_t off = 0;
    for (const auto& [name, p] : model.params) {
        names.push_back(name);
        shapes[name] = p.value.shape();
        offsets[name] = off;
        off += p.value.size() * 4;
    }
    std::vector<double> mean(model.input_mean.size()), stdev(model.input_std.size());
    for (int64_t i = 0; i < model.input_mean.size(); ++i) {
        mean[static_cast<size_t>(i)] = static_cast<double>(model.input_mean[i]);
        stdev[static_cast<size_t>(i)] = static_cast<double>(model.input_std[i]);
    }

    nlohmann::json header = {
        {"config", model.config.to_json()},
        {"dtype", "f32"},
        {"names", names},
        {"shapes", shapes},
        {"offsets", offsets},
        {"seed", model.seed},
        {"normalization", {{"input_mean", mean}, {"input_std", stdev}}},
        {"training", {{"epoch", meta.epoch}, {"lr", meta.lr}, {"val_loss", meta.val_loss}}}};
    const std::string hs = header.dump();

    std::string out;
    out.reserve(16 + hs.size() + static_cast<size_t>(off));
    out += "MIOC";
    detail::put_u32(out, 1);
    detail::put_u64(out, hs.size());
    out += hs;
    for (const auto& [name, p] : model.params)
        for (int64_t i = 0; i < p.value.size(); ++i) detail::put_f32(out, p.value[i]);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw ConfigError("checkpoint: cannot write " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
    }
    std::filesystem::rename(tmp, path);
}

inline Model<float> load_checkpoint(const std::string& path, TrainMeta* meta_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || buf.compare(0, 4, "MIOC") != 0)
        throw ParseError("checkpoint: bad magic");
    if (detail::get_u32(buf, 4) != 1) throw ParseError("checkpoint: unsupported version");
    const uint64_t hlen = detail::get_u64(buf, 8);
    if (16 + hlen > buf.size()) throw ParseError("checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(16, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: bad header: ") + e.what());
    }
    if (header.at("dtype").get<std::string>() != "f32")
        throw ParseError("checkpoint: unsupported dtype");

    Model<float> m =
        Model<float>::build(ModelConfig::from_json(header.at("config")),
                            header.at("seed").get<uint64_t>());
    const auto mean = header.at("normalization").at("input_mean").get<std::vector<double>>();
    const auto stdev = header.at("normalization").at("input_std").get<std::vector<double>>();
    if (static_cast<int64_t>(mean.size()) != m.input_mean.size() || stdev.size() != mean.size())
        throw ParseError("checkpoint: normalization size mismatch");
    for (size_t i = 0; i < mean.size(); ++i) {
        m.input_mean[static_cast<int64_t>(i)] = static_cast<float>(mean[i]);
        m.input_std[static_cast<int64_t>(i)] = static_cast<float>(stdev[i]);
    }

    const size_t blob0 = 16 + hlen;
    for (const auto& jn : header.at("names")) {
        const std::string name = jn.get<std::string>();
        auto& p = m.params.at(name);
        const auto shape = header.at("shapes").at(name).get<std::vector<int>>();
        if (shape != p.value.shape()) throw ParseError("checkpoint: shape mismatch for " + name);
        const size_t off = blob0 + header.at("offsets").at(name).get<size_t>();
        if (off + static_cast<size_t>(p.value.size()) * 4 > buf.size())
            throw ParseError("checkpoint: truncated blob for " + name);
        for (int64_t i = 0; i < p.value.size(); ++i)
            p.value[i] = detail::get_f32(buf, off + static_cast<size_t>(i) * 4);
    }
    if (meta_out) {
        const auto& t = header.at("training");
        meta_out->epoch = t.at("epoch").get<int>();
        meta_out->lr = t.at("lr").get<double>();
        meta_out->val_loss = t.at("val_loss").get<double>();
    }
    return m;
}

}  // namespace mambaio::model
