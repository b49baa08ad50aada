#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "mambaio/data.hpp"
#include "mambaio/errors.hpp"
#include "mambaio/eval.hpp"
#include "mambaio/metrics.hpp"
#include "mambaio/model.hpp"
#include "mambaio/plot.hpp"
#include "mambaio/pyramid.hpp"
#include "mambaio/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mambaio;

namespace {

constexpr const char* kVersion = "mambaio 0.1.0";

struct ManifestWriter {
    json j;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    ManifestWriter(const std::string& command, uint64_t seed) {
        j["command"] = command;
        j["seed"] = seed;
        j["version"] = kVersion;
        j["inputs"] = json::array();
        j["outputs"] = json::array();
#ifdef _OPENMP
        j["threads"] = omp_get_max_threads();
#else
        j["threads"] = 1;
#endif
    }

    void input(const std::string& p) { j["inputs"].push_back(p); }
    void output(const std::string& p) { j["outputs"].push_back(p); }

    // atomically written next to (or inside) the main output
    void write(const std::string& out_path) {
        j["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string path = fs::is_directory(out_path)
                                     ? out_path + "/manifest.json"
                                     : out_path + ".manifest.json";
        const std::string tmp = path + ".tmp";
        {
            std::ofstream f(tmp);
            if (!f) throw ConfigError("manifest: cannot write " + tmp);
            f << j.dump(2) << "\n";
        }
        fs::rename(tmp, path);
    }
};

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

// Sorted sequence subdirectories of a dataset directory.
std::vector<std::string> sequence_dirs(const std::string& data_dir) {
    std::vector<std::string> dirs;
    if (!fs::is_directory(data_dir)) throw ConfigError("not a directory: " + data_dir);
    if (fs::exists(data_dir + "/data.csv")) {
        dirs.push_back(data_dir);  // a single sequence
        return dirs;
    }
    for (const auto& e : fs::directory_iterator(data_dir))
        if (e.is_directory() && fs::exists(e.path() / "data.csv"))
            dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ConfigError("no sequences found under " + data_dir);
    return dirs;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_band_csv(const std::string& path, const Tensor<double>& band,
                    const std::vector<double>& times) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "t,gx,gy,gz,ax,ay,az\n";
    for (int t = 0; t < band.dim(1); ++t) {
        f << fmt17(times[static_cast<size_t>(t)]);
        for (int c = 0; c < band.dim(0); ++c) f << ',' << fmt17(band.at(c, t));
        f << '\n';
    }
}

Tensor<double> global_signal(const data::ImuSequence& seq, std::vector<double>* times) {
    const auto g = data::transform_sequence(seq, frames::Frame::global);
    int n = static_cast<int>(g.samples.size());
    if (n % 2 != 0) n -= 1;  // decompose needs an even length
    Tensor<double> x({6, n});
    for (int i = 0; i < n; ++i) {
        const auto& s = g.samples[static_cast<size_t>(i)];
        x.at(0, i) = s.gyro.x;
        x.at(1, i) = s.gyro.y;
        x.at(2, i) = s.gyro.z;
        x.at(3, i) = s.accel.x;
        x.at(4, i) = s.accel.y;
        x.at(5, i) = s.accel.z;
        if (times) times->push_back(s.t);
    }
    return x;
}

metrics::Trajectory load_traj_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "t,x,y")
        throw ParseError("trajectory csv: expected header t,x,y in " + path);
    metrics::Trajectory traj;
    std::vector<double> ts;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        double t, x, y;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &x, &y) != 3)
            throw ParseError("trajectory csv: bad line " + std::to_string(lineno) + " in " +
                             path);
        ts.push_back(t);
        traj.positions.push_back({x, y});
    }
    if (ts.size() < 2) throw DataError("trajectory csv: too short: " + path);
    traj.dt = ts[1] - ts[0];
    return traj;
}

void write_traj_csv(const std::string& path, const metrics::Trajectory& traj, double t0) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "t,x,y\n";
    for (size_t i = 0; i < traj.positions.size(); ++i)
        f << fmt17(t0 + static_cast<double>(i) * traj.dt) << ',' << fmt17(traj.positions[i][0])
          << ',' << fmt17(traj.positions[i][1]) << '\n';
}

eval::SeqEval eval_sequence(model::Model<float>& m, const data::ImuSequence& seq,
                            frames::Frame frame, int stride, double rte_window_s,
                            bool rte_auto) {
    return eval::evaluate_sequence(
        seq, m.config.window_len, stride, frame,
        [&m](const data::TrainingWindow& w) {
            auto pred = m.predict(w.x.cast<float>());
            return std::array<double, 2>{static_cast<double>(pred[0]),
                                         static_cast<double>(pred[1])};
        },
        rte_window_s, rte_auto);
}

int protected_main(int argc, char** argv) {
    if (const char* env = std::getenv("MAMBAIO_THREADS")) {
#ifdef _OPENMP
        const int cap = std::atoi(env);
        if (cap > 0) omp_set_num_threads(cap);
#endif
        (void)env;
    }

    CLI::App app{std::string(kVersion) + " - frequency-decoupled pedestrian inertial odometry"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic pedestrian sequence");
    uint64_t synth_seed = 0;
    double synth_duration = 60.0, synth_rate = 200.0;
    std::string synth_out, synth_params;
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--duration", synth_duration, "seconds")->required();
    synth->add_option("--out", synth_out, "output sequence directory")->required();
    synth->add_option("--rate", synth_rate, "sample rate, Hz");
    synth->add_option("--params", synth_params, "generator params: JSON file or inline JSON");

    // ---- decompose ----
    auto* dec = app.add_subcommand("decompose", "emit low/high frequency bands as CSV");
    std::string dec_in, dec_out;
    int dec_k = 5, dec_s = 2;
    dec->add_option("--in", dec_in, "sequence directory")->required();
    dec->add_option("--out", dec_out, "output directory")->required();
    dec->add_option("--k", dec_k, "averaging kernel size");
    dec->add_option("--s", dec_s, "downsampling stride");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model on a dataset directory");
    std::string train_data, train_out, train_cfg_path, train_frame = "global";
    uint64_t train_seed = 0;
    int train_stride = 10, train_epochs = -1, train_batch = -1;
    double train_lr = -1, train_val_frac = 0.1;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "checkpoint path")->required();
    train->add_option("--config", train_cfg_path, "model config JSON");
    train->add_option("--frame", train_frame, "global|body")
        ->check(CLI::IsMember({"global", "body"}));
    train->add_option("--seed", train_seed, "training seed");
    train->add_option("--stride", train_stride, "window stride, samples");
    train->add_option("--epochs", train_epochs, "override max epochs");
    train->add_option("--batch", train_batch, "override batch size");
    train->add_option("--lr", train_lr, "override initial learning rate");
    train->add_option("--val-frac", train_val_frac, "sequence fraction held out for validation");

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint: ATE/RTE report");
    std::string ev_ckpt, ev_data, ev_report, ev_traj_out;
    int ev_stride = 50;
    double ev_rte_window = 60.0;
    bool ev_rte_auto = true;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--report", ev_report, "output JSON path")->required();
    ev->add_option("--stride", ev_stride, "window stride, samples");
    ev->add_option("--rte-window", ev_rte_window, "RTE window, seconds");
    ev->add_flag("--rte-auto,!--no-rte-auto", ev_rte_auto,
                 "shrink the RTE window for short runs");
    ev->add_option("--traj-out", ev_traj_out, "write est/gt trajectory CSVs here");

    // ---- transform ----
    auto* tr = app.add_subcommand("transform", "rewrite a sequence into the other frame");
    std::string tr_in, tr_out, tr_frame;
    tr->add_option("--in", tr_in, "sequence directory")->required();
    tr->add_option("--frame", tr_frame, "target frame: global|body")
        ->required()
        ->check(CLI::IsMember({"global", "body"}));
    tr->add_option("--out", tr_out, "output sequence directory")->required();

    // ---- analyze-pca ----
    auto* pca = app.add_subcommand("analyze-pca", "explained variance of pooled model features");
    std::string pca_ckpt, pca_data, pca_out;
    int pca_k = 50, pca_stride = 50;
    pca->add_option("--ckpt", pca_ckpt, "checkpoint path")->required();
    pca->add_option("--data", pca_data, "dataset directory")->required();
    pca->add_option("--k", pca_k, "number of principal components");
    pca->add_option("--out", pca_out, "output CSV path")->required();
    pca->add_option("--stride", pca_stride, "window stride, samples");

    // ---- plot ----
    auto* pl = app.add_subcommand("plot", "SVG overlay of two trajectories");
    std::vector<std::string> pl_traj;
    std::string pl_out;
    pl->add_option("--traj", pl_traj, "estimate and ground-truth CSVs")
        ->expected(2)
        ->required();
    pl->add_option("--out", pl_out, "output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage maps to 2; --help stays 0
    }

    if (*synth) {
        ManifestWriter mf("synth", synth_seed);
        data::GenParams params;
        if (!synth_params.empty()) {
            if (!synth_params.empty() && synth_params.front() == '{')
                params = data::GenParams::from_json_text(synth_params);
            else {
                std::ifstream f(synth_params);
                if (!f) throw ConfigError("cannot open params file " + synth_params);
                std::string text((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
                params = data::GenParams::from_json_text(text);
                mf.input(synth_params);
            }
        }
        const double window_s = 200.0 / synth_rate;
        if (synth_duration < 2 * window_s)
            throw ConfigError("synth: duration must cover at least two windows (" +
                              std::to_string(2 * window_s) + " s)");
        const auto seq = data::generate_trajectory(synth_seed, synth_duration, params,
                                                   synth_rate);
        data::save_sequence(seq, synth_out);
        mf.j["params"] = json::parse(params.to_json_text());
        mf.output(synth_out);
        mf.write(synth_out);
        std::cout << "wrote " << seq.samples.size() << " samples to " << synth_out << "\n";
    } else if (*dec) {
        ManifestWriter mf("decompose", 0);
        mf.input(dec_in);
        const auto seq = data::load_sequence(dec_in);
        std::vector<double> times;
        const auto x = global_signal(seq, &times);
        const auto bands = pyramid::decompose(x, dec_k, dec_s);
        fs::create_directories(dec_out);
        write_band_csv(dec_out + "/input.csv", x, times);
        write_band_csv(dec_out + "/low.csv", bands.low, times);
        write_band_csv(dec_out + "/high.csv", bands.high, times);
        mf.output(dec_out);
        mf.write(dec_out);
        std::cout << "wrote bands for " << x.dim(1) << " samples to " << dec_out << "\n";
    } else if (*train) {
        ManifestWriter mf("train", train_seed);
        mf.input(train_data);

        model::ModelConfig mcfg;
        if (!train_cfg_path.empty()) {
            mcfg = model::ModelConfig::from_json(read_json_file(train_cfg_path));
            mf.input(train_cfg_path);
        }
        trainer::TrainConfig tcfg;
        tcfg.seed = train_seed;
        if (train_epochs > 0) tcfg.max_epochs = train_epochs;
        if (train_batch > 0) tcfg.batch_size = train_batch;
        if (train_lr > 0) tcfg.lr0 = train_lr;

        const auto dirs = sequence_dirs(train_data);
        size_t n_val = std::max<size_t>(1, static_cast<size_t>(train_val_frac *
                                                               static_cast<double>(dirs.size())));
        if (n_val >= dirs.size()) n_val = dirs.size() - 1;
        if (dirs.size() < 2) throw ConfigError("train: need at least two sequences");

        const auto frame =
            train_frame == "global" ? frames::Frame::global : frames::Frame::body;
        std::vector<data::TrainingWindow> train_w, val_w;
        for (size_t i = 0; i < dirs.size(); ++i) {
            auto w = data::make_windows(data::load_sequence(dirs[i]), mcfg.window_len,
                                        train_stride, frame);
            auto& dst = (i >= dirs.size() - n_val) ? val_w : train_w;
            for (auto& x : w) dst.push_back(std::move(x));
        }
        std::cout << "train windows: " << train_w.size() << ", val windows: " << val_w.size()
                  << "\n";

        auto m = model::Model<float>::build(mcfg, train_seed);
        auto fitres = trainer::fit(m, train_w, val_w, tcfg, true);
        model::save_checkpoint(train_out, fitres.best_model, fitres.best_meta);

        const std::string hist_path = train_out + ".history.csv";
        {
            std::ofstream f(hist_path);
            f << "epoch,train_loss,val_loss,lr\n";
            for (const auto& e : fitres.history)
                f << e.epoch << ',' << fmt17(e.train_loss) << ',' << fmt17(e.val_loss) << ','
                  << fmt17(e.lr) << '\n';
        }
        mf.j["config"] = mcfg.to_json();
        mf.j["train"] = {{"epochs_run", fitres.history.size()},
                         {"best_epoch", fitres.best_meta.epoch},
                         {"best_val_loss", fitres.best_meta.val_loss},
                         {"frame", train_frame},
                         {"stride", train_stride},
                         {"diverged", fitres.diverged}};
        mf.output(train_out);
        mf.output(hist_path);
        mf.write(train_out);
        std::cout << "best val loss " << fitres.best_meta.val_loss << " at epoch "
                  << fitres.best_meta.epoch << "; checkpoint: " << train_out << "\n";
    } else if (*ev) {
        ManifestWriter mf("eval", 0);
        mf.input(ev_ckpt);
        mf.input(ev_data);
        model::TrainMeta meta;
        auto m = model::load_checkpoint(ev_ckpt, &meta);
        const auto dirs = sequence_dirs(ev_data);

        json seqs = json::array();
        double ate_sum = 0, rte_sum = 0;
        for (const auto& d : dirs) {
            const auto seq = data::load_sequence(d);
            const auto r = eval_sequence(m, seq, frames::Frame::global, ev_stride,
                                         ev_rte_window, ev_rte_auto);
            seqs.push_back({{"sequence", d},
                            {"ate_m", r.ate_m},
                            {"rte_m", r.rte_m},
                            {"window_s", r.window_s},
                            {"n_windows", r.n_windows}});
            ate_sum += r.ate_m;
            rte_sum += r.rte_m;
            if (!ev_traj_out.empty()) {
                fs::create_directories(ev_traj_out);
                const std::string base =
                    ev_traj_out + "/" + fs::path(d).filename().string();
                write_traj_csv(base + ".est.csv", r.est, 0.0);
                write_traj_csv(base + ".gt.csv", r.gt, 0.0);
            }
        }
        json report = {{"ate_m", ate_sum / static_cast<double>(dirs.size())},
                       {"rte_m", rte_sum / static_cast<double>(dirs.size())},
                       {"window_s", seqs.empty() ? 0.0 : seqs[0]["window_s"].get<double>()},
                       {"n_windows", seqs.size()},
                       {"sequences", seqs}};
        {
            std::ofstream f(ev_report);
            if (!f) throw ConfigError("cannot write " + ev_report);
            f << report.dump(2) << "\n";
        }
        mf.output(ev_report);
        mf.write(ev_report);
        std::cout << report["ate_m"] << " m ATE, " << report["rte_m"] << " m RTE over "
                  << dirs.size() << " sequences\n";
    } else if (*tr) {
        ManifestWriter mf("transform", 0);
        mf.input(tr_in);
        const auto seq = data::load_sequence(tr_in);
        const auto out = data::transform_sequence(
            seq, tr_frame == "global" ? frames::Frame::global : frames::Frame::body);
        data::save_sequence(out, tr_out);
        mf.output(tr_out);
        mf.write(tr_out);
        std::cout << "wrote " << tr_frame << "-frame sequence to " << tr_out << "\n";
    } else if (*pca) {
        ManifestWriter mf("analyze-pca", 0);
        mf.input(pca_ckpt);
        mf.input(pca_data);
        auto m = model::load_checkpoint(pca_ckpt);
        const auto dirs = sequence_dirs(pca_data);

        std::vector<std::vector<float>> rows;
        for (const auto& d : dirs) {
            const auto seq = data::load_sequence(d);
            auto windows =
                data::make_windows(seq, m.config.window_len, pca_stride, frames::Frame::global);
            const size_t base = rows.size();
            rows.resize(base + windows.size());
            const int64_t n = static_cast<int64_t>(windows.size());
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i)
                rows[base + static_cast<size_t>(i)] =
                    m.features(windows[static_cast<size_t>(i)].x.cast<float>());
        }
        if (rows.size() < 2) throw DataError("analyze-pca: need at least two windows");
        Tensor<double> feats({static_cast<int>(rows.size()),
                              static_cast<int>(rows[0].size())});
        for (size_t i = 0; i < rows.size(); ++i)
            for (size_t j = 0; j < rows[i].size(); ++j)
                feats.at(static_cast<int>(i), static_cast<int>(j)) =
                    static_cast<double>(rows[i][j]);

        const auto evar = metrics::pca_explained_variance(feats, pca_k);
        {
            std::ofstream f(pca_out);
            if (!f) throw ConfigError("cannot write " + pca_out);
            f << "component,ratio,cumulative\n";
            for (size_t i = 0; i < evar.ratios.size(); ++i)
                f << (i + 1) << ',' << fmt17(evar.ratios[i]) << ',' << fmt17(evar.cumulative[i])
                  << '\n';
        }
        mf.output(pca_out);
        mf.write(pca_out);
        std::cout << "wrote " << evar.ratios.size() << " components; top-k coverage "
                  << evar.cumulative.back() << "\n";
    } else if (*pl) {
        ManifestWriter mf("plot", 0);
        mf.input(pl_traj[0]);
        mf.input(pl_traj[1]);
        const auto est = load_traj_csv(pl_traj[0]);
        const auto gt = load_traj_csv(pl_traj[1]);
        plot::write_trajectory_svg(pl_out, est, gt);
        mf.output(pl_out);
        mf.write(pl_out);
        std::cout << "wrote " << pl_out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return protected_main(argc, argv);
    } catch (const ConfigError& e) {  // includes ParseError
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
