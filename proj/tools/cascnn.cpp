// Command-line front end: degrade / train / finetune / restore / eval /
// bench / gradcheck. Exit codes: 0 success, 1 runtime failure, 2 usage or
// configuration error.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cascnn/dataset.hpp"
#include "cascnn/errors.hpp"
#include "cascnn/gradcheck.hpp"
#include "cascnn/jpeg.hpp"
#include "cascnn/metrics.hpp"
#include "cascnn/model.hpp"
#include "cascnn/restore.hpp"
#include "cascnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace cascnn;

namespace {

// Closed key=value schema; unknown keys are rejected up front.
struct RunConfig {
    int qf = 20;
    int width_num = 1;
    int width_den = 8;
    float lr = 1e-3f;
    int batch = 20;
    int epochs = 20;
    uint64_t seed = 0;
    int patch_size = 48;
    std::string data_dir;    // empty: use the synthetic corpus
    int synth_images = 16;
    int synth_size = 96;
    double train_ratio = 0.8;
    double val_ratio = 0.2;
    int plateau_patience = 5;
    int converge_patience = 10;
    double converge_rtol = 1e-3;
    int checkpoint_every = 0;
    std::string checkpoint = "model.ckpt";
    std::string log_csv = "epochs.csv";
};

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::function<void(const std::string&)>> schema;
    schema["qf"] = [&](const std::string& v) { cfg.qf = std::stoi(v); };
    schema["width_num"] = [&](const std::string& v) { cfg.width_num = std::stoi(v); };
    schema["width_den"] = [&](const std::string& v) { cfg.width_den = std::stoi(v); };
    schema["lr"] = [&](const std::string& v) { cfg.lr = std::stof(v); };
    schema["batch"] = [&](const std::string& v) { cfg.batch = std::stoi(v); };
    schema["epochs"] = [&](const std::string& v) { cfg.epochs = std::stoi(v); };
    schema["seed"] = [&](const std::string& v) { cfg.seed = std::stoull(v); };
    schema["patch_size"] = [&](const std::string& v) { cfg.patch_size = std::stoi(v); };
    schema["data_dir"] = [&](const std::string& v) { cfg.data_dir = v; };
    schema["synth_images"] = [&](const std::string& v) { cfg.synth_images = std::stoi(v); };
    schema["synth_size"] = [&](const std::string& v) { cfg.synth_size = std::stoi(v); };
    schema["train_ratio"] = [&](const std::string& v) { cfg.train_ratio = std::stod(v); };
    schema["val_ratio"] = [&](const std::string& v) { cfg.val_ratio = std::stod(v); };
    schema["plateau_patience"] = [&](const std::string& v) { cfg.plateau_patience = std::stoi(v); };
    schema["converge_patience"] = [&](const std::string& v) { cfg.converge_patience = std::stoi(v); };
    schema["converge_rtol"] = [&](const std::string& v) { cfg.converge_rtol = std::stod(v); };
    schema["checkpoint_every"] = [&](const std::string& v) { cfg.checkpoint_every = std::stoi(v); };
    schema["checkpoint"] = [&](const std::string& v) { cfg.checkpoint = v; };
    schema["log_csv"] = [&](const std::string& v) { cfg.log_csv = v; };

    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto strip = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = strip(line.substr(0, eq));
        std::string val = strip(line.substr(eq + 1));
        auto it = schema.find(key);
        if (it == schema.end())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        try {
            it->second(val);
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": bad value '" + val +
                              "' for key '" + key + "'");
        }
    }
    return cfg;
}

void validate(const RunConfig& cfg) {
    if (cfg.qf < 1 || cfg.qf > 100)
        throw ConfigError("qf must be in [1,100], got " + std::to_string(cfg.qf));
    if (cfg.width_num < 1 || cfg.width_den < 1)
        throw ConfigError("width multiplier must be positive");
    if (cfg.batch < 1 || cfg.epochs < 1) throw ConfigError("batch and epochs must be >= 1");
    if (cfg.patch_size % 8 != 0 || cfg.patch_size < 8)
        throw ConfigError("patch_size must be a positive multiple of 8");
    if (cfg.train_ratio <= 0.0 || cfg.val_ratio < 0.0 ||
        cfg.train_ratio + cfg.val_ratio > 1.0 + 1e-12)
        throw ConfigError("train/val ratios must be positive and sum to at most 1");
}

std::vector<std::string> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

std::vector<Image> source_images(const RunConfig& cfg) {
    if (cfg.data_dir.empty())
        return dataset::synth_corpus(cfg.synth_images, cfg.synth_size, cfg.seed + 0x5eed);
    auto paths = list_images(cfg.data_dir);
    if (paths.empty()) throw IoError("no inputs: no .pgm/.ppm files in " + cfg.data_dir);
    std::vector<Image> out;
    for (const std::string& p : paths) out.push_back(dataset::read_image_as_luma(p));
    return out;
}

train::Dataset make_dataset(const RunConfig& cfg, dataset::PatchSet* keep = nullptr) {
    std::vector<Image> patches;
    for (const Image& img : source_images(cfg)) {
        auto ps = dataset::extract_patches(img, cfg.patch_size);
        patches.insert(patches.end(), ps.begin(), ps.end());
    }
    if (patches.empty())
        throw ConfigError("no patches: inputs smaller than patch_size " +
                          std::to_string(cfg.patch_size));
    dataset::PatchSet set =
        dataset::build_pairs(patches, cfg.qf, cfg.train_ratio, cfg.val_ratio, cfg.seed);
    train::Dataset data;
    for (const auto& p : set.pairs) {
        train::Sample s{to_tensor(p.distorted), to_tensor(p.reference)};
        if (p.split == dataset::Split::Train)
            data.train.push_back(std::move(s));
        else if (p.split == dataset::Split::Val)
            data.val.push_back(std::move(s));
    }
    if (keep) *keep = std::move(set);
    return data;
}

int cmd_degrade(const std::string& in_dir, const std::string& out_dir, int qf) {
    if (qf < 1 || qf > 100)
        throw ConfigError("qf must be in [1,100], got " + std::to_string(qf));
    auto paths = list_images(in_dir);
    if (paths.empty()) throw IoError("no inputs: no .pgm/.ppm files in " + in_dir);
    fs::create_directories(out_dir);

    int failures = 0;
    double psnr_sum = 0.0;
    int n_ok = 0;
    std::string manifest = (fs::path(out_dir) / "manifest.csv").string();
    std::string tmp = manifest + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << "patch_id,source,qf,split\n";
        for (const std::string& p : paths) {
            try {
                Image luma = dataset::read_image_as_luma(p);
                Image deg = jpeg::degrade(luma, qf);
                std::string name = fs::path(p).stem().string() + ".pgm";
                dataset::write_pgm(deg, (fs::path(out_dir) / name).string());
                os << name << "," << p << "," << qf << ",all\n";
                psnr_sum += metrics::psnr(luma, deg);
                ++n_ok;
            } catch (const std::exception& e) {
                std::cerr << "error: " << p << ": " << e.what() << "\n";
                ++failures;
            }
        }
    }
    if (std::rename(tmp.c_str(), manifest.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + manifest);
    if (n_ok > 0)
        std::printf("degraded %d images at qf %d, corpus-mean PSNR %.3f dB\n", n_ok, qf,
                    psnr_sum / double(n_ok));
    return failures == 0 ? 0 : 1;
}

int cmd_train(const RunConfig& cfg, const std::string& warm_start) {
    validate(cfg);
    train::Dataset data = make_dataset(cfg);

    CasCnnModel model = CasCnnModel::build(cfg.width_num, cfg.width_den);
    bool finetune = !warm_start.empty();
    if (finetune) {
        model = CasCnnModel::load_checkpoint(warm_start);
        std::printf("warm start from %s (width %d/%d)\n", warm_start.c_str(),
                    model.width_num(), model.width_den());
    } else {
        model.init_weights(cfg.seed);
    }

    train::TrainConfig tc;
    tc.phase = finetune ? train::Phase::OutputOnly : train::Phase::MultiScale;
    tc.batch = cfg.batch;
    tc.epochs = cfg.epochs;
    tc.lr = cfg.lr;
    tc.plateau_patience = cfg.plateau_patience;
    tc.converge_patience = cfg.converge_patience;
    tc.converge_rtol = cfg.converge_rtol;
    tc.seed = cfg.seed;
    tc.checkpoint_every = cfg.checkpoint_every;
    tc.checkpoint_path = cfg.checkpoint;

    auto logs = train::train(model, data, tc);
    model.save_checkpoint(cfg.checkpoint);
    train::write_epoch_csv(logs, cfg.log_csv);
    std::printf("%zu epochs (%s), final train %.6g, final val %.6g\n", logs.size(),
                finetune ? "output-only" : "multi-scale", logs.back().train_loss,
                logs.back().val_loss);
    std::printf("wrote %s and %s\n", cfg.checkpoint.c_str(), cfg.log_csv.c_str());
    return 0;
}

int cmd_restore(const std::string& ckpt, const std::string& in_path,
                const std::string& out_path) {
    CasCnnModel model = CasCnnModel::load_checkpoint(ckpt);
    std::ifstream probe(in_path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + in_path);
    char m0 = char(probe.get()), m1 = char(probe.get());
    probe.close();
    if (m0 == 'P' && m1 == '6') {
        // Color input: restore luma, pass the distorted chroma through.
        dataset::YcbcrImage ycc = dataset::rgb_to_ycbcr(dataset::read_ppm(in_path));
        ycc.y = restore_luma(model, ycc.y);
        dataset::write_ppm(dataset::ycbcr_to_rgb(ycc), out_path);
    } else {
        Image out = restore_luma(model, dataset::read_image_as_luma(in_path));
        dataset::write_pgm(out, out_path);
    }
    std::printf("restored %s -> %s\n", in_path.c_str(), out_path.c_str());
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt,
             const std::vector<int>& qf_list, const std::string& out_dir) {
    CasCnnModel model = CasCnnModel::load_checkpoint(ckpt);
    std::vector<Image> refs = source_images(cfg);
    fs::create_directories(out_dir);

    std::string sweep = (fs::path(out_dir) / "sweep.csv").string();
    std::string tmp = sweep + ".tmp";
    std::ofstream os(tmp);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os << "qf,psnr,psnr_b,ssim,ipsnr,ipsnr_b\n";
    for (int qf : qf_list) {
        std::vector<Image> baselines, restored;
        for (const Image& r : refs) {
            Image d = jpeg::degrade(r, qf);
            restored.push_back(restore_luma(model, d));
            baselines.push_back(std::move(d));
        }
        auto rep = metrics::evaluate(refs, restored, &baselines);
        std::string report = (fs::path(out_dir) / ("report_qf" + std::to_string(qf) + ".csv")).string();
        metrics::write_report_csv(rep, report);
        auto m = rep.mean();
        char buf[200];
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", qf, m.psnr, m.psnr_b,
                      m.ssim, m.ipsnr, m.ipsnr_b);
        os << buf;
        std::printf("qf %d: mean PSNR %.3f dB, IPSNR %+.3f dB, IPSNR-B %+.3f dB (%s)\n", qf,
                    m.psnr, m.ipsnr, m.ipsnr_b, report.c_str());
    }
    os.close();
    if (std::rename(tmp.c_str(), sweep.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + sweep);
    std::printf("wrote %s\n", sweep.c_str());
    return 0;
}

int cmd_bench(const std::string& ckpt, int size, int reps) {
    CasCnnModel model;
    if (!ckpt.empty()) {
        model = CasCnnModel::load_checkpoint(ckpt);
    } else {
        model = CasCnnModel::build(1, 8);
        model.init_weights(1);
    }
    if (size % 8 != 0) throw ConfigError("bench size must be a multiple of 8");
    Tensor x({1, 1, size, size});
    for (int64_t i = 0; i < x.numel(); ++i) x.data[i] = float((i * 2654435761u % 255)) / 255.0f;

    std::vector<double> secs;
    std::vector<float> checks;
    for (int r = 0; r < reps; ++r) {
        Tape tape;
        auto t0 = std::chrono::steady_clock::now();
        auto out = model.forward(tape, tape.leaf(x));
        auto t1 = std::chrono::steady_clock::now();
        secs.push_back(std::chrono::duration<double>(t1 - t0).count());
        const Tensor& y = tape.value(out.y_full);
        float acc = 0.0f;
        for (float v : y.data) acc += v;
        checks.push_back(acc);
    }
    for (size_t i = 1; i < checks.size(); ++i)
        if (checks[i] != checks[0]) throw NumericError("bench: nondeterministic forward output");

    double mean = 0.0;
    for (double s : secs) mean += s;
    mean /= double(secs.size());
    double var = 0.0;
    for (double s : secs) var += (s - mean) * (s - mean);
    double sd = std::sqrt(var / double(secs.size()));
    double px = double(size) * size;
    std::printf("%d reps on %dx%d: %.4f s/img mean (sd %.4f), %.0f pixel/s\n", reps, size, size,
                mean, sd, px / mean);
    return 0;
}

int cmd_gradcheck() {
    bool ok = true;
    std::printf("%-24s %12s %10s  %s\n", "check", "max_rel_err", "tol", "status");
    for (const auto& r : gradcheck::check_operators(1234)) {
        std::printf("%-24s %12.3e %10.0e  %s\n", r.name.c_str(), r.max_rel_err, r.tolerance,
                    r.pass ? "pass" : "FAIL");
        ok = ok && r.pass;
    }
    auto e2e = gradcheck::check_model_end_to_end(2024);
    std::printf("%-24s %12.3e %10.0e  %s\n", e2e.name.c_str(), e2e.max_rel_err, e2e.tolerance,
                e2e.pass ? "pass" : "FAIL");
    ok = ok && e2e.pass;
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"JPEG compression-artifact suppression toolkit"};
    app.require_subcommand(1);

    // degrade
    auto* degrade = app.add_subcommand("degrade", "JPEG-degrade a directory of images");
    std::string deg_in, deg_out;
    int deg_qf = 20;
    degrade->add_option("in_dir", deg_in, "input directory (.pgm/.ppm)")->required();
    degrade->add_option("out_dir", deg_out, "output directory")->required();
    degrade->add_option("--qf", deg_qf, "quality factor in [1,100]");

    // shared train/finetune options
    std::string config_path, warm_from;
    struct Overrides {
        int qf = -1, batch = -1, epochs = -1, width_num = -1, width_den = -1;
        double lr = -1.0;
        int64_t seed = -1;
        std::string checkpoint, log_csv, data_dir;
    } ov;
    auto add_train_opts = [&](CLI::App* c) {
        c->add_option("--config", config_path, "key=value config file");
        c->add_option("--qf", ov.qf, "quality factor override");
        c->add_option("--lr", ov.lr, "learning rate override");
        c->add_option("--batch", ov.batch, "minibatch size override");
        c->add_option("--epochs", ov.epochs, "epoch cap override");
        c->add_option("--seed", ov.seed, "rng seed override");
        c->add_option("--width-num", ov.width_num, "width multiplier numerator");
        c->add_option("--width-den", ov.width_den, "width multiplier denominator");
        c->add_option("--checkpoint", ov.checkpoint, "checkpoint output path");
        c->add_option("--log-csv", ov.log_csv, "epoch log output path");
        c->add_option("--data-dir", ov.data_dir, "image directory (default: synthetic corpus)");
    };
    auto* train_cmd = app.add_subcommand("train", "train from scratch (multi-scale loss)");
    add_train_opts(train_cmd);
    auto* finetune = app.add_subcommand("finetune", "fine-tune a checkpoint (output-only loss)");
    add_train_opts(finetune);
    finetune->add_option("--from", warm_from, "checkpoint to warm-start from")->required();

    // restore
    auto* restore = app.add_subcommand("restore", "restore a degraded image");
    std::string res_ckpt, res_in, res_out;
    restore->add_option("--ckpt", res_ckpt, "model checkpoint")->required();
    restore->add_option("input", res_in, "degraded image (.pgm/.ppm)")->required();
    restore->add_option("output", res_out, "restored image path")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "metric sweep over quality factors");
    std::string eval_ckpt, eval_out_dir = ".";
    std::vector<int> qf_list;
    eval_cmd->add_option("--ckpt", eval_ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--qf-list", qf_list, "quality factors to sweep")->required();
    eval_cmd->add_option("--out-dir", eval_out_dir, "report directory");
    eval_cmd->add_option("--config", config_path, "key=value config file");
    eval_cmd->add_option("--seed", ov.seed, "rng seed override");
    eval_cmd->add_option("--data-dir", ov.data_dir, "image directory (default: synthetic corpus)");

    // bench
    auto* bench = app.add_subcommand("bench", "time forward passes");
    std::string bench_ckpt;
    int bench_size = 120, bench_reps = 3;
    bench->add_option("--ckpt", bench_ckpt, "model checkpoint (default: fresh width-1/8)");
    bench->add_option("--size", bench_size, "square input size (multiple of 8)");
    bench->add_option("--reps", bench_reps, "repetitions");

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference gradient checks");

    try {
        app.parse(argc, argv);

        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (ov.qf >= 0) cfg.qf = ov.qf;
        if (ov.lr >= 0) cfg.lr = float(ov.lr);
        if (ov.batch >= 0) cfg.batch = ov.batch;
        if (ov.epochs >= 0) cfg.epochs = ov.epochs;
        if (ov.seed >= 0) cfg.seed = uint64_t(ov.seed);
        if (ov.width_num >= 0) cfg.width_num = ov.width_num;
        if (ov.width_den >= 0) cfg.width_den = ov.width_den;
        if (!ov.checkpoint.empty()) cfg.checkpoint = ov.checkpoint;
        if (!ov.log_csv.empty()) cfg.log_csv = ov.log_csv;
        if (!ov.data_dir.empty()) cfg.data_dir = ov.data_dir;

        if (degrade->parsed()) return cmd_degrade(deg_in, deg_out, deg_qf);
        if (train_cmd->parsed()) return cmd_train(cfg, "");
        if (finetune->parsed()) return cmd_train(cfg, warm_from);
        if (restore->parsed()) return cmd_restore(res_ckpt, res_in, res_out);
        if (eval_cmd->parsed()) return cmd_eval(cfg, eval_ckpt, qf_list, eval_out_dir);
        if (bench->parsed()) return cmd_bench(bench_ckpt, bench_size, bench_reps);
        return cmd_gradcheck();
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
