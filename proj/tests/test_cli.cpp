// Exercises the installed command-line binary end to end. The binary path
// is injected at compile time as CASCNN_CLI_PATH.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#ifndef _WIN32
#include <sys/wait.h>
#endif
#include <filesystem>
#include <fstream>
#include <string>

#include "cascnn/dataset.hpp"
#include "cascnn/model.hpp"

#ifndef CASCNN_CLI_PATH
#error "CASCNN_CLI_PATH must point at the cli binary"
#endif

namespace fs = std::filesystem;
using namespace cascnn;

namespace {

int run(const std::string& args) {
    std::string cmd = std::string(CASCNN_CLI_PATH) + " " + args;
    int status = std::system(cmd.c_str());
#ifdef _WIN32
    return status;
#else
    return WEXITSTATUS(status);
#endif
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& name) : path(fs::path("cli_tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string operator/(const std::string& p) const { return (path / p).string(); }
};

void write_corpus(const fs::path& dir, int n, int size, uint64_t seed) {
    auto corpus = dataset::synth_corpus(n, size, seed);
    for (int i = 0; i < n; ++i)
        dataset::write_pgm(corpus[size_t(i)], (dir / ("img" + std::to_string(i) + ".pgm")).string());
}

}  // namespace

TEST_CASE("out-of-range qf is a usage error (exit 2)") {
    TmpDir t("qf_bounds");
    CHECK(run("degrade " + (t / "in") + " " + (t / "out") + " --qf 101 2>/dev/null") == 2);
    CHECK(run("degrade " + (t / "in") + " " + (t / "out") + " --qf 0 2>/dev/null") == 2);
}

TEST_CASE("degrading an empty directory reports 'no inputs'") {
    TmpDir t("empty_dir");
    fs::create_directories(t / "in");
    std::string err = t / "stderr.txt";
    CHECK(run("degrade " + (t / "in") + " " + (t / "out") + " --qf 20 2>" + err) == 1);
    CHECK(slurp(err).find("no inputs") != std::string::npos);
}

TEST_CASE("degrade writes one pgm per input plus a manifest") {
    TmpDir t("degrade_ok");
    fs::create_directories(t / "in");
    write_corpus(t.path / "in", 3, 32, 1);
    CHECK(run("degrade " + (t / "in") + " " + (t / "out") + " --qf 20 >/dev/null") == 0);
    for (int i = 0; i < 3; ++i) CHECK(fs::exists(t / ("out/img" + std::to_string(i) + ".pgm")));
    std::string manifest = slurp(t / "out/manifest.csv");
    CHECK(manifest.rfind("patch_id,source,qf,split\n", 0) == 0);
    // Degraded output differs from the source at qf 20.
    CHECK(slurp(t / "out/img0.pgm") != slurp(t / "in/img0.pgm"));
}

TEST_CASE("restore keeps non-multiple-of-8 sizes (100x75 in, 100x75 out)") {
    TmpDir t("restore_pad");
    CasCnnModel m = CasCnnModel::build(1, 8);
    m.init_weights(4);
    m.save_checkpoint(t / "model.ckpt");

    auto corpus = dataset::synth_corpus(1, 112, 2);
    Image img(75, 100);
    for (int y = 0; y < 75; ++y)
        for (int x = 0; x < 100; ++x) img.at(y, x) = corpus[0].at(y, x);
    img = snap_to_8bit(img);
    dataset::write_pgm(img, t / "in.pgm");

    CHECK(run("restore --ckpt " + (t / "model.ckpt") + " " + (t / "in.pgm") + " " +
              (t / "out.pgm") + " >/dev/null") == 0);
    Image out = dataset::read_pgm(t / "out.pgm");
    CHECK(out.h == 75);
    CHECK(out.w == 100);
}

TEST_CASE("restore recombines chroma for color inputs") {
    TmpDir t("restore_color");
    CasCnnModel m = CasCnnModel::build(1, 8);
    m.init_weights(4);
    m.save_checkpoint(t / "model.ckpt");

    dataset::RgbImage rgb;
    rgb.h = 16;
    rgb.w = 16;
    rgb.rgb.resize(768);
    for (size_t i = 0; i < rgb.rgb.size(); ++i) rgb.rgb[i] = uint8_t((i * 7 + 31) % 256);
    dataset::write_ppm(rgb, t / "in.ppm");
    CHECK(run("restore --ckpt " + (t / "model.ckpt") + " " + (t / "in.ppm") + " " +
              (t / "out.ppm") + " >/dev/null") == 0);
    dataset::RgbImage out = dataset::read_ppm(t / "out.ppm");
    CHECK(out.h == 16);
    CHECK(out.w == 16);
}

TEST_CASE("finetune without --from is a usage error (exit 2)") {
    CHECK(run("finetune 2>/dev/null") == 2);
}

TEST_CASE("unknown config keys are rejected (exit 2)") {
    TmpDir t("bad_config");
    {
        std::ofstream os(t / "cfg.txt");
        os << "qf = 20\nbogus_key = 1\n";
    }
    std::string err = t / "stderr.txt";
    CHECK(run("train --config " + (t / "cfg.txt") + " 2>" + err) == 2);
    CHECK(slurp(err).find("bogus_key") != std::string::npos);
}

TEST_CASE("train writes checkpoint and epoch csv; reruns are identical") {
    TmpDir t("train_desk");
    {
        std::ofstream os(t / "cfg.txt");
        os << "# desk-scale smoke configuration\n"
           << "width_num = 1\nwidth_den = 8\n"
           << "qf = 20\nlr = 1e-3\nbatch = 4\nepochs = 2\nseed = 3\n"
           << "synth_images = 2\nsynth_size = 32\npatch_size = 16\n";
    }
    std::string base = "train --config " + (t / "cfg.txt");
    CHECK(run(base + " --checkpoint " + (t / "a.ckpt") + " --log-csv " + (t / "a.csv") +
              " >/dev/null") == 0);
    CHECK(fs::exists(t / "a.ckpt"));
    std::string csv = slurp(t / "a.csv");
    CHECK(csv.rfind("epoch,phase,train_loss,val_loss,seconds\n", 0) == 0);
    CHECK(csv.find("multi-scale") != std::string::npos);

    CHECK(run(base + " --checkpoint " + (t / "b.ckpt") + " --log-csv " + (t / "b.csv") +
              " >/dev/null") == 0);
    CHECK(slurp(t / "a.ckpt") == slurp(t / "b.ckpt"));  // bit-identical reruns

    // finetune warm-starts from the checkpoint and logs the other phase.
    CHECK(run("finetune --from " + (t / "a.ckpt") + " --config " + (t / "cfg.txt") +
              " --checkpoint " + (t / "ft.ckpt") + " --log-csv " + (t / "ft.csv") +
              " >/dev/null") == 0);
    CHECK(slurp(t / "ft.csv").find("output-only") != std::string::npos);
}

TEST_CASE("eval emits per-qf reports and a sweep csv") {
    TmpDir t("eval_sweep");
    CasCnnModel m = CasCnnModel::build(1, 8);
    m.init_weights(4);
    m.save_checkpoint(t / "model.ckpt");
    CHECK(run("eval --ckpt " + (t / "model.ckpt") +
              " --qf-list 20 40 --out-dir " + (t / "rep") +
              " --seed 1 >/dev/null") == 0);
    CHECK(fs::exists(t / "rep/report_qf20.csv"));
    CHECK(fs::exists(t / "rep/report_qf40.csv"));
    std::string sweep = slurp(t / "rep/sweep.csv");
    CHECK(sweep.rfind("qf,", 0) == 0);
    CHECK(sweep.find("\n20,") != std::string::npos);
    CHECK(sweep.find("\n40,") != std::string::npos);
}

TEST_CASE("bench reports throughput for repeated deterministic passes") {
    std::string out = "cli_bench_out.txt";
    CHECK(run("bench --size 16 --reps 3 >" + out) == 0);
    std::string s = slurp(out);
    CHECK(s.find("3 reps on 16x16") != std::string::npos);
    CHECK(s.find("pixel/s") != std::string::npos);
    std::remove(out.c_str());
}

TEST_CASE("gradcheck runs clean through the cli") {
    std::string out = "cli_gradcheck_out.txt";
    CHECK(run("gradcheck >" + out) == 0);
    std::string s = slurp(out);
    CHECK(s.find("pass") != std::string::npos);
    CHECK(s.find("FAIL") == std::string::npos);
    std::remove(out.c_str());
}
