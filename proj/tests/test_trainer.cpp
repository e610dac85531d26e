#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cascnn/autograd.hpp"
#include "cascnn/errors.hpp"
#include "cascnn/model.hpp"
#include "cascnn/trainer.hpp"

using namespace cascnn;
using namespace cascnn::train;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    for (float& v : t.data) v = dist(rng);
    return t;
}

double plain_mse(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = double(a.data[i]) - double(b.data[i]);
        acc += d * d;
    }
    return acc / double(a.data.size());
}

// Exact 2x2 block mean, the reference construction for the half/quarter/
// eighth-scale targets.
Tensor block_mean_2x2(const Tensor& t) {
    Tensor out({t.dim(0), t.dim(1), t.dim(2) / 2, t.dim(3) / 2});
    for (int n = 0; n < out.dim(0); ++n)
        for (int c = 0; c < out.dim(1); ++c)
            for (int h = 0; h < out.dim(2); ++h)
                for (int w = 0; w < out.dim(3); ++w)
                    out.at(n, c, h, w) = (t.at(n, c, 2 * h, 2 * w) + t.at(n, c, 2 * h, 2 * w + 1) +
                                          t.at(n, c, 2 * h + 1, 2 * w) + t.at(n, c, 2 * h + 1, 2 * w + 1)) / 4.0f;
    return out;
}

Dataset tiny_dataset(int n_train, int n_val, int size, uint64_t seed) {
    Dataset d;
    for (int i = 0; i < n_train + n_val; ++i) {
        Sample s;
        s.reference = random_tensor({1, 1, size, size}, seed + 101 * uint64_t(i));
        s.distorted = random_tensor({1, 1, size, size}, seed + 101 * uint64_t(i) + 7);
        // Keep the pair correlated so there is signal to learn.
        for (size_t k = 0; k < s.distorted.data.size(); ++k)
            s.distorted.data[k] = 0.8f * s.reference.data[k] + 0.2f * s.distorted.data[k];
        (i < n_train ? d.train : d.val).push_back(std::move(s));
    }
    return d;
}

}  // namespace

TEST_CASE("make_ms_references produces exact block means at all four scales") {
    Tensor ref = random_tensor({1, 1, 16, 16}, 42);
    auto refs = make_ms_references(ref);
    CHECK(refs[0].shape == std::vector<int>{1, 1, 16, 16});
    CHECK(refs[1].shape == std::vector<int>{1, 1, 8, 8});
    CHECK(refs[2].shape == std::vector<int>{1, 1, 4, 4});
    CHECK(refs[3].shape == std::vector<int>{1, 1, 2, 2});

    CHECK(refs[0].data == ref.data);  // full scale is the reference itself
    Tensor half = block_mean_2x2(ref);
    Tensor quarter = block_mean_2x2(half);
    Tensor eighth = block_mean_2x2(quarter);
    for (size_t i = 0; i < half.data.size(); ++i)
        CHECK(refs[1].data[i] == doctest::Approx(half.data[i]).epsilon(1e-6));
    for (size_t i = 0; i < quarter.data.size(); ++i)
        CHECK(refs[2].data[i] == doctest::Approx(quarter.data[i]).epsilon(1e-6));
    for (size_t i = 0; i < eighth.data.size(); ++i)
        CHECK(refs[3].data[i] == doctest::Approx(eighth.data[i]).epsilon(1e-6));
}

TEST_CASE("ms_loss equals the arithmetic mean of four per-scale MSEs") {
    CasCnnModel model = CasCnnModel::build(1, 8);
    model.init_weights(7);
    Tensor x = random_tensor({1, 1, 16, 16}, 5);
    Tensor ref = random_tensor({1, 1, 16, 16}, 6);

    Tape tape;
    auto in = tape.leaf(x);
    auto out = model.forward(tape, in);
    auto targets = make_ms_references(ref);
    std::array<Tape::NodeId, 4> tnodes{tape.leaf(targets[0]), tape.leaf(targets[1]),
                                       tape.leaf(targets[2]), tape.leaf(targets[3])};
    auto loss = ms_loss(tape, out, tnodes);

    double expect = (plain_mse(tape.value(out.y_full), targets[0]) +
                     plain_mse(tape.value(out.y_half), targets[1]) +
                     plain_mse(tape.value(out.y_quarter), targets[2]) +
                     plain_mse(tape.value(out.y_eighth), targets[3])) / 4.0;
    CHECK(double(tape.value(loss).data[0]) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("output_loss equals the MSE of the full-resolution head alone") {
    CasCnnModel model = CasCnnModel::build(1, 8);
    model.init_weights(8);
    Tensor x = random_tensor({1, 1, 8, 8}, 9);
    Tensor ref = random_tensor({1, 1, 8, 8}, 10);

    Tape tape;
    auto out = model.forward(tape, tape.leaf(x));
    auto loss = output_loss(tape, out, tape.leaf(ref));
    CHECK(double(tape.value(loss).data[0]) ==
          doctest::Approx(plain_mse(tape.value(out.y_full), ref)).epsilon(1e-5));
}

TEST_CASE("adam single step matches the closed-form update") {
    // After one step: m_hat = g, v_hat = g*g, so
    // delta = -lr * g / (|g| + eps), i.e. almost exactly -lr * sign(g).
    Tensor p({4}, {1.0f, -2.0f, 3.0f, 0.5f});
    Tensor g({4}, {2.0f, -4.0f, 0.5f, 1.0f});
    Tensor before = p;
    std::vector<Tensor*> params{&p};
    AdamState adam(params);
    adam.step(params, {&g}, 0.1f);
    for (int i = 0; i < 4; ++i) {
        float gi = g.data[size_t(i)];
        float expect = before.data[size_t(i)] - 0.1f * gi / (std::abs(gi) + 1e-8f);
        CHECK(p.data[size_t(i)] == doctest::Approx(expect).epsilon(1e-6));
    }
    CHECK(adam.steps() == 1);
}

TEST_CASE("adam step with zero gradients is a no-op") {
    Tensor p = random_tensor({8}, 3, -1.0f, 1.0f);
    Tensor before = p;
    Tensor zero({8});
    std::vector<Tensor*> params{&p};
    AdamState adam(params);
    for (int s = 0; s < 3; ++s) adam.step(params, {&zero}, 0.5f);
    CHECK(p.data == before.data);  // moments stay zero, update stays zero
}

TEST_CASE("adam treats tensors independently: identical grads give identical updates") {
    Tensor a({3}, {0.2f, -0.7f, 1.4f});
    Tensor b = a;
    Tensor g({3}, {0.9f, -0.1f, 0.3f});
    std::vector<Tensor*> params{&a, &b};
    AdamState adam(params);
    adam.step(params, {&g, &g}, 0.05f);
    adam.step(params, {&g, &g}, 0.05f);
    CHECK(a.data == b.data);
}

TEST_CASE("training loss on a fixed minibatch decreases within 10 steps (>=95% of 20 seeds)") {
    int ok = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        CasCnnModel model = CasCnnModel::build(1, 8);
        model.init_weights(seed);
        Tensor x = random_tensor({2, 1, 16, 16}, 1000 + seed);
        Tensor ref = random_tensor({2, 1, 16, 16}, 2000 + seed);
        auto targets = make_ms_references(ref);

        auto params = model.parameters();
        AdamState adam(params);
        double first = 0.0, last = 0.0;
        for (int step = 0; step < 10; ++step) {
            Tape tape;
            auto bind = model.forward_bound(tape, tape.leaf(x));
            std::array<Tape::NodeId, 4> tn{tape.leaf(targets[0]), tape.leaf(targets[1]),
                                           tape.leaf(targets[2]), tape.leaf(targets[3])};
            auto loss = ms_loss(tape, bind.out, tn);
            tape.backward(loss);
            double l = tape.value(loss).data[0];
            if (step == 0) first = l;
            last = l;
            std::vector<const Tensor*> grads;
            for (auto id : bind.param_nodes) grads.push_back(&tape.grad(id));
            adam.step(params, grads, 1e-3f);
        }
        if (last < first) ++ok;
    }
    CHECK(ok >= 19);
}

TEST_CASE("train: identical seeds give identical epoch logs") {
    Dataset data = tiny_dataset(4, 2, 16, 77);
    TrainConfig cfg;
    cfg.phase = Phase::MultiScale;
    cfg.batch = 2;
    cfg.epochs = 3;
    cfg.lr = 1e-3f;
    cfg.seed = 11;

    auto run = [&]() {
        CasCnnModel model = CasCnnModel::build(1, 8);
        model.init_weights(123);
        return train::train(model, data, cfg);
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].epoch == b[i].epoch);
        CHECK(a[i].train_loss == b[i].train_loss);  // bit-exact determinism
        CHECK(a[i].val_loss == b[i].val_loss);
    }
}

TEST_CASE("train: epoch logs are complete and strictly monotone in epoch index") {
    Dataset data = tiny_dataset(4, 2, 16, 99);
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.epochs = 4;
    cfg.lr = 1e-3f;
    cfg.seed = 5;
    CasCnnModel model = CasCnnModel::build(1, 8);
    model.init_weights(55);
    auto logs = train::train(model, data, cfg);
    REQUIRE(logs.size() == 4);
    for (size_t i = 0; i < logs.size(); ++i) {
        CHECK(logs[i].epoch == int(i) + 1);
        CHECK(std::isfinite(logs[i].train_loss));
        CHECK(std::isfinite(logs[i].val_loss));
        CHECK(logs[i].seconds >= 0.0);
    }
}

TEST_CASE("train rejects an empty dataset") {
    Dataset empty;
    TrainConfig cfg;
    CasCnnModel model = CasCnnModel::build(1, 8);
    model.init_weights(1);
    CHECK_THROWS_AS(train::train(model, empty, cfg), ConfigError);
}

TEST_CASE("non-finite loss aborts with a diagnostic naming the step") {
    Dataset data = tiny_dataset(2, 1, 8, 13);
    TrainConfig cfg;
    cfg.batch = 2;
    cfg.epochs = 1;
    cfg.lr = 1e-3f;
    CasCnnModel model = CasCnnModel::build(1, 8);
    model.init_weights(2);
    // Poison one weight so the forward pass overflows float32.
    model.layer("A1").weight.fill(1e30f);
    try {
        train::train(model, data, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        std::string msg = e.what();
        CHECK(msg.find("epoch") != std::string::npos);
        CHECK(msg.find("step") != std::string::npos);
    }
}

TEST_CASE("phase 2 warm-started from phase 1 does not worsen validation loss") {
    Dataset data = tiny_dataset(6, 3, 16, 31);
    CasCnnModel model = CasCnnModel::build(1, 8);
    model.init_weights(9);

    TrainConfig p1;
    p1.phase = Phase::MultiScale;
    p1.batch = 3;
    p1.epochs = 6;
    p1.lr = 1e-3f;
    p1.seed = 21;
    auto logs1 = train::train(model, data, p1);
    REQUIRE(logs1.size() <= 6);
    double val1 = validation_output_mse(model, data.val);

    TrainConfig p2 = p1;
    p2.phase = Phase::OutputOnly;
    p2.epochs = 6;
    p2.seed = 22;
    train::train(model, data, p2);
    double val2 = validation_output_mse(model, data.val);
    CHECK(val2 <= val1 + 1e-12);
}

TEST_CASE("write_epoch_csv emits the documented header and one row per epoch") {
    std::vector<EpochLog> logs{{1, Phase::MultiScale, 0.5, 0.4, 1.25},
                               {2, Phase::OutputOnly, 0.3, 0.2, 1.5}};
    std::string path = "epochs_test.csv";
    write_epoch_csv(logs, path);
    std::ifstream is(path);
    REQUIRE(bool(is));
    std::string line;
    std::getline(is, line);
    CHECK(line == "epoch,phase,train_loss,val_loss,seconds");
    std::getline(is, line);
    CHECK(line.rfind("1,multi-scale,", 0) == 0);
    std::getline(is, line);
    CHECK(line.rfind("2,output-only,", 0) == 0);
    is.close();
    std::remove(path.c_str());
}
