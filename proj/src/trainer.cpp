#include "cascnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "cascnn/kernels.hpp"

namespace cascnn::train {

AdamState::AdamState(const std::vector<Tensor*>& params) {
    for (const Tensor* p : params) {
        m_.emplace_back(p->shape);
        v_.emplace_back(p->shape);
    }
}

void AdamState::step(const std::vector<Tensor*>& params,
                     const std::vector<const Tensor*>& grads, float lr) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw Error("adam_step: parameter/gradient set misaligned with state");
    ++t_;
    float bc1 = 1.0f - std::pow(beta1, float(t_));
    float bc2 = 1.0f - std::pow(beta2, float(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.same_shape(g))
            throw ShapeError("adam_step: gradient shape " + Tensor::shape_str(g.shape) +
                             " does not match parameter " + Tensor::shape_str(p.shape));
        float* m = m_[i].data.data();
        float* v = v_[i].data.data();
        for (int64_t j = 0; j < p.numel(); ++j) {
            float gj = g.data[j];
            m[j] = beta1 * m[j] + (1.0f - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0f - beta2) * gj * gj;
            float mhat = m[j] / bc1;
            float vhat = v[j] / bc2;
            p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::array<Tensor, 4> make_ms_references(const Tensor& ref) {
    if (ref.rank() != 4)
        throw ShapeError("make_ms_references expects [N,1,H,W], got " +
                         Tensor::shape_str(ref.shape));
    if (ref.dim(2) % 8 != 0 || ref.dim(3) % 8 != 0)
        throw ShapeError("make_ms_references needs H,W divisible by 8, got " +
                         Tensor::shape_str(ref.shape));
    std::array<Tensor, 4> out;
    out[0] = ref;
    for (int s = 1; s < 4; ++s) {
        const Tensor& prev = out[s - 1];
        int N = prev.dim(0), C = prev.dim(1), H = prev.dim(2), W = prev.dim(3);
        out[s] = Tensor({N, C, H / 2, W / 2});
        kernels::avg_pool_2x2(prev.data.data(), out[s].data.data(), N, C, H, W);
    }
    return out;
}

Tape::NodeId ms_loss(Tape& tape, const MultiScaleOutput& out,
                     const std::array<Tape::NodeId, 4>& refs) {
    Tape::NodeId l1 = tape.mse(out.y_full, refs[0]);
    Tape::NodeId l2 = tape.mse(out.y_half, refs[1]);
    Tape::NodeId l3 = tape.mse(out.y_quarter, refs[2]);
    Tape::NodeId l4 = tape.mse(out.y_eighth, refs[3]);
    return tape.scale(tape.add(tape.add(l1, l2), tape.add(l3, l4)), 0.25f);
}

Tape::NodeId output_loss(Tape& tape, const MultiScaleOutput& out,
                         Tape::NodeId ref_full) {
    return tape.mse(out.y_full, ref_full);
}

namespace {

// Stacks per-sample [1,1,H,W] tensors into one [B,1,H,W] batch.
Tensor stack(const std::vector<Sample>& samples, const std::vector<size_t>& idx,
             size_t lo, size_t hi, bool distorted) {
    const Tensor& first = distorted ? samples[idx[lo]].distorted : samples[idx[lo]].reference;
    int H = first.dim(2), W = first.dim(3);
    Tensor out({int(hi - lo), 1, H, W});
    int64_t plane = int64_t(H) * W;
    for (size_t i = lo; i < hi; ++i) {
        const Tensor& s = distorted ? samples[idx[i]].distorted : samples[idx[i]].reference;
        if (s.dim(2) != H || s.dim(3) != W)
            throw ShapeError("dataset patches must share one size");
        std::copy_n(s.data.data(), plane, out.data.data() + int64_t(i - lo) * plane);
    }
    return out;
}

}  // namespace

double validation_output_mse(const CasCnnModel& model, const std::vector<Sample>& samples) {
    double acc = 0.0;
    for (const Sample& s : samples) {
        Tape tape;
        Tape::NodeId in = tape.leaf(s.distorted, false);
        MultiScaleOutput out = model.forward(tape, in);
        Tape::NodeId ref = tape.leaf(s.reference, false);
        Tape::NodeId l = tape.mse(out.y_full, ref);
        acc += tape.value(l).data[0];
    }
    return samples.empty() ? 0.0 : acc / double(samples.size());
}

std::vector<EpochLog> train(CasCnnModel& model, const Dataset& data,
                            const TrainConfig& cfg) {
    if (data.train.empty()) throw ConfigError("train: empty training set");
    if (cfg.batch < 1 || cfg.epochs < 1)
        throw ConfigError("train: batch and epochs must be >= 1");

    std::vector<Tensor*> params = model.parameters();
    AdamState adam(params);
    float lr = cfg.lr;
    std::mt19937_64 rng(cfg.seed);  // shuffle rng owned by the driver

    std::vector<size_t> idx(data.train.size());
    std::iota(idx.begin(), idx.end(), size_t(0));

    std::vector<EpochLog> logs;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_improve = 0;
    int epochs_since_plateau = 0;

    // Keep the best-validation parameter snapshot; restored at phase end so
    // a phase never returns a model worse than its warm start.
    std::vector<Tensor> best_params;
    double best_model_val = std::numeric_limits<double>::infinity();
    auto snapshot = [&]() {
        best_params.clear();
        for (const Tensor* p : params) best_params.push_back(*p);
    };
    if (!data.val.empty()) {
        best_model_val = validation_output_mse(model, data.val);
        snapshot();
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::shuffle(idx.begin(), idx.end(), rng);

        double loss_sum = 0.0;
        int batches = 0;
        for (size_t lo = 0; lo < idx.size(); lo += size_t(cfg.batch)) {
            size_t hi = std::min(idx.size(), lo + size_t(cfg.batch));
            Tensor bx = stack(data.train, idx, lo, hi, true);
            Tensor by = stack(data.train, idx, lo, hi, false);

            Tape tape;
            Tape::NodeId in = tape.leaf(std::move(bx), false);
            CasCnnModel::Binding bind = model.forward_bound(tape, in);

            Tape::NodeId loss;
            if (cfg.phase == Phase::MultiScale) {
                auto refs = make_ms_references(by);
                std::array<Tape::NodeId, 4> rn{
                    tape.leaf(std::move(refs[0]), false), tape.leaf(std::move(refs[1]), false),
                    tape.leaf(std::move(refs[2]), false), tape.leaf(std::move(refs[3]), false)};
                loss = ms_loss(tape, bind.out, rn);
            } else {
                loss = output_loss(tape, bind.out, tape.leaf(std::move(by), false));
            }
            double lv = tape.value(loss).data[0];
            if (!std::isfinite(lv))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   ", step " + std::to_string(adam.steps() + 1));
            loss_sum += lv;
            ++batches;

            tape.backward(loss);
            std::vector<const Tensor*> grads;
            grads.reserve(bind.param_nodes.size());
            for (Tape::NodeId p : bind.param_nodes) grads.push_back(&tape.grad(p));
            adam.step(params, grads, lr);
        }

        double val = validation_output_mse(model, data.val);
        auto t1 = std::chrono::steady_clock::now();
        EpochLog log;
        log.epoch = epoch + 1;
        log.phase = cfg.phase;
        log.train_loss = loss_sum / double(batches);
        log.val_loss = val;
        log.seconds = std::chrono::duration<double>(t1 - t0).count();
        logs.push_back(log);

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            (epoch + 1) % cfg.checkpoint_every == 0)
            model.save_checkpoint(cfg.checkpoint_path);

        if (!data.val.empty()) {
            if (val < best_model_val) {
                best_model_val = val;
                snapshot();
            }
            if (val < best_val * (1.0 - cfg.converge_rtol)) {
                best_val = val;
                epochs_since_improve = 0;
                epochs_since_plateau = 0;
            } else {
                best_val = std::min(best_val, val);
                ++epochs_since_improve;
                ++epochs_since_plateau;
            }
            if (epochs_since_plateau >= cfg.plateau_patience) {
                lr *= 0.5f;
                epochs_since_plateau = 0;
            }
            if (cfg.phase == Phase::MultiScale &&
                epochs_since_improve >= cfg.converge_patience)
                break;
        }
    }
    if (!best_params.empty())
        for (size_t i = 0; i < params.size(); ++i) *params[i] = best_params[i];
    return logs;
}

void write_epoch_csv(const std::vector<EpochLog>& logs, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << "epoch,phase,train_loss,val_loss,seconds\n";
        for (const EpochLog& l : logs) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d,%s,%.8g,%.8g,%.3f\n", l.epoch,
                          l.phase == Phase::MultiScale ? "multi-scale" : "output-only",
                          l.train_loss, l.val_loss, l.seconds);
            os << buf;
        }
        if (!os) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + path);
}

}  // namespace cascnn::train
