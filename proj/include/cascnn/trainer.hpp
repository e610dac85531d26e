#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cascnn/model.hpp"

// Two-phase optimization: multi-scale loss first, then output-only loss
// for fine-tuning, both with Adam and per-epoch CSV logging.

namespace cascnn::train {

enum class Phase { MultiScale, OutputOnly };

struct TrainConfig {
    Phase phase = Phase::MultiScale;
    int batch = 20;
    int epochs = 1;
    float lr = 1e-4f;
    int plateau_patience = 5;    // halve lr when val loss stalls this long
    int converge_patience = 10;  // phase 1 stops after this many epochs
    double converge_rtol = 1e-3; // ... without a 0.1% relative improvement
    uint64_t seed = 0;
    int checkpoint_every = 0;    // epochs between checkpoints; 0 disables
    std::string checkpoint_path; // written when checkpoint_every > 0
};

struct EpochLog {
    int epoch = 0;
    Phase phase = Phase::MultiScale;
    double train_loss = 0.0;
    double val_loss = 0.0;  // output-only MSE in both phases
    double seconds = 0.0;
};

struct Sample {
    Tensor distorted;  // [1,1,H,W]
    Tensor reference;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> val;
};

// Adam with bias correction; moment tensors mirror the parameter shapes.
class AdamState {
public:
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;

    explicit AdamState(const std::vector<Tensor*>& params);
    void step(const std::vector<Tensor*>& params,
              const std::vector<const Tensor*>& grads, float lr);
    int64_t steps() const { return t_; }

private:
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    int64_t t_ = 0;
};

// Exact block means of the reference at 1, 1/2, 1/4 and 1/8 resolution.
std::array<Tensor, 4> make_ms_references(const Tensor& ref);

// Unweighted mean of the four per-scale MSEs.
Tape::NodeId ms_loss(Tape& tape, const MultiScaleOutput& out,
                     const std::array<Tape::NodeId, 4>& refs);
// MSE of the full-resolution head only.
Tape::NodeId output_loss(Tape& tape, const MultiScaleOutput& out,
                         Tape::NodeId ref_full);

// Output-only MSE over a sample list (the validation metric in both phases).
double validation_output_mse(const CasCnnModel& model, const std::vector<Sample>& samples);

// Runs one training phase; updates the model in place.
std::vector<EpochLog> train(CasCnnModel& model, const Dataset& data,
                            const TrainConfig& cfg);

// CSV: epoch,phase,train_loss,val_loss,seconds.
void write_epoch_csv(const std::vector<EpochLog>& logs, const std::string& path);

}  // namespace cascnn::train
