#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cascnn/autograd.hpp"
#include "cascnn/tensor.hpp"

namespace cascnn {

struct LayerSpec {
    enum class Kind { Conv, FullConv };
    std::string name;
    Kind kind;
    int in_ch;
    int out_ch;
    int kernel;   // 3 for conv, 4 for fullconv
    int stride;   // 1 for conv, 2 for fullconv
};

// Outputs of the four decoder heads, full resolution down to 1/8.
struct MultiScaleOutput {
    Tape::NodeId y_full;
    Tape::NodeId y_half;
    Tape::NodeId y_quarter;
    Tape::NodeId y_eighth;
};

// The 12-layer encoder/decoder with hierarchical skip connections and
// four per-scale reconstruction heads. A width multiplier (num/den)
// shrinks every hidden channel count proportionally for desk-scale runs;
// 1-channel heads and the 1-channel input stay fixed.
class CasCnnModel {
public:
    struct LayerParams {
        Tensor weight;
        Tensor bias;
        Tensor slope;  // PReLU, one entry per output channel
    };

    static CasCnnModel build(int width_num = 1, int width_den = 1);

    // Uniform init from (-1/sqrt(n_in), 1/sqrt(n_in)) per layer; PReLU
    // slopes 0.25. Deterministic for a fixed seed.
    void init_weights(uint64_t seed);

    // Binds all parameters as gradient-tracked leaves on the tape and runs
    // the forward wiring. Input must be [N,1,H,W] with H, W divisible by 8.
    MultiScaleOutput forward(Tape& tape, Tape::NodeId input) const;

    // Node ids of the bound parameter leaves from the last forward() on
    // the given tape, in (weight, bias, slope) per-layer order. Used by the
    // trainer to read gradients back.
    struct Binding {
        MultiScaleOutput out;
        std::vector<Tape::NodeId> param_nodes;  // aligned with parameters()
    };
    Binding forward_bound(Tape& tape, Tape::NodeId input) const;

    struct ParamCount {
        std::string layer;
        int64_t weights;
        int64_t total;  // weights + bias + slopes
    };
    std::vector<ParamCount> count_params() const;
    int64_t total_weights() const;

    void save_checkpoint(const std::string& path) const;
    // Reads a checkpoint and infers the width multiplier from it.
    static CasCnnModel load_checkpoint(const std::string& path);
    // Loads into this model's existing shapes; throws CheckpointShapeError
    // naming the first mismatching tensor.
    void load_params(const std::string& path);

    const std::vector<LayerSpec>& specs() const { return specs_; }
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;
    int width_num() const { return width_num_; }
    int width_den() const { return width_den_; }

    const LayerParams& layer(const std::string& name) const;
    LayerParams& layer(const std::string& name);

private:
    MultiScaleOutput wire(Tape& tape, Tape::NodeId input,
                          const std::vector<Tape::NodeId>& pnodes) const;

    std::vector<LayerSpec> specs_;
    std::vector<LayerParams> params_;
    int width_num_ = 1;
    int width_den_ = 1;
};

}  // namespace cascnn
