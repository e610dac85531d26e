#include "cascnn/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace cascnn {

namespace {

int scaled(int base, int num, int den) {
    int64_t v = int64_t(base) * num;
    if (v % den != 0 || v / den < 1)
        throw ConfigError("width multiplier " + std::to_string(num) + "/" +
                          std::to_string(den) + " does not divide channel count " +
                          std::to_string(base));
    return static_cast<int>(v / den);
}

}  // namespace

CasCnnModel CasCnnModel::build(int width_num, int width_den) {
    if (width_num < 1 || width_den < 1)
        throw ConfigError("width multiplier must be positive");
    CasCnnModel m;
    m.width_num_ = width_num;
    m.width_den_ = width_den;
    int c128 = scaled(128, width_num, width_den);
    int c256 = scaled(256, width_num, width_den);
    int cat_q = 2 * c256 + 1;  // up_D features + C2 skip + upsampled 1/8 head
    int cat_h = 2 * c128 + 1;  // same pattern at 1/2 and full resolution

    using K = LayerSpec::Kind;
    m.specs_ = {
        {"A1", K::Conv, 1, c128, 3, 1},
        {"A2", K::Conv, c128, c128, 3, 1},
        {"B1", K::Conv, c128, c128, 3, 1},
        {"B2", K::Conv, c128, c128, 3, 1},
        {"C1", K::Conv, c128, c256, 3, 1},
        {"C2", K::Conv, c256, c256, 3, 1},
        {"D1", K::Conv, c256, c256, 3, 1},
        {"D2", K::Conv, c256, c256, 3, 1},
        {"up_D", K::FullConv, c256, c256, 4, 2},
        {"head_D", K::Conv, c256, 1, 3, 1},
        {"up_C", K::FullConv, cat_q, c128, 4, 2},
        {"head_C", K::Conv, cat_q, 1, 3, 1},
        {"up_B", K::FullConv, cat_h, c128, 4, 2},
        {"head_B", K::Conv, cat_h, 1, 3, 1},
        {"head_A", K::Conv, cat_h, 1, 3, 1},
    };
    m.params_.resize(m.specs_.size());
    for (size_t i = 0; i < m.specs_.size(); ++i) {
        const LayerSpec& s = m.specs_[i];
        LayerParams& p = m.params_[i];
        if (s.kind == K::Conv)
            p.weight = Tensor({s.out_ch, s.in_ch, 3, 3});
        else
            p.weight = Tensor({s.in_ch, s.out_ch, 4, 4});
        p.bias = Tensor({s.out_ch});
        p.slope = Tensor({s.out_ch});
    }
    return m;
}

void CasCnnModel::init_weights(uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](float bound) {
        // 53-bit mantissa draw mapped to (-bound, bound); avoids the
        // implementation-defined behaviour of uniform_real_distribution.
        double u = double(rng() >> 11) * (1.0 / 9007199254740992.0);
        return static_cast<float>((2.0 * u - 1.0) * bound);
    };
    for (size_t i = 0; i < specs_.size(); ++i) {
        // Unit-gain uniform init: bound sqrt(3/fan_in) gives weight variance
        // 1/fan_in, so pre-activation variance is preserved layer to layer.
        // Fan-in counts every input unit a single output unit sees (kernel
        // support times input channels); a channels-only fan-in makes the
        // initial activations grow ~sqrt(3)x per layer, which stalls
        // optimisation on this 15-layer graph.
        double fan_in = double(specs_[i].in_ch) * specs_[i].kernel * specs_[i].kernel;
        float bound = static_cast<float>(std::sqrt(3.0 / fan_in));
        for (float& v : params_[i].weight.data) v = uniform(bound);
        for (float& v : params_[i].bias.data) v = uniform(bound);
        params_[i].slope.fill(0.25f);
    }
}

std::vector<Tensor*> CasCnnModel::parameters() {
    std::vector<Tensor*> out;
    for (LayerParams& p : params_) {
        out.push_back(&p.weight);
        out.push_back(&p.bias);
        out.push_back(&p.slope);
    }
    return out;
}

std::vector<const Tensor*> CasCnnModel::parameters() const {
    std::vector<const Tensor*> out;
    for (const LayerParams& p : params_) {
        out.push_back(&p.weight);
        out.push_back(&p.bias);
        out.push_back(&p.slope);
    }
    return out;
}

std::vector<std::string> CasCnnModel::parameter_names() const {
    std::vector<std::string> out;
    for (const LayerSpec& s : specs_) {
        out.push_back(s.name + ".w");
        out.push_back(s.name + ".b");
        out.push_back(s.name + ".slope");
    }
    return out;
}

const CasCnnModel::LayerParams& CasCnnModel::layer(const std::string& name) const {
    for (size_t i = 0; i < specs_.size(); ++i)
        if (specs_[i].name == name) return params_[i];
    throw Error("unknown layer: " + name);
}

CasCnnModel::LayerParams& CasCnnModel::layer(const std::string& name) {
    for (size_t i = 0; i < specs_.size(); ++i)
        if (specs_[i].name == name) return params_[i];
    throw Error("unknown layer: " + name);
}

MultiScaleOutput CasCnnModel::wire(Tape& tape, Tape::NodeId input,
                                   const std::vector<Tape::NodeId>& pn) const {
    auto idx = [this](const std::string& name) -> size_t {
        for (size_t i = 0; i < specs_.size(); ++i)
            if (specs_[i].name == name) return i;
        throw Error("unknown layer: " + name);
    };
    // Applies layer i (conv or fullconv) followed by its PReLU.
    auto run = [&](const std::string& name, Tape::NodeId x) {
        size_t i = idx(name);
        Tape::NodeId w = pn[3 * i], b = pn[3 * i + 1], a = pn[3 * i + 2];
        Tape::NodeId y = specs_[i].kind == LayerSpec::Kind::Conv
                             ? tape.conv2d(x, w, b)
                             : tape.transposed_conv2d(x, w, b);
        return tape.prelu(y, a);
    };

    Tape::NodeId a2 = run("A2", run("A1", input));
    Tape::NodeId b2 = run("B2", run("B1", tape.avg_pool_2x2(a2)));
    Tape::NodeId c2 = run("C2", run("C1", tape.avg_pool_2x2(b2)));
    Tape::NodeId d2 = run("D2", run("D1", tape.avg_pool_2x2(c2)));

    Tape::NodeId du = run("up_D", d2);                       // 1/4 res features
    Tape::NodeId y8 = run("head_D", d2);                     // 1/8 res output
    Tape::NodeId cat_q = tape.concat_channels({du, c2, tape.upsample_nearest_2x(y8)});
    Tape::NodeId cu = run("up_C", cat_q);                    // 1/2 res features
    Tape::NodeId y4 = run("head_C", cat_q);                  // 1/4 res output
    Tape::NodeId cat_h = tape.concat_channels({cu, b2, tape.upsample_nearest_2x(y4)});
    Tape::NodeId bu = run("up_B", cat_h);                    // full res features
    Tape::NodeId y2 = run("head_B", cat_h);                  // 1/2 res output
    Tape::NodeId cat_f = tape.concat_channels({bu, a2, tape.upsample_nearest_2x(y2)});
    Tape::NodeId y1 = run("head_A", cat_f);                  // full res output

    return {y1, y2, y4, y8};
}

CasCnnModel::Binding CasCnnModel::forward_bound(Tape& tape, Tape::NodeId input) const {
    const Tensor& x = tape.value(input);
    if (x.rank() != 4 || x.dim(1) != 1)
        throw ShapeError("model input must be [N,1,H,W], got " +
                         Tensor::shape_str(x.shape));
    if (x.dim(2) % 8 != 0 || x.dim(3) % 8 != 0)
        throw ShapeError("model input spatial dims must be divisible by 8, got " +
                         Tensor::shape_str(x.shape) + "; pad the image first");
    Binding b;
    for (const LayerParams& p : params_) {
        b.param_nodes.push_back(tape.leaf(p.weight, true));
        b.param_nodes.push_back(tape.leaf(p.bias, true));
        b.param_nodes.push_back(tape.leaf(p.slope, true));
    }
    b.out = wire(tape, input, b.param_nodes);
    return b;
}

MultiScaleOutput CasCnnModel::forward(Tape& tape, Tape::NodeId input) const {
    return forward_bound(tape, input).out;
}

std::vector<CasCnnModel::ParamCount> CasCnnModel::count_params() const {
    std::vector<ParamCount> out;
    for (size_t i = 0; i < specs_.size(); ++i) {
        int64_t w = params_[i].weight.numel();
        out.push_back({specs_[i].name, w,
                       w + params_[i].bias.numel() + params_[i].slope.numel()});
    }
    return out;
}

int64_t CasCnnModel::total_weights() const {
    int64_t t = 0;
    for (const LayerParams& p : params_) t += p.weight.numel();
    return t;
}

// ---------------------------------------------------------------------------
// Checkpoint format: "CASC", u32 version, u32 tensor count, then per tensor
// u16 name length + name, u8 rank, u32 dims, raw f32 little-endian data.

namespace {

constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointTruncatedError("checkpoint file truncated");
    return v;
}

}  // namespace

void CasCnnModel::save_checkpoint(const std::string& path) const {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os.write("CASC", 4);
        write_raw(os, kCheckpointVersion);
        auto names = parameter_names();
        auto params = parameters();
        write_raw(os, static_cast<uint32_t>(params.size()));
        for (size_t i = 0; i < params.size(); ++i) {
            const Tensor& t = *params[i];
            write_raw(os, static_cast<uint16_t>(names[i].size()));
            os.write(names[i].data(), static_cast<std::streamsize>(names[i].size()));
            write_raw(os, static_cast<uint8_t>(t.rank()));
            for (int d : t.shape) write_raw(os, static_cast<uint32_t>(d));
            os.write(reinterpret_cast<const char*>(t.data.data()),
                     static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        }
        if (!os) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + path);
}

namespace {

struct RawTensor {
    std::string name;
    Tensor tensor;
};

std::vector<RawTensor> read_all_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "CASC")
        throw CheckpointError("not a CASC checkpoint: " + path);
    uint32_t version = read_raw<uint32_t>(is);
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                     " unsupported (expected " +
                                     std::to_string(kCheckpointVersion) + ")");
    uint32_t count = read_raw<uint32_t>(is);
    std::vector<RawTensor> out;
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t nlen = read_raw<uint16_t>(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        if (!is) throw CheckpointTruncatedError("checkpoint file truncated");
        uint8_t rank = read_raw<uint8_t>(is);
        std::vector<int> shape;
        for (uint8_t d = 0; d < rank; ++d)
            shape.push_back(static_cast<int>(read_raw<uint32_t>(is)));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!is) throw CheckpointTruncatedError("checkpoint file truncated");
        out.push_back({std::move(name), std::move(t)});
    }
    return out;
}

}  // namespace

void CasCnnModel::load_params(const std::string& path) {
    auto raw = read_all_tensors(path);
    auto names = parameter_names();
    auto params = parameters();
    for (size_t i = 0; i < names.size(); ++i) {
        const RawTensor* found = nullptr;
        for (const RawTensor& rt : raw)
            if (rt.name == names[i]) { found = &rt; break; }
        if (!found)
            throw CheckpointError("checkpoint is missing tensor " + names[i]);
        if (found->tensor.shape != params[i]->shape)
            throw CheckpointShapeError(
                "checkpoint tensor " + names[i] + " has shape " +
                Tensor::shape_str(found->tensor.shape) + ", expected " +
                Tensor::shape_str(params[i]->shape));
        *params[i] = found->tensor;
    }
}

CasCnnModel CasCnnModel::load_checkpoint(const std::string& path) {
    auto raw = read_all_tensors(path);
    // Infer the width multiplier from A1's output channel count.
    int c128 = -1;
    for (const RawTensor& rt : raw)
        if (rt.name == "A1.w") c128 = rt.tensor.dim(0);
    if (c128 < 1)
        throw CheckpointError("checkpoint is missing layer A1.w");
    CasCnnModel m = build(c128, 128);
    m.load_params(path);
    return m;
}

}  // namespace cascnn
