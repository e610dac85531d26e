#include "cascnn/autograd.hpp"

#include <utility>

#include "cascnn/kernels.hpp"

namespace cascnn {

Tape::NodeId Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, {});
}

const Tensor& Tape::grad(NodeId id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty())
        throw Error("no gradient recorded for node " + std::to_string(id) +
                    " (did you call backward?)");
    return n.grad;
}

namespace {
void check_4d(const Tensor& t, const char* what) {
    if (t.rank() != 4)
        throw ShapeError(std::string(what) + " must be rank 4, got " +
                         Tensor::shape_str(t.shape));
}
}  // namespace

Tape::NodeId Tape::conv2d(NodeId input, NodeId weight, NodeId bias) {
    const Tensor& x = value(input);
    const Tensor& w = value(weight);
    const Tensor& b = value(bias);
    check_4d(x, "conv2d input");
    check_4d(w, "conv2d weight");
    if (w.dim(2) != 3 || w.dim(3) != 3)
        throw ShapeError("conv2d kernel must be 3x3, got " + Tensor::shape_str(w.shape));
    if (x.dim(1) != w.dim(1))
        throw ShapeError("conv2d channel mismatch: input " + Tensor::shape_str(x.shape) +
                         " vs weight " + Tensor::shape_str(w.shape));
    if (b.rank() != 1 || b.dim(0) != w.dim(0))
        throw ShapeError("conv2d bias must be [Cout], got " + Tensor::shape_str(b.shape));

    int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3), Co = w.dim(0);
    Tensor out({N, Co, H, W});
    kernels::conv2d(x.data.data(), w.data.data(), b.data.data(), out.data.data(),
                    N, Ci, Co, H, W);
    bool rg = requires_grad(input) || requires_grad(weight) || requires_grad(bias);
    NodeId id = push(std::move(out), rg, {});
    nodes_.back().back = [input, weight, bias, id, N, Ci, Co, H, W](Tape& t) {
        const float* g = t.grad_buf(id).data.data();
        if (t.requires_grad(input))
            kernels::conv2d_grad_input(g, t.value(weight).data.data(),
                                       t.grad_buf(input).data.data(), N, Ci, Co, H, W);
        if (t.requires_grad(weight) || t.requires_grad(bias))
            kernels::conv2d_grad_params(
                t.value(input).data.data(), g,
                t.requires_grad(weight) ? t.grad_buf(weight).data.data() : nullptr,
                t.requires_grad(bias) ? t.grad_buf(bias).data.data() : nullptr,
                N, Ci, Co, H, W);
    };
    return id;
}

Tape::NodeId Tape::transposed_conv2d(NodeId input, NodeId weight, NodeId bias) {
    const Tensor& x = value(input);
    const Tensor& w = value(weight);
    const Tensor& b = value(bias);
    check_4d(x, "transposed_conv2d input");
    check_4d(w, "transposed_conv2d weight");
    if (w.dim(2) != 4 || w.dim(3) != 4)
        throw ShapeError("transposed_conv2d kernel must be 4x4, got " +
                         Tensor::shape_str(w.shape));
    if (x.dim(1) != w.dim(0))
        throw ShapeError("transposed_conv2d channel mismatch: input " +
                         Tensor::shape_str(x.shape) + " vs weight " +
                         Tensor::shape_str(w.shape));
    if (b.rank() != 1 || b.dim(0) != w.dim(1))
        throw ShapeError("transposed_conv2d bias must be [Cout], got " +
                         Tensor::shape_str(b.shape));

    int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3), Co = w.dim(1);
    Tensor out({N, Co, 2 * H, 2 * W});
    kernels::tconv2d(x.data.data(), w.data.data(), b.data.data(), out.data.data(),
                     N, Ci, Co, H, W);
    bool rg = requires_grad(input) || requires_grad(weight) || requires_grad(bias);
    NodeId id = push(std::move(out), rg, {});
    nodes_.back().back = [input, weight, bias, id, N, Ci, Co, H, W](Tape& t) {
        const float* g = t.grad_buf(id).data.data();
        if (t.requires_grad(input))
            kernels::tconv2d_grad_input(g, t.value(weight).data.data(),
                                        t.grad_buf(input).data.data(), N, Ci, Co, H, W);
        if (t.requires_grad(weight) || t.requires_grad(bias))
            kernels::tconv2d_grad_params(
                t.value(input).data.data(), g,
                t.requires_grad(weight) ? t.grad_buf(weight).data.data() : nullptr,
                t.requires_grad(bias) ? t.grad_buf(bias).data.data() : nullptr,
                N, Ci, Co, H, W);
    };
    return id;
}

Tape::NodeId Tape::avg_pool_2x2(NodeId input) {
    const Tensor& x = value(input);
    check_4d(x, "avg_pool_2x2 input");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("avg_pool_2x2 needs even spatial dims, got " +
                         Tensor::shape_str(x.shape));
    Tensor out({N, C, H / 2, W / 2});
    kernels::avg_pool_2x2(x.data.data(), out.data.data(), N, C, H, W);
    NodeId id = push(std::move(out), requires_grad(input), {});
    nodes_.back().back = [input, id, N, C, H, W](Tape& t) {
        if (t.requires_grad(input))
            kernels::avg_pool_2x2_grad(t.grad_buf(id).data.data(),
                                       t.grad_buf(input).data.data(), N, C, H, W);
    };
    return id;
}

Tape::NodeId Tape::upsample_nearest_2x(NodeId input) {
    const Tensor& x = value(input);
    check_4d(x, "upsample_nearest_2x input");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor out({N, C, 2 * H, 2 * W});
    kernels::upsample_nearest_2x(x.data.data(), out.data.data(), N, C, H, W);
    NodeId id = push(std::move(out), requires_grad(input), {});
    nodes_.back().back = [input, id, N, C, H, W](Tape& t) {
        if (t.requires_grad(input))
            kernels::upsample_nearest_2x_grad(t.grad_buf(id).data.data(),
                                              t.grad_buf(input).data.data(), N, C, H, W);
    };
    return id;
}

Tape::NodeId Tape::concat_channels(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels needs at least one part");
    const Tensor& first = value(parts[0]);
    check_4d(first, "concat_channels input");
    int N = first.dim(0), H = first.dim(2), W = first.dim(3);
    int Ctot = 0;
    bool rg = false;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        check_4d(t, "concat_channels input");
        if (t.dim(0) != N || t.dim(2) != H || t.dim(3) != W) {
            std::string msg = "concat_channels spatial mismatch:";
            for (NodeId q : parts) msg += " " + Tensor::shape_str(value(q).shape);
            throw ShapeError(msg);
        }
        Ctot += t.dim(1);
        rg = rg || requires_grad(p);
    }
    Tensor out({N, Ctot, H, W});
    int64_t plane = int64_t(H) * W;
    int coff = 0;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        int C = t.dim(1);
        for (int n = 0; n < N; ++n)
            std::copy_n(t.data.data() + int64_t(n) * C * plane, int64_t(C) * plane,
                        out.data.data() + (int64_t(n) * Ctot + coff) * plane);
        coff += C;
    }
    std::vector<NodeId> ps = parts;
    NodeId id = push(std::move(out), rg, {});
    nodes_.back().back = [ps, id, N, Ctot, plane](Tape& t) {
        const Tensor& g = t.grad_buf(id);
        int coff = 0;
        for (NodeId p : ps) {
            int C = t.value(p).dim(1);
            if (t.requires_grad(p)) {
                Tensor& gi = t.grad_buf(p);
                for (int n = 0; n < N; ++n) {
                    const float* src = g.data.data() + (int64_t(n) * Ctot + coff) * plane;
                    float* dst = gi.data.data() + int64_t(n) * C * plane;
                    for (int64_t i = 0; i < int64_t(C) * plane; ++i) dst[i] += src[i];
                }
            }
            coff += C;
        }
    };
    return id;
}

Tape::NodeId Tape::prelu(NodeId input, NodeId slope) {
    const Tensor& x = value(input);
    const Tensor& a = value(slope);
    check_4d(x, "prelu input");
    if (a.rank() != 1 || a.dim(0) != x.dim(1))
        throw ShapeError("prelu slope length " + Tensor::shape_str(a.shape) +
                         " does not match channel count of " + Tensor::shape_str(x.shape));
    int N = x.dim(0), C = x.dim(1);
    int64_t HW = int64_t(x.dim(2)) * x.dim(3);
    Tensor out(x.shape);
    kernels::prelu(x.data.data(), a.data.data(), out.data.data(), N, C, HW);
    bool rg = requires_grad(input) || requires_grad(slope);
    NodeId id = push(std::move(out), rg, {});
    nodes_.back().back = [input, slope, id, N, C, HW](Tape& t) {
        kernels::prelu_grad(
            t.value(input).data.data(), t.value(slope).data.data(),
            t.grad_buf(id).data.data(),
            t.requires_grad(input) ? t.grad_buf(input).data.data() : nullptr,
            t.requires_grad(slope) ? t.grad_buf(slope).data.data() : nullptr,
            N, C, HW);
    };
    return id;
}

Tape::NodeId Tape::mse(NodeId pred, NodeId ref) {
    const Tensor& p = value(pred);
    const Tensor& r = value(ref);
    if (!p.same_shape(r))
        throw ShapeError("mse shape mismatch: " + Tensor::shape_str(p.shape) + " vs " +
                         Tensor::shape_str(r.shape));
    int64_t n = p.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double d = double(p.data[i]) - double(r.data[i]);
        acc += d * d;
    }
    Tensor out({1});
    out.data[0] = static_cast<float>(acc / double(n));
    bool rg = requires_grad(pred) || requires_grad(ref);
    NodeId id = push(std::move(out), rg, {});
    nodes_.back().back = [pred, ref, id, n](Tape& t) {
        float g = t.grad_buf(id).data[0];
        const Tensor& p = t.value(pred);
        const Tensor& r = t.value(ref);
        float c = 2.0f * g / float(n);
        if (t.requires_grad(pred)) {
            float* gp = t.grad_buf(pred).data.data();
            for (int64_t i = 0; i < n; ++i) gp[i] += c * (p.data[i] - r.data[i]);
        }
        if (t.requires_grad(ref)) {
            float* gr = t.grad_buf(ref).data.data();
            for (int64_t i = 0; i < n; ++i) gr[i] -= c * (p.data[i] - r.data[i]);
        }
    };
    return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (!x.same_shape(y))
        throw ShapeError("add shape mismatch: " + Tensor::shape_str(x.shape) + " vs " +
                         Tensor::shape_str(y.shape));
    Tensor out(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] + y.data[i];
    bool rg = requires_grad(a) || requires_grad(b);
    NodeId id = push(std::move(out), rg, {});
    nodes_.back().back = [a, b, id](Tape& t) {
        const Tensor& g = t.grad_buf(id);
        for (NodeId p : {a, b})
            if (t.requires_grad(p)) {
                float* gp = t.grad_buf(p).data.data();
                for (int64_t i = 0; i < g.numel(); ++i) gp[i] += g.data[i];
            }
    };
    return id;
}

Tape::NodeId Tape::scale(NodeId a, float factor) {
    const Tensor& x = value(a);
    Tensor out(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] * factor;
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_.back().back = [a, id, factor](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad_buf(id);
        float* gp = t.grad_buf(a).data.data();
        for (int64_t i = 0; i < g.numel(); ++i) gp[i] += factor * g.data[i];
    };
    return id;
}

Tape::NodeId Tape::sum(NodeId a) {
    const Tensor& x = value(a);
    double acc = 0.0;
    for (float v : x.data) acc += v;
    Tensor out({1});
    out.data[0] = static_cast<float>(acc);
    NodeId id = push(std::move(out), requires_grad(a), {});
    nodes_.back().back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        float g = t.grad_buf(id).data[0];
        for (float& v : t.grad_buf(a).data) v += g;
    };
    return id;
}

void Tape::backward(NodeId loss) {
    Node& ln = nodes_[static_cast<size_t>(loss)];
    if (ln.value.numel() != 1)
        throw ShapeError("backward requires a scalar loss, got " +
                         Tensor::shape_str(ln.value.shape));
    for (Node& n : nodes_)
        if (n.requires_grad) {
            n.grad = Tensor(n.value.shape);  // zero-initialized
        }
    if (!ln.requires_grad)
        throw Error("backward called on a loss that depends on no gradient-tracked leaf");
    ln.grad.data[0] = 1.0f;
    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.requires_grad && n.back) n.back(*this);
    }
}

}  // namespace cascnn
