#pragma once

#include <functional>
#include <vector>

#include "cascnn/tensor.hpp"

namespace cascnn {

// Reverse-mode tape. Every operation appends a node recording its output
// value and a backward closure; node ids are topologically ordered by
// construction, so backward() is a single reverse sweep. Gradients
// accumulate additively where a value fans out to several consumers.
class Tape {
public:
    using NodeId = int;

    NodeId leaf(Tensor value, bool requires_grad = false);

    // input [N,Ci,H,W], weight [Co,Ci,3,3], bias [Co]; zero padding 1.
    NodeId conv2d(NodeId input, NodeId weight, NodeId bias);
    // input [N,Ci,H,W], weight [Ci,Co,4,4], bias [Co]; stride 2, padding 1,
    // output [N,Co,2H,2W].
    NodeId transposed_conv2d(NodeId input, NodeId weight, NodeId bias);
    NodeId avg_pool_2x2(NodeId input);
    NodeId upsample_nearest_2x(NodeId input);
    NodeId concat_channels(const std::vector<NodeId>& parts);
    // slope: 1-D tensor, one entry per channel.
    NodeId prelu(NodeId input, NodeId slope);
    // Mean over all elements of (pred - ref)^2; scalar output.
    NodeId mse(NodeId pred, NodeId ref);
    NodeId add(NodeId a, NodeId b);          // elementwise, same shape
    NodeId scale(NodeId a, float factor);
    NodeId sum(NodeId a);                    // scalar sum of all elements

    // Reverse sweep from a scalar loss node.
    void backward(NodeId loss);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& grad(NodeId id) const;
    bool requires_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;                         // allocated lazily in backward()
        bool requires_grad = false;
        std::function<void(Tape&)> back;     // empty for leaves
    };

    NodeId push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Tensor& grad_buf(NodeId id) { return nodes_[static_cast<size_t>(id)].grad; }

    std::vector<Node> nodes_;
};

}  // namespace cascnn
