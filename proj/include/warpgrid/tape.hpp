#pragma once

#include <vector>

#include "warpgrid/types.hpp"

namespace warpgrid {

// Plain C x H x W float tensor used by the tape.
struct Tensor {
    int channels = 0, height = 0, width = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

    float at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
    size_t size() const { return data.size(); }
};

// Reverse-mode tape over a small operator set: convolution, pointwise
// nonlinearities, nearest upsampling, bilinear warping and arithmetic.
// Build a fresh tape per step; parameters live outside and are copied in.
class Tape {
public:
    using NodeId = int;

    NodeId input(Tensor value);      // leaf without gradient
    NodeId parameter(Tensor value);  // leaf with gradient

    // 3x3 convolution, zero padding 1, stride 1 or 2.
    // weight: (out_ch, in_ch, 9); bias: (out_ch, 1, 1).
    NodeId conv2d(NodeId x, NodeId weight, NodeId bias, int stride);

    NodeId leaky_relu(NodeId x, float negative_slope = 0.1f);
    NodeId tanh_op(NodeId x);
    NodeId sigmoid_op(NodeId x);
    NodeId upsample_nearest2(NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);  // elementwise
    NodeId scale(NodeId a, float factor);
    NodeId concat_channels(NodeId a, NodeId b);
    NodeId slice_channels(NodeId x, int first, int count);
    // image: (C,H,W); grid: (2,Ho,Wo) normalized coordinates -> (C,Ho,Wo).
    NodeId warp(NodeId image, NodeId grid);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    // Accumulates a cotangent at a node; call backward() once afterwards.
    void seed_gradient(NodeId id, const std::vector<float>& cotangent);
    void backward();
    const std::vector<float>& gradient(NodeId id) const { return nodes_[id].grad; }

private:
    enum class Op {
        leaf, conv, leaky_relu, tanh_f, sigmoid_f, upsample2, add, mul, scale, concat, slice, warp
    };
    struct Node {
        Op op = Op::leaf;
        Tensor value;
        std::vector<float> grad;
        int a = -1, b = -1, c = -1;
        int stride = 1;
        float alpha = 0.0f;
        int c0 = 0, c1 = 0;
        bool needs_grad = false;
    };

    NodeId push(Node n);
    void ensure_grad(Node& n) { if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0f); }

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace warpgrid
