#include "warpgrid/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "warpgrid/warp.hpp"

namespace warpgrid {

namespace {

int conv_out_extent(int in, int stride) { return (in - 1) / stride + 1; }  // k=3, pad=1

ImageBuffer to_image(const Tensor& t) {
    ImageBuffer im(t.channels, t.height, t.width);
    im.data = t.data;
    return im;
}

SamplingGrid to_grid(const Tensor& t) {
    if (t.channels != 2) throw std::invalid_argument("tape warp: grid tensor must have 2 channels");
    SamplingGrid g(t.height, t.width);
    g.coords = t.data;
    return g;
}

}  // namespace

Tape::NodeId Tape::push(Node n) {
    if (ran_backward_) throw std::logic_error("Tape: cannot grow after backward()");
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::input(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::NodeId Tape::parameter(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = true;
    return push(std::move(n));
}

Tape::NodeId Tape::conv2d(NodeId x, NodeId weight, NodeId bias, int stride) {
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
    const Tensor& xv = nodes_[x].value;
    const Tensor& wv = nodes_[weight].value;
    const Tensor& bv = nodes_[bias].value;
    if (wv.height != xv.channels || wv.width != 9)
        throw std::invalid_argument("conv2d: weight shape mismatch");
    if (bv.channels != wv.channels || bv.height != 1 || bv.width != 1)
        throw std::invalid_argument("conv2d: bias shape mismatch");

    const int oh = conv_out_extent(xv.height, stride);
    const int ow = conv_out_extent(xv.width, stride);
    Tensor out(wv.channels, oh, ow);
    for (int co = 0; co < wv.channels; ++co) {
        const float b = bv.data[co];
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b;
                for (int ci = 0; ci < xv.channels; ++ci) {
                    const float* kw = &wv.data[(static_cast<size_t>(co) * xv.channels + ci) * 9];
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy * stride + ky - 1;
                        if (iy < 0 || iy >= xv.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox * stride + kx - 1;
                            if (ix < 0 || ix >= xv.width) continue;
                            acc += kw[ky * 3 + kx] * xv.at(ci, iy, ix);
                        }
                    }
                }
                out.at(co, oy, ox) = static_cast<float>(acc);
            }
        }
    }
    Node n;
    n.op = Op::conv;
    n.value = std::move(out);
    n.a = x;
    n.b = weight;
    n.c = bias;
    n.stride = stride;
    n.needs_grad = nodes_[x].needs_grad || nodes_[weight].needs_grad || nodes_[bias].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::leaky_relu(NodeId x, float negative_slope) {
    Node n;
    n.op = Op::leaky_relu;
    n.value = nodes_[x].value;
    for (float& v : n.value.data)
        if (v < 0.0f) v *= negative_slope;
    n.a = x;
    n.alpha = negative_slope;
    n.needs_grad = nodes_[x].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::tanh_op(NodeId x) {
    Node n;
    n.op = Op::tanh_f;
    n.value = nodes_[x].value;
    for (float& v : n.value.data) v = std::tanh(v);
    n.a = x;
    n.needs_grad = nodes_[x].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::sigmoid_op(NodeId x) {
    Node n;
    n.op = Op::sigmoid_f;
    n.value = nodes_[x].value;
    for (float& v : n.value.data) v = 1.0f / (1.0f + std::exp(-v));
    n.a = x;
    n.needs_grad = nodes_[x].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::upsample_nearest2(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    Tensor out(xv.channels, xv.height * 2, xv.width * 2);
    for (int c = 0; c < xv.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int xx = 0; xx < out.width; ++xx)
                out.at(c, y, xx) = xv.at(c, y / 2, xx / 2);
    Node n;
    n.op = Op::upsample2;
    n.value = std::move(out);
    n.a = x;
    n.needs_grad = nodes_[x].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.size() != bv.size()) throw std::invalid_argument("add: shape mismatch");
    Node n;
    n.op = Op::add;
    n.value = av;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += bv.data[i];
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.size() != bv.size()) throw std::invalid_argument("mul: shape mismatch");
    Node n;
    n.op = Op::mul;
    n.value = av;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= bv.data[i];
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, float factor) {
    Node n;
    n.op = Op::scale;
    n.value = nodes_[a].value;
    for (float& v : n.value.data) v *= factor;
    n.a = a;
    n.alpha = factor;
    n.needs_grad = nodes_[a].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::concat_channels(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.height != bv.height || av.width != bv.width)
        throw std::invalid_argument("concat: spatial dims differ");
    Tensor out(av.channels + bv.channels, av.height, av.width);
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.data.size());
    Node n;
    n.op = Op::concat;
    n.value = std::move(out);
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::slice_channels(NodeId x, int first, int count) {
    const Tensor& xv = nodes_[x].value;
    if (first < 0 || count < 1 || first + count > xv.channels)
        throw std::invalid_argument("slice: channel range out of bounds");
    Tensor out(count, xv.height, xv.width);
    const size_t plane = static_cast<size_t>(xv.height) * xv.width;
    std::copy_n(xv.data.begin() + first * plane, count * plane, out.data.begin());
    Node n;
    n.op = Op::slice;
    n.value = std::move(out);
    n.a = x;
    n.c0 = first;
    n.c1 = count;
    n.needs_grad = nodes_[x].needs_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::warp(NodeId image, NodeId grid) {
    const ImageBuffer sampled = bilinear_sample(to_image(nodes_[image].value), to_grid(nodes_[grid].value));
    Tensor out(sampled.channels, sampled.height, sampled.width);
    out.data = sampled.data;
    Node n;
    n.op = Op::warp;
    n.value = std::move(out);
    n.a = image;
    n.b = grid;
    n.needs_grad = nodes_[image].needs_grad || nodes_[grid].needs_grad;
    return push(std::move(n));
}

void Tape::seed_gradient(NodeId id, const std::vector<float>& cotangent) {
    Node& n = nodes_[id];
    if (cotangent.size() != n.value.size())
        throw std::invalid_argument("seed_gradient: cotangent shape mismatch");
    ensure_grad(n);
    for (size_t i = 0; i < cotangent.size(); ++i) n.grad[i] += cotangent[i];
}

void Tape::backward() {
    ran_backward_ = true;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.empty() || n.op == Op::leaf) continue;
        const std::vector<float>& up = n.grad;

        switch (n.op) {
            case Op::conv: {
                Node& nx = nodes_[n.a];
                Node& nw = nodes_[n.b];
                Node& nb = nodes_[n.c];
                const Tensor& xv = nx.value;
                const Tensor& wv = nw.value;
                const bool gx = nx.needs_grad, gw = nw.needs_grad, gb = nb.needs_grad;
                if (gx) ensure_grad(nx);
                if (gw) ensure_grad(nw);
                if (gb) ensure_grad(nb);
                const Tensor& ov = n.value;
                for (int co = 0; co < ov.channels; ++co) {
                    for (int oy = 0; oy < ov.height; ++oy) {
                        for (int ox = 0; ox < ov.width; ++ox) {
                            const float g = up[(static_cast<size_t>(co) * ov.height + oy) * ov.width + ox];
                            if (g == 0.0f) continue;
                            if (gb) nb.grad[co] += g;
                            for (int ci = 0; ci < xv.channels; ++ci) {
                                const size_t wbase = (static_cast<size_t>(co) * xv.channels + ci) * 9;
                                for (int ky = 0; ky < 3; ++ky) {
                                    const int iy = oy * n.stride + ky - 1;
                                    if (iy < 0 || iy >= xv.height) continue;
                                    for (int kx = 0; kx < 3; ++kx) {
                                        const int ix = ox * n.stride + kx - 1;
                                        if (ix < 0 || ix >= xv.width) continue;
                                        if (gw) nw.grad[wbase + ky * 3 + kx] += g * xv.at(ci, iy, ix);
                                        if (gx)
                                            nx.grad[(static_cast<size_t>(ci) * xv.height + iy) * xv.width + ix] +=
                                                g * wv.data[wbase + ky * 3 + kx];
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
            case Op::leaky_relu: {
                Node& nx = nodes_[n.a];
                if (!nx.needs_grad) break;
                ensure_grad(nx);
                for (size_t i = 0; i < up.size(); ++i)
                    nx.grad[i] += nx.value.data[i] >= 0.0f ? up[i] : up[i] * n.alpha;
                break;
            }
            case Op::tanh_f: {
                Node& nx = nodes_[n.a];
                if (!nx.needs_grad) break;
                ensure_grad(nx);
                for (size_t i = 0; i < up.size(); ++i) {
                    const float t = n.value.data[i];
                    nx.grad[i] += up[i] * (1.0f - t * t);
                }
                break;
            }
            case Op::sigmoid_f: {
                Node& nx = nodes_[n.a];
                if (!nx.needs_grad) break;
                ensure_grad(nx);
                for (size_t i = 0; i < up.size(); ++i) {
                    const float s = n.value.data[i];
                    nx.grad[i] += up[i] * s * (1.0f - s);
                }
                break;
            }
            case Op::upsample2: {
                Node& nx = nodes_[n.a];
                if (!nx.needs_grad) break;
                ensure_grad(nx);
                const Tensor& ov = n.value;
                const Tensor& xv = nx.value;
                for (int c = 0; c < ov.channels; ++c)
                    for (int y = 0; y < ov.height; ++y)
                        for (int x = 0; x < ov.width; ++x)
                            nx.grad[(static_cast<size_t>(c) * xv.height + y / 2) * xv.width + x / 2] +=
                                up[(static_cast<size_t>(c) * ov.height + y) * ov.width + x];
                break;
            }
            case Op::add: {
                for (int side : {n.a, n.b}) {
                    Node& ns = nodes_[side];
                    if (!ns.needs_grad) continue;
                    ensure_grad(ns);
                    for (size_t i = 0; i < up.size(); ++i) ns.grad[i] += up[i];
                }
                break;
            }
            case Op::mul: {
                Node& na = nodes_[n.a];
                Node& nb = nodes_[n.b];
                if (na.needs_grad) {
                    ensure_grad(na);
                    for (size_t i = 0; i < up.size(); ++i) na.grad[i] += up[i] * nb.value.data[i];
                }
                if (nb.needs_grad) {
                    ensure_grad(nb);
                    for (size_t i = 0; i < up.size(); ++i) nb.grad[i] += up[i] * na.value.data[i];
                }
                break;
            }
            case Op::scale: {
                Node& nx = nodes_[n.a];
                if (!nx.needs_grad) break;
                ensure_grad(nx);
                for (size_t i = 0; i < up.size(); ++i) nx.grad[i] += up[i] * n.alpha;
                break;
            }
            case Op::concat: {
                Node& na = nodes_[n.a];
                Node& nb = nodes_[n.b];
                const size_t asz = na.value.size();
                if (na.needs_grad) {
                    ensure_grad(na);
                    for (size_t i = 0; i < asz; ++i) na.grad[i] += up[i];
                }
                if (nb.needs_grad) {
                    ensure_grad(nb);
                    for (size_t i = 0; i < nb.value.size(); ++i) nb.grad[i] += up[asz + i];
                }
                break;
            }
            case Op::slice: {
                Node& nx = nodes_[n.a];
                if (!nx.needs_grad) break;
                ensure_grad(nx);
                const size_t plane = static_cast<size_t>(nx.value.height) * nx.value.width;
                for (size_t i = 0; i < up.size(); ++i) nx.grad[n.c0 * plane + i] += up[i];
                break;
            }
            case Op::warp: {
                Node& nim = nodes_[n.a];
                Node& ngr = nodes_[n.b];
                ImageBuffer upstream(n.value.channels, n.value.height, n.value.width);
                upstream.data = up;
                const WarpGradients wg =
                    bilinear_sample_backward(to_image(nim.value), to_grid(ngr.value), upstream);
                if (nim.needs_grad) {
                    ensure_grad(nim);
                    for (size_t i = 0; i < wg.d_image.data.size(); ++i) nim.grad[i] += wg.d_image.data[i];
                }
                if (ngr.needs_grad) {
                    ensure_grad(ngr);
                    for (size_t i = 0; i < wg.d_grid.coords.size(); ++i) ngr.grad[i] += wg.d_grid.coords[i];
                }
                break;
            }
            case Op::leaf:
                break;
        }
    }
}

}  // namespace warpgrid
