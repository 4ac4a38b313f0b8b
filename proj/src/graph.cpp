#include "sptm/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sptm {

namespace {

#if defined(__GLIBC__)
// Tape buffers are tens of MB and are allocated/freed once per batch. With
// default thresholds glibc serves them via mmap/munmap, so every batch pays
// page-fault plus zeroing costs that dwarf the arithmetic. Keep such blocks
// on the heap for reuse.
const bool malloc_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
}();
#endif

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap map2d(const Tensor& t) {
    return ConstMap(t.data(), t.dim(0), t.dim(1));
}

MutMap map2d_mut(Tensor& t) {
    return MutMap(t.data(), t.dim(0), t.dim(1));
}

struct ConvDims {
    int batch, cin, cout, h, w;
    int hp, wp;          // padded spatial dims
    std::int64_t plane;  // hp * wp
};

ConvDims conv_dims(const Tensor& in, const Tensor& k) {
    if (k.rank() != 4 || k.dim(2) != 3 || k.dim(3) != 3) {
        throw std::invalid_argument("conv2d: kernel must be [C_out,C_in,3,3]");
    }
    ConvDims d{};
    if (in.rank() == 3) {
        d.batch = 1;
        d.cin = in.dim(0);
        d.h = in.dim(1);
        d.w = in.dim(2);
    } else if (in.rank() == 4) {
        d.batch = in.dim(0);
        d.cin = in.dim(1);
        d.h = in.dim(2);
        d.w = in.dim(3);
    } else {
        throw std::invalid_argument("conv2d: input must be rank 3 or 4");
    }
    if (k.dim(1) != d.cin) {
        throw std::invalid_argument("conv2d: channel mismatch between input and kernel");
    }
    d.cout = k.dim(0);
    d.hp = d.h + 2;
    d.wp = d.w + 2;
    d.plane = static_cast<std::int64_t>(d.hp) * d.wp;
    return d;
}

/// Copy [B,C,H,W] planes into zero-padded [B,C,H+2,W+2] slabs.
void pad_planes(const double* src, double* dst, const ConvDims& d, int channels) {
    std::memset(dst, 0, sizeof(double) * static_cast<std::size_t>(d.batch) * channels * d.plane);
    for (int b = 0; b < d.batch; ++b) {
        for (int c = 0; c < channels; ++c) {
            const double* sp = src + (static_cast<std::int64_t>(b) * channels + c) * d.h * d.w;
            double* dp = dst + (static_cast<std::int64_t>(b) * channels + c) * d.plane;
            for (int y = 0; y < d.h; ++y) {
                std::memcpy(dp + (y + 1) * static_cast<std::int64_t>(d.wp) + 1,
                            sp + y * static_cast<std::int64_t>(d.w), sizeof(double) * d.w);
            }
        }
    }
}

/// dst[y][x] += sum over the 9 taps of kp[dy*3+dx] * src_pad[y+dy][x+dx].
/// One fused pass so every output row is streamed once per channel pair.
inline void conv_tap9_accum(const double* kp, const double* __restrict src_pad,
                            double* __restrict dst, int h, int w, int wp) {
    double k0 = kp[0], k1 = kp[1], k2 = kp[2];
    double k3 = kp[3], k4 = kp[4], k5 = kp[5];
    double k6 = kp[6], k7 = kp[7], k8 = kp[8];
    for (int y = 0; y < h; ++y) {
        const double* r0 = src_pad + static_cast<std::int64_t>(y) * wp;
        const double* r1 = r0 + wp;
        const double* r2 = r1 + wp;
        double* o = dst + static_cast<std::int64_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            o[x] += k0 * r0[x] + k1 * r0[x + 1] + k2 * r0[x + 2] +
                    k3 * r1[x] + k4 * r1[x + 1] + k5 * r1[x + 2] +
                    k6 * r2[x] + k7 * r2[x + 1] + k8 * r2[x + 2];
        }
    }
}

/// kg[dy*3+dx] += sum over (y,x) of g[y][x] * src_pad[y+dy][x+dx].
inline void conv_tap9_dot(const double* __restrict g, const double* __restrict src_pad,
                          double* kg, int h, int w, int wp) {
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
    for (int y = 0; y < h; ++y) {
        const double* r0 = src_pad + static_cast<std::int64_t>(y) * wp;
        const double* r1 = r0 + wp;
        const double* r2 = r1 + wp;
        const double* gr = g + static_cast<std::int64_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double gv = gr[x];
            a0 += gv * r0[x];
            a1 += gv * r0[x + 1];
            a2 += gv * r0[x + 2];
            a3 += gv * r1[x];
            a4 += gv * r1[x + 1];
            a5 += gv * r1[x + 2];
            a6 += gv * r2[x];
            a7 += gv * r2[x + 1];
            a8 += gv * r2[x + 2];
        }
    }
    kg[0] += a0; kg[1] += a1; kg[2] += a2;
    kg[3] += a3; kg[4] += a4; kg[5] += a5;
    kg[6] += a6; kg[7] += a7; kg[8] += a8;
}

}  // namespace

Var Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Graph::Node& Graph::node(Var v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        throw std::invalid_argument("Graph: invalid node handle");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Var v) const {
    return const_cast<Graph*>(this)->node(v);
}

void Graph::ensure_grad(Node& n) {
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
}

bool Graph::any_requires(std::initializer_list<Var> vs) const {
    for (Var v : vs) {
        if (node(v).requires_grad) return true;
    }
    return false;
}

Var Graph::input(Tensor value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Graph::param(Tensor value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    Node n;
    n.op = Op::Add;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires({a, b});
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    Node n;
    n.op = Op::Sub;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires({a, b});
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::relu(Var x) {
    const Tensor& xv = node(x).value;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    Node n;
    n.op = Op::Relu;
    n.inputs = {x.id};
    n.requires_grad = node(x).requires_grad;
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::soft_threshold(Var x, Var theta) {
    const Tensor& xv = node(x).value;
    const Tensor& tv = node(theta).value;
    if (tv.size() != 1) throw std::invalid_argument("soft_threshold: theta must be scalar");
    double th = tv[0];
    if (th < 0.0) throw std::invalid_argument("soft_threshold: theta must be nonnegative");
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        double a = std::abs(xv[i]) - th;
        out[i] = a > 0.0 ? (xv[i] > 0.0 ? a : -a) : 0.0;
    }
    Node n;
    n.op = Op::SoftThreshold;
    n.inputs = {x.id, theta.id};
    n.requires_grad = any_requires({x, theta});
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::scale(Var x, Var s) {
    const Tensor& xv = node(x).value;
    const Tensor& sv = node(s).value;
    if (sv.size() != 1) throw std::invalid_argument("scale: scale factor must be scalar");
    double c = sv[0];
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = c * xv[i];
    Node n;
    n.op = Op::Scale;
    n.inputs = {x.id, s.id};
    n.requires_grad = any_requires({x, s});
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::mul_const(Var x, double c) {
    const Tensor& xv = node(x).value;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = c * xv[i];
    Node n;
    n.op = Op::MulConst;
    n.inputs = {x.id};
    n.requires_grad = node(x).requires_grad;
    n.c = c;
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::matmul(Var a, Var b, bool trans_a, bool trans_b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (av.rank() != 2 || bv.rank() != 2) throw std::invalid_argument("matmul: rank-2 tensors required");
    int m = trans_a ? av.dim(1) : av.dim(0);
    int ka = trans_a ? av.dim(0) : av.dim(1);
    int kb = trans_b ? bv.dim(1) : bv.dim(0);
    int p = trans_b ? bv.dim(0) : bv.dim(1);
    if (ka != kb) {
        throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                    Tensor::shape_str(av.shape()) + " vs " + Tensor::shape_str(bv.shape()));
    }
    Tensor out({m, p});
    auto A = map2d(av);
    auto B = map2d(bv);
    auto C = map2d_mut(out);
    if (!trans_a && !trans_b)      C.noalias() = A * B;
    else if (trans_a && !trans_b)  C.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b)  C.noalias() = A * B.transpose();
    else                           C.noalias() = A.transpose() * B.transpose();
    Node n;
    n.op = Op::Matmul;
    n.inputs = {a.id, b.id};
    n.requires_grad = any_requires({a, b});
    n.trans_a = trans_a;
    n.trans_b = trans_b;
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::conv2d(Var in, Var kernel) {
    const Tensor& iv = node(in).value;
    const Tensor& kv = node(kernel).value;
    ConvDims d = conv_dims(iv, kv);

    auto pad = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(d.batch) * d.cin * d.plane);
    pad_planes(iv.data(), pad->data(), d, d.cin);

    std::vector<int> oshape = iv.rank() == 3 ? std::vector<int>{d.cout, d.h, d.w}
                                             : std::vector<int>{d.batch, d.cout, d.h, d.w};
    Tensor out(oshape);
    for (int b = 0; b < d.batch; ++b) {
        for (int co = 0; co < d.cout; ++co) {
            double* o = out.data() + (static_cast<std::int64_t>(b) * d.cout + co) * d.h * d.w;
            for (int ci = 0; ci < d.cin; ++ci) {
                const double* ip = pad->data() + (static_cast<std::int64_t>(b) * d.cin + ci) * d.plane;
                const double* kp = kv.data() + (static_cast<std::int64_t>(co) * d.cin + ci) * 9;
                conv_tap9_accum(kp, ip, o, d.h, d.w, d.wp);
            }
        }
    }

    Node n;
    n.op = Op::Conv2d;
    n.inputs = {in.id, kernel.id};
    n.requires_grad = any_requires({in, kernel});
    n.aux = std::move(pad);  // kept for the backward pass
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::reshape(Var x, std::vector<int> shape) {
    const Tensor& xv = node(x).value;
    if (Tensor::count(shape) != xv.size()) throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(std::move(shape));
    std::memcpy(out.data(), xv.data(), sizeof(double) * static_cast<std::size_t>(xv.size()));
    Node n;
    n.op = Op::Reshape;
    n.inputs = {x.id};
    n.requires_grad = node(x).requires_grad;
    n.value = std::move(out);
    return push(std::move(n));
}

Var Graph::sum(Var x) {
    const Tensor& xv = node(x).value;
    double acc = 0.0;
    for (std::int64_t i = 0; i < xv.size(); ++i) acc += xv[i];
    Node n;
    n.op = Op::Sum;
    n.inputs = {x.id};
    n.requires_grad = node(x).requires_grad;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

Var Graph::sum_squares(Var x) {
    const Tensor& xv = node(x).value;
    double acc = 0.0;
    for (std::int64_t i = 0; i < xv.size(); ++i) acc += xv[i] * xv[i];
    Node n;
    n.op = Op::SumSquares;
    n.inputs = {x.id};
    n.requires_grad = node(x).requires_grad;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

void Graph::backward(Var loss) {
    Node& l = node(loss);
    if (l.value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    ensure_grad(l);
    l.grad[0] += 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty() || n.inputs.empty() || !n.requires_grad) continue;
        backward_node(id);
        // Consume the slot once propagated so a later backward() on this
        // tape only adds the new loss's contribution. Leaf grads persist.
        n.grad = Tensor();
    }
}

void Graph::backward_node(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = n.grad;
    auto in = [&](int i) -> Node& { return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(i)])]; };

    switch (n.op) {
        case Op::Add: {
            for (int i = 0; i < 2; ++i) {
                Node& a = in(i);
                if (!a.requires_grad) continue;
                ensure_grad(a);
                for (std::int64_t q = 0; q < g.size(); ++q) a.grad[q] += g[q];
            }
            break;
        }
        case Op::Sub: {
            Node& a = in(0);
            Node& b = in(1);
            if (a.requires_grad) {
                ensure_grad(a);
                for (std::int64_t q = 0; q < g.size(); ++q) a.grad[q] += g[q];
            }
            if (b.requires_grad) {
                ensure_grad(b);
                for (std::int64_t q = 0; q < g.size(); ++q) b.grad[q] -= g[q];
            }
            break;
        }
        case Op::Relu: {
            Node& a = in(0);
            if (!a.requires_grad) break;
            ensure_grad(a);
            for (std::int64_t q = 0; q < g.size(); ++q)
                if (a.value[q] > 0.0) a.grad[q] += g[q];
            break;
        }
        case Op::SoftThreshold: {
            Node& a = in(0);
            Node& t = in(1);
            double th = t.value[0];
            if (a.requires_grad) {
                ensure_grad(a);
                for (std::int64_t q = 0; q < g.size(); ++q)
                    if (std::abs(a.value[q]) > th) a.grad[q] += g[q];
            }
            if (t.requires_grad) {
                ensure_grad(t);
                double acc = 0.0;
                for (std::int64_t q = 0; q < g.size(); ++q) {
                    double x = a.value[q];
                    if (std::abs(x) > th) acc += x > 0.0 ? -g[q] : g[q];
                }
                t.grad[0] += acc;
            }
            break;
        }
        case Op::Scale: {
            Node& a = in(0);
            Node& s = in(1);
            double c = s.value[0];
            if (a.requires_grad) {
                ensure_grad(a);
                for (std::int64_t q = 0; q < g.size(); ++q) a.grad[q] += c * g[q];
            }
            if (s.requires_grad) {
                ensure_grad(s);
                double acc = 0.0;
                for (std::int64_t q = 0; q < g.size(); ++q) acc += a.value[q] * g[q];
                s.grad[0] += acc;
            }
            break;
        }
        case Op::MulConst: {
            Node& a = in(0);
            if (!a.requires_grad) break;
            ensure_grad(a);
            for (std::int64_t q = 0; q < g.size(); ++q) a.grad[q] += n.c * g[q];
            break;
        }
        case Op::Matmul: {
            Node& a = in(0);
            Node& b = in(1);
            auto G = map2d(g);
            auto A = map2d(a.value);
            auto B = map2d(b.value);
            if (a.requires_grad) {
                ensure_grad(a);
                auto GA = map2d_mut(a.grad);
                // dM = G * op(B)^T, with M = op(A)
                if (!n.trans_a) {
                    if (!n.trans_b) GA.noalias() += G * B.transpose();
                    else            GA.noalias() += G * B;
                } else {
                    if (!n.trans_b) GA.noalias() += B * G.transpose();
                    else            GA.noalias() += B.transpose() * G.transpose();
                }
            }
            if (b.requires_grad) {
                ensure_grad(b);
                auto GB = map2d_mut(b.grad);
                // dP = op(A)^T * G, with P = op(B)
                if (!n.trans_b) {
                    if (!n.trans_a) GB.noalias() += A.transpose() * G;
                    else            GB.noalias() += A * G;
                } else {
                    if (!n.trans_a) GB.noalias() += G.transpose() * A;
                    else            GB.noalias() += G.transpose() * A.transpose();
                }
            }
            break;
        }
        case Op::Conv2d: {
            Node& a = in(0);
            Node& k = in(1);
            ConvDims d = conv_dims(a.value, k.value);
            // embed the output gradient into a padded slab once
            std::vector<double> gopad(static_cast<std::size_t>(d.batch) * d.cout * d.plane, 0.0);
            {
                ConvDims od = d;  // same spatial dims, cout channels
                pad_planes(g.data(), gopad.data(), od, d.cout);
            }
            const std::vector<double>& pad = *n.aux;
            if (a.requires_grad) {
                ensure_grad(a);
                for (int b = 0; b < d.batch; ++b) {
                    for (int ci = 0; ci < d.cin; ++ci) {
                        double* gp = a.grad.data() + (static_cast<std::int64_t>(b) * d.cin + ci) * d.h * d.w;
                        for (int co = 0; co < d.cout; ++co) {
                            const double* go = gopad.data() + (static_cast<std::int64_t>(b) * d.cout + co) * d.plane;
                            const double* kp = k.value.data() + (static_cast<std::int64_t>(co) * d.cin + ci) * 9;
                            // din = correlation of dout with the flipped kernel
                            double kflip[9];
                            for (int t = 0; t < 9; ++t) kflip[t] = kp[8 - t];
                            conv_tap9_accum(kflip, go, gp, d.h, d.w, d.wp);
                        }
                    }
                }
            }
            if (k.requires_grad) {
                ensure_grad(k);
                for (int b = 0; b < d.batch; ++b) {
                    for (int co = 0; co < d.cout; ++co) {
                        const double* go = g.data() + (static_cast<std::int64_t>(b) * d.cout + co) * d.h * d.w;
                        for (int ci = 0; ci < d.cin; ++ci) {
                            double* kg = k.grad.data() + (static_cast<std::int64_t>(co) * d.cin + ci) * 9;
                            const double* ip = pad.data() + (static_cast<std::int64_t>(b) * d.cin + ci) * d.plane;
                            conv_tap9_dot(go, ip, kg, d.h, d.w, d.wp);
                        }
                    }
                }
            }
            break;
        }
        case Op::Reshape: {
            Node& a = in(0);
            if (!a.requires_grad) break;
            ensure_grad(a);
            for (std::int64_t q = 0; q < g.size(); ++q) a.grad[q] += g[q];
            break;
        }
        case Op::Sum: {
            Node& a = in(0);
            if (!a.requires_grad) break;
            ensure_grad(a);
            double gv = g[0];
            for (std::int64_t q = 0; q < a.grad.size(); ++q) a.grad[q] += gv;
            break;
        }
        case Op::SumSquares: {
            Node& a = in(0);
            if (!a.requires_grad) break;
            ensure_grad(a);
            double gv = 2.0 * g[0];
            for (std::int64_t q = 0; q < a.grad.size(); ++q) a.grad[q] += gv * a.value[q];
            break;
        }
        case Op::Leaf:
            break;
    }
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

Tensor Graph::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) return Tensor::zeros(n.value.shape());
    return n.grad;
}

}  // namespace sptm
