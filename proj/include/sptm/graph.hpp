#pragma once

#include <memory>
#include <vector>

#include "sptm/tensor.hpp"

namespace sptm {

/// Handle to a node in a Graph.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over Tensor operations.
///
/// Forward calls append nodes; backward() walks the tape in reverse and
/// accumulates gradients into per-node slots. A leaf created with
/// param() is trainable; input() leaves are constants. Recording and
/// backward are single-threaded per graph; gradients are deterministic
/// (fixed traversal and reduction order).
///
/// conv2d uses the cross-correlation convention (no kernel flip), 3x3
/// kernels, zero padding 1, no bias. Documented once here; everything
/// downstream assumes it.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // leaves
    Var input(Tensor value);
    Var param(Tensor value);

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var relu(Var x);
    /// soft(x, theta) = sgn(x) * max(0, |x| - theta); theta is a scalar
    /// node, theta >= 0. Subgradient 0 inside the dead zone and at kinks.
    Var soft_threshold(Var x, Var theta);
    /// y = s * x with s a scalar node.
    Var scale(Var x, Var s);
    /// y = c * x with a compile-time constant.
    Var mul_const(Var x, double c);

    // linear algebra
    /// C = op(A) * op(B); op transposes when the flag is set. A and B are
    /// rank-2 tensors.
    Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
    /// input [C_in,H,W] or [B,C_in,H,W]; kernel [C_out,C_in,3,3];
    /// output spatial dims preserved.
    Var conv2d(Var in, Var kernel);

    // shape & reductions
    Var reshape(Var x, std::vector<int> shape);
    Var sum(Var x);
    Var sum_squares(Var x);

    /// Accumulates leaf gradients for `loss`, which must be scalar.
    /// Calling backward for several losses on the same graph sums their
    /// leaf gradients; interior gradient slots are consumed per pass.
    void backward(Var loss);

    const Tensor& value(Var v) const;
    /// Zero tensor (of the node's shape) when no gradient reached it.
    Tensor grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        Leaf, Add, Sub, Relu, SoftThreshold, Scale, MulConst,
        Matmul, Conv2d, Reshape, Sum, SumSquares,
    };

    struct Node {
        Op op;
        std::vector<int> inputs;
        Tensor value;
        Tensor grad;                 // empty until touched by backward
        bool requires_grad = false;
        double c = 0.0;              // MulConst
        bool trans_a = false, trans_b = false;
        std::shared_ptr<std::vector<double>> aux;  // conv2d: padded input slab
    };

    Var push(Node n);
    Node& node(Var v);
    const Node& node(Var v) const;
    void ensure_grad(Node& n);
    bool any_requires(std::initializer_list<Var> vs) const;

    void backward_node(int id);

    std::vector<Node> nodes_;
};

}  // namespace sptm
