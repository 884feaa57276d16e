#pragma once

// Small reverse-mode differentiation engine over dense row-major matrices.
//
// A computation is a DAG of nodes built eagerly as the ops below are called.
// Leaves created with `param` accumulate d(loss)/d(leaf) when `backward` runs;
// intermediate gradients are reset on every backward pass, leaf gradients are
// not (call `zero_grad` between passes).

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stgf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_str(const Matrix& m);

namespace ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Propagates `self.grad` into the gradients of `self.parents`.
using BackwardFn = std::function<void(Node& self)>;

struct Node {
    Matrix value;
    Matrix grad;  // allocated on demand, same shape as value
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    BackwardFn backward;

    Matrix& grad_ref();  // zero-initialises grad if not yet allocated
};

class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }
    const Matrix& grad() const;
    bool requires_grad() const { return node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }

    Node& node() const { return *node_; }
    const NodePtr& ptr() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

/// Trainable leaf.
Var param(Matrix value);
/// Leaf excluded from differentiation.
Var constant(Matrix value);

/// While alive, ops on this thread record no backward graph (values only).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds an op node. `backward` is kept only if some parent requires grad.
/// Throws NumericalError if `value` holds a NaN or Inf.
Var make_node(Matrix value, std::vector<Var> parents, BackwardFn backward, const char* op_name);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double c);
/// Entrywise product with a constant matrix (dropout masks, weights).
Var mul_const(const Var& a, const Matrix& c);
/// x (r x c) plus a 1 x c bias broadcast to every row.
Var add_row_bias(const Var& x, const Var& bias);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);

Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, Eigen::Index begin, Eigen::Index count);

/// Sum of all entries, 1 x 1.
Var sum(const Var& a);
/// Sum of squared entries, 1 x 1.
Var sum_squares(const Var& a);

enum class ElementwiseOp { Add, Sub, Mul, Sigmoid, Tanh, Scale };
/// Dispatching form of the entrywise ops. Unary ops ignore `b`; Scale uses `s`.
Var elementwise(ElementwiseOp op, const Var& a, const Var& b = {}, double s = 1.0);

/// Fills d(loss)/d(leaf) for every reachable trainable leaf. `loss` must be 1 x 1.
void backward(const Var& loss);

void zero_grad(std::span<Var> params);

/// Max over all entries of all params of |analytic - central| / max(1, |central|).
/// `build` must recompute the loss from the current values of `params`.
double grad_check(const std::function<Var()>& build, std::span<Var> params, double eps = 1e-5);

}  // namespace ad
}  // namespace stgf
