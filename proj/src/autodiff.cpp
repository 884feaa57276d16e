#include "stgf/autodiff.hpp"

#include "stgf/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace stgf {

std::string shape_str(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

namespace ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.value()) +
                             " vs " + shape_str(b.value()));
    }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

Matrix& Node::grad_ref() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
        grad = Matrix::Zero(value.rows(), value.cols());
    }
    return grad;
}

const Matrix& Var::grad() const { return node_->grad_ref(); }

Var param(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->grad_ref();
    return Var(std::move(n));
}

Var constant(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_node(Matrix value, std::vector<Var> parents, BackwardFn backward, const char* op_name) {
    if (!all_finite(value)) {
        throw NumericalError(std::string(op_name) + ": non-finite value produced");
    }
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = g_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                   [](const Var& p) { return p.requires_grad(); });
    if (n->requires_grad) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.ptr());
        n->backward = std::move(backward);
    }
    return Var(std::move(n));
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + shape_str(a.value()) + " by " +
                             shape_str(b.value()));
    }
    Matrix out = a.value() * b.value();
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.grad_ref().noalias() += self.grad * pb.value.transpose();
        if (pb.requires_grad) pb.grad_ref().noalias() += pa.value.transpose() * self.grad;
    }, "matmul");
}

Var transpose(const Var& a) {
    Matrix out = a.value().transpose();
    return make_node(std::move(out), {a}, [](Node& self) {
        self.parents[0]->grad_ref() += self.grad.transpose();
    }, "transpose");
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    return make_node(a.value() + b.value(), {a, b}, [](Node& self) {
        for (auto& p : self.parents)
            if (p->requires_grad) p->grad_ref() += self.grad;
    }, "add");
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    return make_node(a.value() - b.value(), {a, b}, [](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->grad_ref() += self.grad;
        if (self.parents[1]->requires_grad) self.parents[1]->grad_ref() -= self.grad;
    }, "sub");
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    return make_node(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.grad_ref() += self.grad.cwiseProduct(pb.value);
        if (pb.requires_grad) pb.grad_ref() += self.grad.cwiseProduct(pa.value);
    }, "mul");
}

Var scale(const Var& a, double s) {
    return make_node(a.value() * s, {a}, [s](Node& self) {
        self.parents[0]->grad_ref() += self.grad * s;
    }, "scale");
}

Var add_scalar(const Var& a, double c) {
    Matrix out = a.value().array() + c;
    return make_node(std::move(out), {a}, [](Node& self) {
        self.parents[0]->grad_ref() += self.grad;
    }, "add_scalar");
}

Var mul_const(const Var& a, const Matrix& c) {
    if (a.rows() != c.rows() || a.cols() != c.cols()) {
        throw DimensionError("mul_const: shape mismatch " + shape_str(a.value()) + " vs " +
                             shape_str(c));
    }
    return make_node(a.value().cwiseProduct(c), {a}, [c](Node& self) {
        self.parents[0]->grad_ref() += self.grad.cwiseProduct(c);
    }, "mul_const");
}

Var add_row_bias(const Var& x, const Var& bias) {
    if (bias.rows() != 1 || bias.cols() != x.cols()) {
        throw DimensionError("add_row_bias: bias " + shape_str(bias.value()) +
                             " does not fit rows of " + shape_str(x.value()));
    }
    Matrix out = x.value().rowwise() + bias.value().row(0);
    return make_node(std::move(out), {x, bias}, [](Node& self) {
        Node& px = *self.parents[0];
        Node& pb = *self.parents[1];
        if (px.requires_grad) px.grad_ref() += self.grad;
        if (pb.requires_grad) pb.grad_ref() += self.grad.colwise().sum();
    }, "add_row_bias");
}

Var sigmoid(const Var& a) {
    Matrix out = a.value().unaryExpr([](double v) {
        // split by sign so exp never overflows
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    return make_node(std::move(out), {a}, [](Node& self) {
        const auto& s = self.value.array();
        self.parents[0]->grad_ref().array() += self.grad.array() * s * (1.0 - s);
    }, "sigmoid");
}

Var tanh(const Var& a) {
    Matrix out = a.value().array().tanh();
    return make_node(std::move(out), {a}, [](Node& self) {
        const auto& t = self.value.array();
        self.parents[0]->grad_ref().array() += self.grad.array() * (1.0 - t * t);
    }, "tanh");
}

Var relu(const Var& a) {
    Matrix out = a.value().cwiseMax(0.0);
    return make_node(std::move(out), {a}, [](Node& self) {
        self.parents[0]->grad_ref().array() +=
            (self.value.array() > 0.0).select(self.grad.array(), 0.0);
    }, "relu");
}

Var exp(const Var& a) {
    Matrix out = a.value().array().exp();
    return make_node(std::move(out), {a}, [](Node& self) {
        self.parents[0]->grad_ref().array() += self.grad.array() * self.value.array();
    }, "exp");
}

Var concat_cols(const Var& a, const Var& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("concat_cols: row mismatch " + shape_str(a.value()) + " vs " +
                             shape_str(b.value()));
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a.value();
    out.rightCols(b.cols()) = b.value();
    const Eigen::Index split = a.cols();
    return make_node(std::move(out), {a, b}, [split](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.grad_ref() += self.grad.leftCols(split);
        if (pb.requires_grad) pb.grad_ref() += self.grad.rightCols(self.grad.cols() - split);
    }, "concat_cols");
}

Var slice_cols(const Var& a, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || count < 0 || begin + count > a.cols()) {
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") outside " + shape_str(a.value()));
    }
    Matrix out = a.value().middleCols(begin, count);
    return make_node(std::move(out), {a}, [begin, count](Node& self) {
        self.parents[0]->grad_ref().middleCols(begin, count) += self.grad;
    }, "slice_cols");
}

Var sum(const Var& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make_node(std::move(out), {a}, [](Node& self) {
        self.parents[0]->grad_ref().array() += self.grad(0, 0);
    }, "sum");
}

Var sum_squares(const Var& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().squaredNorm();
    return make_node(std::move(out), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        p.grad_ref() += (2.0 * self.grad(0, 0)) * p.value;
    }, "sum_squares");
}

Var elementwise(ElementwiseOp op, const Var& a, const Var& b, double s) {
    switch (op) {
        case ElementwiseOp::Add: return add(a, b);
        case ElementwiseOp::Sub: return sub(a, b);
        case ElementwiseOp::Mul: return mul(a, b);
        case ElementwiseOp::Sigmoid: return sigmoid(a);
        case ElementwiseOp::Tanh: return tanh(a);
        case ElementwiseOp::Scale: return scale(a, s);
    }
    throw ContractError("elementwise: unknown op");
}

void backward(const Var& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw ContractError("backward: loss must be 1x1, got " + shape_str(loss.value()));
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS; reversed it is a topological order from the loss.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(&loss.node(), 0);
    seen.insert(&loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->parents.empty()) n->grad_ref().setZero();
    }
    loss.node().grad_ref()(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

void zero_grad(std::span<Var> params) {
    for (auto& p : params) p.node().grad_ref().setZero();
}

double grad_check(const std::function<Var()>& build, std::span<Var> params, double eps) {
    if (!(eps > 1e-8 && eps < 1e-3)) {
        throw ParameterError("grad_check: eps must lie in (1e-8, 1e-3)");
    }
    zero_grad(params);
    Var loss = build();
    backward(loss);

    double worst = 0.0;
    for (auto& p : params) {
        const Matrix analytic = p.grad();
        Matrix& v = p.mutable_value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double orig = v.data()[i];
            NoGradGuard no_grad;
            v.data()[i] = orig + eps;
            const double up = build().value()(0, 0);
            v.data()[i] = orig - eps;
            const double down = build().value()(0, 0);
            v.data()[i] = orig;
            const double central = (up - down) / (2.0 * eps);
            if (!std::isfinite(central) || !std::isfinite(analytic.data()[i])) {
                throw NumericalError("grad_check: non-finite derivative estimate");
            }
            const double err =
                std::abs(analytic.data()[i] - central) / std::max(1.0, std::abs(central));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace ad
}  // namespace stgf
