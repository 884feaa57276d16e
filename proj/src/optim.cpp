#include "stgf/optim.hpp"

#include "stgf/error.hpp"

namespace stgf {

AdamState AdamState::like(std::span<const Matrix* const> params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Matrix* p : params) {
        s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
        s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    return s;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ContractError("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (grads[k]->rows() != params[k]->rows() || grads[k]->cols() != params[k]->cols() ||
            state.m[k].rows() != params[k]->rows() || state.m[k].cols() != params[k]->cols()) {
            throw DimensionError("adam_step: parameter " + std::to_string(k) + " is " +
                                 shape_str(*params[k]) + ", gradient " + shape_str(*grads[k]));
        }
        if (!grads[k]->allFinite()) {
            throw NumericalError("adam_step: non-finite gradient for parameter " + std::to_string(k));
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto m = state.m[k].array();
        auto v = state.v[k].array();
        const auto g = grads[k]->array();
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.square();
        params[k]->array() -= lr * (m / bc1) / ((v / bc2).sqrt() + state.eps);
    }
}

}  // namespace stgf
