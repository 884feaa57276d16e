#pragma once

#include "stgf/autodiff.hpp"
#include "stgf/graph.hpp"

#include <array>
#include <random>
#include <string_view>
#include <vector>

namespace stgf {

enum class ResetActivation { Sigmoid, Identity };

std::string_view to_string(ResetActivation act);
ResetActivation parse_reset_activation(std::string_view s);

struct ModelConfig {
    int hidden = 64;
    double dropout_p = 0.1;
    ResetActivation reset_activation = ResetActivation::Sigmoid;
    int history_steps = 4;  // t
    int horizon_steps = 4;  // T

    void validate() const;
};

/// All trainable tensors. Row vectors hold biases; the projection width equals
/// the hidden size so [L_t, H_t] is n x 2H.
struct ModelParams {
    static constexpr std::size_t kCount = 11;

    Matrix proj_w;  // 1 x H
    Matrix proj_b;  // 1 x H
    Matrix w_u, w_r, w_c;  // 2H x H
    Matrix b_u, b_r, b_c;  // 1 x H
    Matrix dec_w;  // H x 1
    Matrix dec_b;  // 1 x 1
    Matrix phi;    // n x n operator correction

    /// Uniform(+-sqrt(1/fan_in)) weights and biases, phi = 0.
    static ModelParams init(Eigen::Index nodes, int hidden, std::mt19937_64& rng);
    static ModelParams zeros(Eigen::Index nodes, int hidden);

    std::array<Matrix*, kCount> tensors();
    std::array<const Matrix*, kCount> tensors() const;
    static const std::array<std::string_view, kCount>& names();
    static constexpr std::size_t kPhiIndex = 10;

    Eigen::Index nodes() const { return phi.rows(); }
    int hidden() const { return static_cast<int>(proj_w.cols()); }
    bool all_finite() const;
};

/// Graph leaves for one forward/backward pass; each pass owns its own leaves so
/// passes on different threads never share gradient buffers.
struct ParamVars {
    std::array<ad::Var, ModelParams::kCount> vars;

    static ParamVars leaves(const ModelParams& p, bool trainable);

    const ad::Var& proj_w() const { return vars[0]; }
    const ad::Var& proj_b() const { return vars[1]; }
    const ad::Var& w_u() const { return vars[2]; }
    const ad::Var& w_r() const { return vars[3]; }
    const ad::Var& w_c() const { return vars[4]; }
    const ad::Var& b_u() const { return vars[5]; }
    const ad::Var& b_r() const { return vars[6]; }
    const ad::Var& b_c() const { return vars[7]; }
    const ad::Var& dec_w() const { return vars[8]; }
    const ad::Var& dec_b() const { return vars[9]; }
    const ad::Var& phi() const { return vars[10]; }
};

/// L_t = x_t W_f + b_f for x_t of shape n x 1.
ad::Var project(const ad::Var& x, const ParamVars& p);

/// One graph-GRU transition. `op` is the n x n propagation operator.
ad::Var gru_step(const ad::Var& features, const ad::Var& state, const ad::Var& op,
                 const ParamVars& p, const ModelConfig& cfg);

/// X = H W_dec + b_dec, n x 1.
ad::Var decode(const ad::Var& state, const ParamVars& p);

/// Autoregressive forecast: history is t x n (rows are time). Returns T
/// predictions of shape n x 1; predicted steps are fed back as inputs.
std::vector<ad::Var> rollout(const Matrix& history, const ad::Var& op, const ParamVars& p,
                             const ModelConfig& cfg, int horizon);

/// Gradient-free rollout returning a T x n matrix.
Matrix forecast(const Matrix& history, const PropagationOperator& op, const ModelParams& params,
                const ModelConfig& cfg, int horizon);

}  // namespace stgf
