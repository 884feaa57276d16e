#include "stgf/model.hpp"

#include "stgf/error.hpp"

#include <cmath>

namespace stgf {

std::string_view to_string(ResetActivation act) {
    return act == ResetActivation::Sigmoid ? "sigmoid" : "identity";
}

ResetActivation parse_reset_activation(std::string_view s) {
    if (s == "sigmoid") return ResetActivation::Sigmoid;
    if (s == "identity") return ResetActivation::Identity;
    throw UsageError("reset activation must be sigmoid or identity, got '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
    if (hidden <= 0) throw ParameterError("hidden size must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParameterError("dropout_p must lie in [0, 1)");
    if (history_steps < 1 || horizon_steps < 1) {
        throw ParameterError("history and horizon steps must be >= 1");
    }
}

namespace {

Matrix uniform(Eigen::Index r, Eigen::Index c, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

}  // namespace

ModelParams ModelParams::init(Eigen::Index nodes, int hidden, std::mt19937_64& rng) {
    const Eigen::Index h = hidden;
    const double proj_bound = 1.0;  // fan_in 1
    const double gru_bound = std::sqrt(1.0 / static_cast<double>(2 * h));
    const double dec_bound = std::sqrt(1.0 / static_cast<double>(h));
    ModelParams p;
    p.proj_w = uniform(1, h, proj_bound, rng);
    p.proj_b = uniform(1, h, proj_bound, rng);
    p.w_u = uniform(2 * h, h, gru_bound, rng);
    p.w_r = uniform(2 * h, h, gru_bound, rng);
    p.w_c = uniform(2 * h, h, gru_bound, rng);
    p.b_u = uniform(1, h, gru_bound, rng);
    p.b_r = uniform(1, h, gru_bound, rng);
    p.b_c = uniform(1, h, gru_bound, rng);
    p.dec_w = uniform(h, 1, dec_bound, rng);
    p.dec_b = uniform(1, 1, dec_bound, rng);
    p.phi = Matrix::Zero(nodes, nodes);
    return p;
}

ModelParams ModelParams::zeros(Eigen::Index nodes, int hidden) {
    const Eigen::Index h = hidden;
    ModelParams p;
    p.proj_w = Matrix::Zero(1, h);
    p.proj_b = Matrix::Zero(1, h);
    p.w_u = Matrix::Zero(2 * h, h);
    p.w_r = Matrix::Zero(2 * h, h);
    p.w_c = Matrix::Zero(2 * h, h);
    p.b_u = Matrix::Zero(1, h);
    p.b_r = Matrix::Zero(1, h);
    p.b_c = Matrix::Zero(1, h);
    p.dec_w = Matrix::Zero(h, 1);
    p.dec_b = Matrix::Zero(1, 1);
    p.phi = Matrix::Zero(nodes, nodes);
    return p;
}

std::array<Matrix*, ModelParams::kCount> ModelParams::tensors() {
    return {&proj_w, &proj_b, &w_u, &w_r, &w_c, &b_u, &b_r, &b_c, &dec_w, &dec_b, &phi};
}

std::array<const Matrix*, ModelParams::kCount> ModelParams::tensors() const {
    return {&proj_w, &proj_b, &w_u, &w_r, &w_c, &b_u, &b_r, &b_c, &dec_w, &dec_b, &phi};
}

const std::array<std::string_view, ModelParams::kCount>& ModelParams::names() {
    static const std::array<std::string_view, kCount> n{
        "proj_w", "proj_b", "w_u", "w_r", "w_c", "b_u", "b_r", "b_c", "dec_w", "dec_b", "phi"};
    return n;
}

bool ModelParams::all_finite() const {
    for (const Matrix* m : tensors())
        if (!m->allFinite()) return false;
    return true;
}

ParamVars ParamVars::leaves(const ModelParams& p, bool trainable) {
    ParamVars out;
    const auto t = p.tensors();
    for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
        out.vars[k] = trainable ? ad::param(*t[k]) : ad::constant(*t[k]);
    }
    return out;
}

ad::Var project(const ad::Var& x, const ParamVars& p) {
    if (x.cols() != 1) {
        throw DimensionError("project: expected n x 1 speeds, got " + shape_str(x.value()));
    }
    return ad::add_row_bias(ad::matmul(x, p.proj_w()), p.proj_b());
}

namespace {

// op * (input * W) + b
ad::Var graph_conv(const ad::Var& op, const ad::Var& input, const ad::Var& w, const ad::Var& b) {
    return ad::add_row_bias(ad::matmul(op, ad::matmul(input, w)), b);
}

}  // namespace

ad::Var gru_step(const ad::Var& features, const ad::Var& state, const ad::Var& op,
                 const ParamVars& p, const ModelConfig& cfg) {
    if (features.rows() != state.rows() || features.cols() != cfg.hidden ||
        state.cols() != cfg.hidden) {
        throw DimensionError("gru_step: features " + shape_str(features.value()) + ", state " +
                             shape_str(state.value()) + ", hidden " + std::to_string(cfg.hidden));
    }
    if (op.rows() != state.rows() || op.cols() != state.rows()) {
        throw DimensionError("gru_step: operator " + shape_str(op.value()) + " does not match " +
                             std::to_string(state.rows()) + " nodes");
    }
    const auto joint = ad::concat_cols(features, state);
    const auto update = ad::sigmoid(graph_conv(op, joint, p.w_u(), p.b_u()));
    const auto reset_pre = graph_conv(op, joint, p.w_r(), p.b_r());
    const auto reset =
        cfg.reset_activation == ResetActivation::Sigmoid ? ad::sigmoid(reset_pre) : reset_pre;
    const auto gated = ad::concat_cols(features, ad::mul(reset, state));
    const auto candidate = ad::tanh(graph_conv(op, gated, p.w_c(), p.b_c()));
    // H' = u * H + (1 - u) * n
    const auto keep = ad::mul(update, state);
    const auto renew = ad::mul(ad::add_scalar(ad::scale(update, -1.0), 1.0), candidate);
    return ad::add(keep, renew);
}

ad::Var decode(const ad::Var& state, const ParamVars& p) {
    return ad::add_row_bias(ad::matmul(state, p.dec_w()), p.dec_b());
}

std::vector<ad::Var> rollout(const Matrix& history, const ad::Var& op, const ParamVars& p,
                             const ModelConfig& cfg, int horizon) {
    if (history.rows() < 1) throw ParameterError("rollout: history must hold at least one step");
    if (horizon < 1) throw ParameterError("rollout: horizon must be >= 1");
    const Eigen::Index n = history.cols();
    auto state = ad::constant(Matrix::Zero(n, cfg.hidden));
    for (Eigen::Index k = 0; k < history.rows(); ++k) {
        const auto x = ad::constant(history.row(k).transpose());
        state = gru_step(project(x, p), state, op, p, cfg);
    }
    std::vector<ad::Var> preds;
    preds.reserve(static_cast<std::size_t>(horizon));
    preds.push_back(decode(state, p));
    for (int i = 1; i < horizon; ++i) {
        state = gru_step(project(preds.back(), p), state, op, p, cfg);
        preds.push_back(decode(state, p));
    }
    return preds;
}

Matrix forecast(const Matrix& history, const PropagationOperator& op, const ModelParams& params,
                const ModelConfig& cfg, int horizon) {
    const auto vars = ParamVars::leaves(params, false);
    const auto preds = rollout(history, ad::constant(op.matrix), vars, cfg, horizon);
    Matrix out(horizon, history.cols());
    for (int i = 0; i < horizon; ++i) out.row(i) = preds[static_cast<std::size_t>(i)].value().transpose();
    return out;
}

}  // namespace stgf
