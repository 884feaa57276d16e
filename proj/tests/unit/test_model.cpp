#include "helpers.hpp"

#include "stgf/error.hpp"
#include "stgf/model.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace stgf;
using testutil::uniform;

namespace {

ModelParams random_params(Eigen::Index n, int hidden, std::mt19937_64& rng, double phi_scale = 0.0) {
    auto p = ModelParams::init(n, hidden, rng);
    if (phi_scale > 0.0) p.phi = uniform(n, n, rng, -phi_scale, phi_scale);
    return p;
}

ModelConfig small_cfg(int hidden) {
    ModelConfig cfg;
    cfg.hidden = hidden;
    cfg.history_steps = 3;
    cfg.horizon_steps = 2;
    return cfg;
}

Eigen::ArrayXXd sigm(const Eigen::ArrayXXd& x) { return 1.0 / (1.0 + (-x).exp()); }

// Conventional GRU applied to every node independently, no graph mixing.
Matrix plain_gru(const Matrix& l, const Matrix& h, const ModelParams& p, bool identity_reset) {
    const auto hd = h.cols();
    Matrix out(h.rows(), hd);
    for (Eigen::Index node = 0; node < h.rows(); ++node) {
        Eigen::RowVectorXd x(2 * hd);
        x << l.row(node), h.row(node);
        const Eigen::ArrayXXd u = sigm((x * p.w_u + p.b_u).array());
        const Eigen::ArrayXXd r_lin = (x * p.w_r + p.b_r).array();
        const Eigen::ArrayXXd r = identity_reset ? r_lin : sigm(r_lin);
        Eigen::RowVectorXd xc(2 * hd);
        xc << l.row(node), (r * h.row(node).array()).matrix();
        const Eigen::ArrayXXd c = (xc * p.w_c + p.b_c).array().tanh();
        out.row(node) = (u * h.row(node).array() + (1.0 - u) * c).matrix();
    }
    return out;
}

}  // namespace

TEST_CASE("projection") {
    auto p = ModelParams::zeros(3, 8);
    auto v = ParamVars::leaves(p, false);
    std::mt19937_64 rng(41);
    CHECK(project(ad::constant(uniform(3, 1, rng, 0.0, 1.0)), v).value() == Matrix::Zero(3, 8));

    p.proj_b.setConstant(0.25);
    v = ParamVars::leaves(p, false);
    CHECK(project(ad::constant(Matrix::Zero(3, 1)), v).value() == Matrix::Constant(3, 8, 0.25));

    auto one = ModelParams::zeros(1, 8);
    one.proj_w(0, 0) = 1.0;
    const Matrix l = project(ad::constant(Matrix::Constant(1, 1, 0.5)), ParamVars::leaves(one, false)).value();
    CHECK(l(0, 0) == 0.5);
    CHECK(l.rightCols(7) == Matrix::Zero(1, 7));

    CHECK_THROWS_AS(project(ad::constant(Matrix::Zero(3, 2)), v), DimensionError);
}

TEST_CASE("GRU step closed forms at zero parameters") {
    std::mt19937_64 rng(42);
    const auto cfg = small_cfg(6);
    auto p = ModelParams::zeros(4, 6);
    const auto op = ad::constant(uniform(4, 4, rng));
    const Matrix h = uniform(4, 6, rng);
    const auto next = gru_step(ad::constant(uniform(4, 6, rng)), ad::constant(h), op, ParamVars::leaves(p, false), cfg);
    CHECK(testutil::max_abs_diff(next.value(), 0.5 * h) < 1e-15);

    p.b_c.setConstant(0.8);
    const auto from_zero = gru_step(ad::constant(Matrix::Zero(4, 6)), ad::constant(Matrix::Zero(4, 6)), op,
                                    ParamVars::leaves(p, false), cfg);
    CHECK(testutil::max_abs_diff(from_zero.value(), Matrix::Constant(4, 6, 0.5 * std::tanh(0.8))) < 1e-15);
}

TEST_CASE("identity operator reduces to a plain GRU") {
    std::mt19937_64 rng(43);
    for (auto act : {ResetActivation::Sigmoid, ResetActivation::Identity}) {
        auto cfg = small_cfg(5);
        cfg.reset_activation = act;
        const auto p = random_params(3, 5, rng);
        const Matrix l = uniform(3, 5, rng);
        const Matrix h = uniform(3, 5, rng);
        const auto next = gru_step(ad::constant(l), ad::constant(h), ad::constant(Matrix::Identity(3, 3)),
                                   ParamVars::leaves(p, false), cfg);
        CHECK(testutil::max_abs_diff(next.value(), plain_gru(l, h, p, act == ResetActivation::Identity)) < 1e-14);
    }
}

TEST_CASE("decoder") {
    auto p = ModelParams::zeros(3, 4);
    p.dec_b(0, 0) = 0.3;
    std::mt19937_64 rng(44);
    CHECK(decode(ad::constant(uniform(3, 4, rng)), ParamVars::leaves(p, false)).value() == Matrix::Constant(3, 1, 0.3));

    p.dec_w.setOnes();
    Matrix h = Matrix::Zero(3, 4);
    h(1, 2) = 1.0;
    const Matrix out = decode(ad::constant(h), ParamVars::leaves(p, false)).value();
    CHECK(out(1, 0) == doctest::Approx(1.3));
}

TEST_CASE("gradient through project, GRU step and decode") {
    std::mt19937_64 rng(45);
    const auto cfg = small_cfg(6);
    const auto p = random_params(4, 6, rng, 0.2);
    const Matrix x = uniform(4, 1, rng, 0.0, 1.0);
    const Matrix h = uniform(4, 6, rng);
    const Matrix target = uniform(4, 1, rng);
    const Matrix base = uniform(4, 4, rng, 0.0, 0.5);
    auto vars = ParamVars::leaves(p, true);
    std::vector<ad::Var> leaves(vars.vars.begin(), vars.vars.end());
    auto build = [&] {
        const auto op = ad::add(ad::constant(base), vars.phi());
        const auto next = gru_step(project(ad::constant(x), vars), ad::constant(h), op, vars, cfg);
        return ad::sum_squares(ad::sub(decode(next, vars), ad::constant(target)));
    };
    CHECK(ad::grad_check(build, leaves) < 1e-4);
}

TEST_CASE("full rollout gradient with every parameter") {
    std::mt19937_64 rng(46);
    for (auto act : {ResetActivation::Sigmoid, ResetActivation::Identity}) {
        auto cfg = small_cfg(8);
        cfg.reset_activation = act;
        const auto p = random_params(4, 8, rng, 0.2);
        const Matrix history = uniform(3, 4, rng, 0.0, 1.0);
        const Matrix target = uniform(2, 4, rng, 0.0, 1.0);
        const Matrix base = uniform(4, 4, rng, 0.0, 0.5);
        const Matrix mask = (uniform(4, 4, rng).array() > -0.5).cast<double>().matrix() * 1.5;
        auto vars = ParamVars::leaves(p, true);
        std::vector<ad::Var> leaves(vars.vars.begin(), vars.vars.end());
        auto build = [&] {
            const auto op = ad::mul_const(ad::add(ad::constant(base), vars.phi()), mask);
            const auto preds = rollout(history, op, vars, cfg, 2);
            ad::Var loss;
            for (int i = 0; i < 2; ++i) {
                const auto sq = ad::sum_squares(ad::sub(preds[i], ad::constant(target.row(i).transpose())));
                loss = loss ? ad::add(loss, sq) : sq;
            }
            return loss;
        };
        CHECK(ad::grad_check(build, leaves) < 1e-4);
    }
}

TEST_CASE("rollout") {
    std::mt19937_64 rng(47);
    auto cfg = small_cfg(6);
    auto zero = ModelParams::zeros(3, 6);
    zero.dec_b(0, 0) = -0.2;
    const Matrix history = uniform(3, 3, rng, 0.0, 1.0);
    const PropagationOperator op{uniform(3, 3, rng)};
    CHECK(forecast(history, op, zero, cfg, 1) == Matrix::Constant(1, 3, -0.2));

    const auto p = random_params(3, 6, rng, 0.1);
    const Matrix four = forecast(history, op, p, cfg, 4);
    const Matrix one = forecast(history, op, p, cfg, 1);
    CHECK(four.rows() == 4);
    CHECK(four.cols() == 3);
    CHECK(four.row(0) == one.row(0));

    const Matrix again = forecast(history, op, p, cfg, 4);
    CHECK(std::memcmp(four.data(), again.data(), sizeof(double) * four.size()) == 0);

    // the differentiable path agrees with the gradient-free one
    const auto preds = rollout(history, ad::constant(op.matrix), ParamVars::leaves(p, false), cfg, 4);
    REQUIRE(preds.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(testutil::max_abs_diff(preds[i].value().transpose(), four.row(i)) < 1e-15);
}

TEST_CASE("hidden state stays within the unit ball") {
    std::mt19937_64 rng(48);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cfg = small_cfg(8);
        auto p = random_params(5, 8, rng, 0.5);
        for (auto* t : p.tensors()) *t *= 3.0;
        const auto vars = ParamVars::leaves(p, false);
        const auto op = ad::constant(uniform(5, 5, rng, -2.0, 2.0));
        ad::Var h = ad::constant(Matrix::Zero(5, 8));
        for (int step = 0; step < 30; ++step) {
            h = gru_step(project(ad::constant(uniform(5, 1, rng, 0.0, 1.0)), vars), h, op, vars, cfg);
            CHECK(h.value().cwiseAbs().maxCoeff() <= 1.0);
        }
    }
}

TEST_CASE("parameter containers") {
    std::mt19937_64 rng(49);
    const auto p = ModelParams::init(7, 16, rng);
    CHECK(p.nodes() == 7);
    CHECK(p.hidden() == 16);
    CHECK(p.w_u.rows() == 32);
    CHECK(p.w_u.cols() == 16);
    CHECK(p.phi == Matrix::Zero(7, 7));
    CHECK(p.w_c.cwiseAbs().maxCoeff() <= std::sqrt(1.0 / 32.0));
    CHECK(p.proj_w.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(p.all_finite());
    CHECK(ModelParams::names()[ModelParams::kPhiIndex] == "phi");

    ModelConfig bad;
    bad.dropout_p = 1.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = {};
    bad.hidden = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    CHECK(parse_reset_activation("identity") == ResetActivation::Identity);
    CHECK(to_string(ResetActivation::Sigmoid) == "sigmoid");
    CHECK_THROWS(parse_reset_activation("relu"));
}
