#include "helpers.hpp"

#include "stgf/error.hpp"
#include "stgf/optim.hpp"
#include "stgf/pipeline.hpp"
#include "stgf/train.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

using namespace stgf;
using testutil::uniform;

namespace {

bool same_bits(const ModelParams& a, const ModelParams& b) {
    const auto x = a.tensors();
    const auto y = b.tensors();
    for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
        if (x[k]->rows() != y[k]->rows() || x[k]->cols() != y[k]->cols()) return false;
        if (std::memcmp(x[k]->data(), y[k]->data(), sizeof(double) * x[k]->size()) != 0) return false;
    }
    return true;
}

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.hidden = 8;
    cfg.history_steps = 4;
    cfg.horizon_steps = 2;
    cfg.dropout_p = 0.2;
    return cfg;
}

TrainConfig quick_train(int epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.threads = 1;
    return cfg;
}

}  // namespace

TEST_CASE("forecast loss") {
    Matrix targets(2, 3);
    targets << 1, 2, 3, 4, 5, 6;
    std::vector<ad::Var> same{ad::constant(targets.row(0).transpose()), ad::constant(targets.row(1).transpose())};
    CHECK(forecast_loss(same, targets).value()(0, 0) == 0.0);

    std::vector<ad::Var> single{ad::param(Matrix::Zero(1, 1))};
    const auto loss = forecast_loss(single, Matrix::Constant(1, 1, 2.0));
    CHECK(loss.value()(0, 0) == 4.0);

    std::mt19937_64 rng(51);
    std::vector<ad::Var> preds{ad::param(uniform(3, 1, rng)), ad::param(uniform(3, 1, rng))};
    ad::backward(forecast_loss(preds, targets));
    for (int i = 0; i < 2; ++i) {
        const Matrix expected = 2.0 * (preds[i].value() - targets.row(i).transpose()) / 6.0;
        CHECK(testutil::max_abs_diff(preds[i].grad(), expected) < 1e-15);
    }
    CHECK_THROWS_AS(forecast_loss(preds, Matrix::Zero(3, 3)), DimensionError);
}

TEST_CASE("Adam first step and oracle") {
    std::mt19937_64 rng(52);
    Matrix w = uniform(3, 3, rng);
    const Matrix start = w;
    const Matrix g = uniform(3, 3, rng);
    std::vector<Matrix*> ps{&w};
    std::vector<const Matrix*> gs{&g};
    auto state = AdamState::like(std::vector<const Matrix*>{&w});
    const double lr = 0.01;
    adam_step(ps, gs, state, lr);
    for (Eigen::Index i = 0; i < 9; ++i) {
        const double step = w.data()[i] - start.data()[i];
        const double gi = g.data()[i];
        CHECK(step * gi < 0.0);
        CHECK(std::abs(step) <= lr);
        CHECK(std::abs(step) >= lr * std::abs(gi) / (std::abs(gi) + 1e-8) - 1e-15);
    }

    // second step against the textbook recurrence
    const Matrix after_one = w;
    const Matrix g2 = uniform(3, 3, rng);
    gs[0] = &g2;
    adam_step(ps, gs, state, lr);
    for (Eigen::Index i = 0; i < 9; ++i) {
        const double m1 = 0.1 * g.data()[i];
        const double v1 = 0.001 * g.data()[i] * g.data()[i];
        const double m2 = 0.9 * m1 + 0.1 * g2.data()[i];
        const double v2 = 0.999 * v1 + 0.001 * g2.data()[i] * g2.data()[i];
        const double mhat = m2 / (1.0 - 0.81);
        const double vhat = v2 / (1.0 - 0.999 * 0.999);
        CHECK(w.data()[i] == doctest::Approx(after_one.data()[i] - lr * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-13));
    }
    CHECK((state.v[0].array() >= 0.0).all());
}

TEST_CASE("Adam with zero gradients and on a quadratic bowl") {
    Matrix w = Matrix::Constant(2, 2, 0.7);
    const Matrix zero = Matrix::Zero(2, 2);
    std::vector<Matrix*> ps{&w};
    std::vector<const Matrix*> gs{&zero};
    auto state = AdamState::like(std::vector<const Matrix*>{&w});
    for (int i = 0; i < 100; ++i) adam_step(ps, gs, state, 0.1);
    CHECK(w == Matrix::Constant(2, 2, 0.7));

    Matrix x = Matrix::Constant(1, 1, 1.0);
    Matrix grad(1, 1);
    std::vector<Matrix*> xp{&x};
    std::vector<const Matrix*> xg{&grad};
    auto bowl = AdamState::like(std::vector<const Matrix*>{&x});
    for (int i = 0; i < 200; ++i) {
        grad(0, 0) = 2.0 * x(0, 0);
        adam_step(xp, xg, bowl, 0.1);
    }
    CHECK(std::abs(x(0, 0)) < 1e-3);
}

TEST_CASE("Adam rejects non-finite gradients without touching parameters") {
    Matrix a = Matrix::Ones(2, 2);
    Matrix b = Matrix::Ones(1, 2);
    const Matrix ga = Matrix::Ones(2, 2);
    Matrix gb = Matrix::Ones(1, 2);
    gb(0, 1) = std::nan("");
    std::vector<Matrix*> ps{&a, &b};
    std::vector<const Matrix*> gs{&ga, &gb};
    auto state = AdamState::like(std::vector<const Matrix*>{&a, &b});
    CHECK_THROWS_AS(adam_step(ps, gs, state, 0.1), NumericalError);
    CHECK(a == Matrix::Ones(2, 2));
    CHECK(b == Matrix::Ones(1, 2));
    CHECK(state.step == 0);
}

TEST_CASE("learning-rate schedule") {
    TrainConfig cfg;
    cfg.lr0 = 1e-2;
    CHECK(lr_at(1, cfg) == doctest::Approx(1e-2).epsilon(1e-15));
    CHECK(lr_at(25, cfg) == doctest::Approx(1e-2).epsilon(1e-15));
    CHECK(lr_at(26, cfg) == doctest::Approx(2e-3).epsilon(1e-14));
    CHECK(lr_at(100, cfg) == doctest::Approx(8e-5).epsilon(1e-13));
    CHECK_THROWS_AS(lr_at(0, cfg), ParameterError);

    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.lr_decay = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("zero epochs returns the initial model") {
    const auto synth = make_synthetic_traffic(5, 120, 15, 3);
    const auto base = normalize_with_self_loops(synth.topology);
    std::mt19937_64 rng(53);
    const auto init = ModelParams::init(5, 8, rng);
    const auto result = train(synth.dataset, base, init, quick_train(0), tiny_model());
    CHECK(same_bits(result.params, init));
    CHECK(result.history.empty());
}

TEST_CASE("a small step lowers the loss on a fixed batch") {
    const auto synth = make_synthetic_traffic(4, 80, 15, 5);
    const auto base = normalize_with_self_loops(synth.topology);
    auto cfg = tiny_model();
    const Matrix values = normalize(synth.dataset);
    const auto windows = make_windows(values, synth.dataset, cfg.history_steps, cfg.horizon_steps, Split::Train);
    std::vector<const Window*> batch;
    for (std::size_t i = 0; i < 4; ++i) batch.push_back(&windows[i * 7]);
    const Matrix ones = Matrix::Ones(4, 4);

    std::mt19937_64 rng(54);
    for (int trial = 0; trial < 20; ++trial) {
        auto params = ModelParams::init(4, 8, rng);
        params.phi = uniform(4, 4, rng, -0.1, 0.1);
        const auto before = batch_gradients(batch, base, ones, params, cfg, 1);
        auto tensors = params.tensors();
        std::vector<Matrix*> ps(tensors.begin(), tensors.end());
        std::vector<const Matrix*> gs;
        for (const auto& g : before.grads) gs.push_back(&g);
        auto state = AdamState::like(std::vector<const Matrix*>(ps.begin(), ps.end()));
        adam_step(ps, gs, state, 1e-4);
        const auto after = batch_gradients(batch, base, ones, params, cfg, 1);
        CHECK(after.loss < before.loss);
    }
}

TEST_CASE("batch gradients match finite differences and ignore thread count") {
    const auto synth = make_synthetic_traffic(4, 60, 15, 6);
    const auto base = normalize_with_self_loops(synth.topology);
    const auto cfg = tiny_model();
    const Matrix values = normalize(synth.dataset);
    const auto windows = make_windows(values, synth.dataset, cfg.history_steps, cfg.horizon_steps, Split::Train);
    std::vector<const Window*> batch{&windows[0], &windows[3], &windows[9]};
    std::mt19937_64 rng(55);
    auto params = ModelParams::init(4, 8, rng);
    params.phi = uniform(4, 4, rng, -0.1, 0.1);
    const Matrix mask = sample_dropout_mask(4, 0.3, rng);

    const auto one = batch_gradients(batch, base, mask, params, cfg, 1);
    const auto three = batch_gradients(batch, base, mask, params, cfg, 3);
    CHECK(one.loss == three.loss);
    for (std::size_t k = 0; k < ModelParams::kCount; ++k) CHECK(one.grads[k] == three.grads[k]);

    // spot-check phi against a central difference of the batch loss
    const double eps = 1e-6;
    for (auto [i, j] : {std::pair{0, 1}, std::pair{2, 3}, std::pair{3, 3}}) {
        auto up = params;
        up.phi(i, j) += eps;
        auto down = params;
        down.phi(i, j) -= eps;
        const double numeric = (batch_gradients(batch, base, mask, up, cfg, 1).loss -
                                batch_gradients(batch, base, mask, down, cfg, 1).loss) / (2.0 * eps);
        CHECK(one.grads[ModelParams::kPhiIndex](i, j) == doctest::Approx(numeric).epsilon(1e-5));
        if (mask(i, j) == 0.0) CHECK(one.grads[ModelParams::kPhiIndex](i, j) == 0.0);
    }
}

TEST_CASE("phi receives gradient on a three-node instance") {
    const auto synth = make_synthetic_traffic(3, 60, 15, 7);
    const auto base = normalize_with_self_loops(synth.topology);
    const auto cfg = tiny_model();
    const Matrix values = normalize(synth.dataset);
    const auto windows = make_windows(values, synth.dataset, cfg.history_steps, cfg.horizon_steps, Split::Train);
    std::vector<const Window*> batch{&windows[0]};
    std::mt19937_64 rng(56);
    const auto params = ModelParams::init(3, 8, rng);
    Matrix mask = Matrix::Zero(3, 3);
    mask(1, 2) = 2.0;
    const auto g = batch_gradients(batch, base, mask, params, cfg, 1);
    CHECK(g.loss > 0.0);
    CHECK(g.grads[ModelParams::kPhiIndex](1, 2) != 0.0);
    CHECK(g.grads[ModelParams::kPhiIndex].cwiseAbs().sum() == std::abs(g.grads[ModelParams::kPhiIndex](1, 2)));
}

TEST_CASE("training is reproducible and independent of threads") {
    const auto synth = make_synthetic_traffic(5, 160, 15, 8);
    const auto base = normalize_with_self_loops(synth.topology);
    auto cfg = quick_train(3);
    const auto a = train(synth.dataset, base, cfg, tiny_model());
    const auto b = train(synth.dataset, base, cfg, tiny_model());
    cfg.threads = 3;
    const auto c = train(synth.dataset, base, cfg, tiny_model());
    CHECK(same_bits(a.params, b.params));
    CHECK(same_bits(a.params, c.params));
    cfg.seed += 1;
    const auto d = train(synth.dataset, base, cfg, tiny_model());
    CHECK_FALSE(same_bits(a.params, d.params));
}

TEST_CASE("logged learning rates follow the schedule") {
    const auto synth = make_synthetic_traffic(4, 100, 15, 9);
    const auto base = normalize_with_self_loops(synth.topology);
    auto cfg = quick_train(7);
    cfg.decay_every = 3;
    const auto r = train(synth.dataset, base, cfg, tiny_model());
    REQUIRE(r.history.size() == 7);
    for (const auto& rec : r.history) {
        CHECK(rec.lr == lr_at(rec.epoch, cfg));
        CHECK(std::isfinite(rec.train_loss));
        CHECK(std::isfinite(rec.val_loss));
    }

    testutil::TempDir dir("log");
    write_training_log(r.history, dir / "log.csv");
    std::ifstream in(dir / "log.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,lr,train_loss,val_loss,wall_ms");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 7);
}

TEST_CASE("ablation configurations nest") {
    const auto synth = make_synthetic_traffic(4, 100, 15, 10);
    const auto base = normalize_with_self_loops(synth.topology);

    auto bc_train = quick_train(2);
    auto bc_model = tiny_model();
    apply_variant(Variant::Bc, bc_train, bc_model);
    CHECK_FALSE(bc_train.train_phi);
    CHECK(bc_model.dropout_p == 0.0);
    const auto bc = train(synth.dataset, base, bc_train, bc_model);
    CHECK(bc.params.phi == Matrix::Zero(4, 4));

    // Bc by hand: phi frozen, dropout off
    auto manual_train = quick_train(2);
    manual_train.train_phi = false;
    auto manual_model = tiny_model();
    manual_model.dropout_p = 0.0;
    CHECK(same_bits(bc.params, train(synth.dataset, base, manual_train, manual_model).params));

    auto bd_train = quick_train(2);
    auto bd_model = tiny_model();
    apply_variant(Variant::Bd, bd_train, bd_model);
    CHECK(bd_train.train_phi);
    CHECK(bd_model.dropout_p == 0.0);
    CHECK(train(synth.dataset, base, bd_train, bd_model).params.phi != Matrix::Zero(4, 4));

    auto full_train = quick_train(2);
    auto full_model = tiny_model();
    apply_variant(Variant::Full, full_train, full_model);
    CHECK(full_model.dropout_p == tiny_model().dropout_p);
    CHECK(full_train.train_phi);
}

TEST_CASE("constant series is learned") {
    auto ds = make_dataset("flat", 15, Matrix::Constant(200, 3, 42.0));
    Matrix adj = Matrix::Ones(3, 3);
    adj.diagonal().setZero();
    const auto base = normalize_with_self_loops({adj});
    auto cfg = quick_train(50);
    auto model = tiny_model();
    model.dropout_p = 0.0;
    const auto r = train(ds, base, cfg, model);
    const Matrix values = normalize(ds);
    const auto windows = make_windows(values, ds, model.history_steps, model.horizon_steps, Split::Eval);
    const auto op = eval_operator(base, r.params.phi);
    double worst = 0.0;
    for (const auto& w : windows) {
        const Matrix pred = forecast(w.history, op, r.params, model, model.horizon_steps);
        worst = std::max(worst, (pred.array() - 1.0).abs().maxCoeff());
    }
    CHECK(worst < 0.01);
}

TEST_CASE("training loss falls on synthetic traffic") {
    const auto synth = make_synthetic_traffic(6, 400, 15, 11);
    const auto base = normalize_with_self_loops(synth.topology);
    auto cfg = quick_train(15);
    cfg.decay_every = 10;
    const auto r = train(synth.dataset, base, cfg, tiny_model());
    CHECK(r.history.back().train_loss < 0.5 * r.history.front().train_loss);
}

TEST_CASE("train rejects mismatched graphs and short datasets") {
    const auto synth = make_synthetic_traffic(4, 100, 15, 12);
    const auto wrong = normalize_with_self_loops({Matrix::Zero(5, 5)});
    CHECK_THROWS_AS(train(synth.dataset, wrong, quick_train(1), tiny_model()), ConfigError);

    const auto shorty = make_dataset("short", 15, Matrix::Constant(6, 4, 10.0));
    const auto base = normalize_with_self_loops(synth.topology);
    CHECK_THROWS_AS(train(shorty, base, quick_train(1), tiny_model()), DataError);
}
