#include "stgf/train.hpp"

#include "csv.hpp"
#include "stgf/error.hpp"
#include "stgf/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace stgf {

void TrainConfig::validate() const {
    if (epochs < 0) throw ParameterError("epochs must be >= 0");
    if (batch_size < 1) throw ParameterError("batch size must be >= 1");
    if (!(lr0 > 0.0)) throw ParameterError("lr0 must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ParameterError("lr_decay must lie in (0, 1]");
    if (decay_every < 1) throw ParameterError("decay_every must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ParameterError("val_fraction must lie in [0, 1)");
}

double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 1) throw ParameterError("lr_at: epochs are counted from 1");
    return cfg.lr0 * std::pow(cfg.lr_decay, (epoch - 1) / cfg.decay_every);
}

ad::Var forecast_loss(std::span<const ad::Var> preds, const Matrix& targets) {
    if (preds.size() != static_cast<std::size_t>(targets.rows())) {
        throw DimensionError("forecast_loss: " + std::to_string(preds.size()) +
                             " predicted steps vs targets " + shape_str(targets));
    }
    const double scale = 1.0 / static_cast<double>(targets.size());
    ad::Var total;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        if (p.rows() != targets.cols() || p.cols() != 1) {
            throw DimensionError("forecast_loss: prediction " + shape_str(p.value()) + " vs " +
                                 std::to_string(targets.cols()) + " targets");
        }
        const auto sq = ad::sum_squares(
            ad::sub(p, ad::constant(targets.row(static_cast<Eigen::Index>(i)).transpose())));
        total = total ? ad::add(total, sq) : sq;
    }
    return ad::scale(total, scale);
}

BatchGradients batch_gradients(std::span<const Window* const> batch, const PropagationOperator& base,
                               const Matrix& scaled_mask, const ModelParams& params,
                               const ModelConfig& cfg, int threads) {
    struct Slot {
        double loss = 0.0;
        std::array<Matrix, ModelParams::kCount> grads;
    };
    std::vector<Slot> slots(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        const Window& w = *batch[i];
        const auto vars = ParamVars::leaves(params, true);
        const auto op = apply_dropout_operator(base, vars.phi(), scaled_mask);
        const auto preds = rollout(w.history, op, vars, cfg, static_cast<int>(w.target.rows()));
        const auto loss = forecast_loss(preds, w.target);
        ad::backward(loss);
        slots[i].loss = loss.value()(0, 0);
        for (std::size_t k = 0; k < ModelParams::kCount; ++k) slots[i].grads[k] = vars.vars[k].grad();
    });

    BatchGradients out;
    const auto tensors = params.tensors();
    for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
        out.grads[k] = Matrix::Zero(tensors[k]->rows(), tensors[k]->cols());
    }
    for (const auto& s : slots) {
        out.loss += s.loss;
        for (std::size_t k = 0; k < ModelParams::kCount; ++k) out.grads[k] += s.grads[k];
    }
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, batch.size()));
    out.loss *= inv;
    for (auto& g : out.grads) g *= inv;
    return out;
}

double evaluation_loss(std::span<const Window> windows, const PropagationOperator& base,
                       const ModelParams& params, const ModelConfig& cfg, int threads) {
    if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto op = eval_operator(base, params.phi);
    std::vector<double> losses(windows.size());
    parallel_for(windows.size(), threads, [&](std::size_t i) {
        const auto& w = windows[i];
        const Matrix pred = forecast(w.history, op, params, cfg, static_cast<int>(w.target.rows()));
        losses[i] = (pred - w.target).squaredNorm() / static_cast<double>(w.target.size());
    });
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

TrainResult train(const SpeedDataset& dataset, const PropagationOperator& base, ModelParams init,
                  const TrainConfig& cfg, const ModelConfig& model_cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    model_cfg.validate();
    if (base.n() != dataset.n() || init.nodes() != dataset.n()) {
        throw ConfigError("train: dataset has " + std::to_string(dataset.n()) + " roads, graph has " +
                          std::to_string(base.n()));
    }
    const int threads = cfg.threads > 0 ? cfg.threads : worker_threads();

    const Matrix values = normalize(dataset);
    auto windows = make_windows(values, dataset, model_cfg.history_steps, model_cfg.horizon_steps,
                                Split::Train);
    const auto n_val = static_cast<std::size_t>(
        std::floor(cfg.val_fraction * static_cast<double>(windows.size())));
    if (windows.size() - n_val < 1) throw DataError("train: no training windows left after hold-out");
    const std::span<const Window> fit(windows.data(), windows.size() - n_val);
    const std::span<const Window> val(windows.data() + fit.size(), n_val);

    TrainResult result{std::move(init), {}};
    ModelParams& params = result.params;
    auto tensors = params.tensors();
    std::vector<Matrix*> trainable(tensors.begin(), tensors.end());
    if (!cfg.train_phi) trainable.erase(trainable.begin() + ModelParams::kPhiIndex);
    std::vector<const Matrix*> trainable_const(trainable.begin(), trainable.end());
    AdamState adam = AdamState::like(trainable_const);

    auto dropout_rng = rng_stream(cfg.seed, "dropout");
    auto shuffle_rng = rng_stream(cfg.seed, "shuffle");
    std::vector<std::size_t> order(fit.size());
    std::vector<const Window*> batch;
    std::vector<const Matrix*> grads;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const double lr = lr_at(epoch, cfg);
        Matrix mask = sample_dropout_mask(dataset.n(), model_cfg.dropout_p, dropout_rng);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            if (cfg.resample_per_batch && begin > 0) {
                mask = sample_dropout_mask(dataset.n(), model_cfg.dropout_p, dropout_rng);
            }
            batch.clear();
            for (std::size_t i = begin; i < end; ++i) batch.push_back(&fit[order[i]]);
            const auto bg = batch_gradients(batch, base, mask, params, model_cfg, threads);
            loss_sum += bg.loss * static_cast<double>(batch.size());

            grads.clear();
            for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
                if (k == ModelParams::kPhiIndex && !cfg.train_phi) continue;
                grads.push_back(&bg.grads[k]);
            }
            adam_step(trainable, grads, adam, lr);
        }
        if (!params.all_finite()) throw NumericalError("train: parameters became non-finite");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.val_loss = evaluation_loss(val, base, params, model_cfg, threads);
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec, params);
    }
    return result;
}

TrainResult train(const SpeedDataset& dataset, const PropagationOperator& base,
                  const TrainConfig& cfg, const ModelConfig& model_cfg, const EpochCallback& on_epoch) {
    model_cfg.validate();
    auto init_rng = rng_stream(cfg.seed, "init");
    return train(dataset, base, ModelParams::init(dataset.n(), model_cfg.hidden, init_rng), cfg,
                 model_cfg, on_epoch);
}

void write_training_log(std::span<const EpochRecord> history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,lr,train_loss,val_loss,wall_ms\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << csv::format_real(r.lr) << ',' << csv::format_real(r.train_loss) << ','
            << csv::format_real(r.val_loss) << ',' << csv::format_real(std::round(r.wall_ms)) << '\n';
    }
}

}  // namespace stgf
