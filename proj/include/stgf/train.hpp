#pragma once

#include "stgf/data.hpp"
#include "stgf/graph.hpp"
#include "stgf/model.hpp"
#include "stgf/optim.hpp"
#include "stgf/rng.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace stgf {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double lr0 = 1e-2;
    double lr_decay = 0.2;
    int decay_every = 25;
    std::uint64_t seed = kDefaultSeed;
    bool train_phi = true;
    bool resample_per_batch = false;  // default: one operator sample per epoch
    double val_fraction = 0.1;        // chronological tail of the training windows
    int threads = 0;                  // 0: worker_threads()

    void validate() const;
};

/// lr0 * lr_decay^floor((epoch - 1) / decay_every), epoch counted from 1.
double lr_at(int epoch, const TrainConfig& cfg);

/// Sum over horizons of squared errors divided by T * n. `preds` holds T
/// columns of n x 1; `targets` is T x n.
ad::Var forecast_loss(std::span<const ad::Var> preds, const Matrix& targets);

struct BatchGradients {
    double loss = 0.0;  // mean window loss
    std::array<Matrix, ModelParams::kCount> grads;  // averaged over the batch
};

/// Forward/backward for every window of the batch against one sampled operator
/// (base + phi) .* scaled_mask. Windows may run in parallel; the reduction is in
/// batch order so results do not depend on the thread count.
BatchGradients batch_gradients(std::span<const Window* const> batch, const PropagationOperator& base,
                               const Matrix& scaled_mask, const ModelParams& params,
                               const ModelConfig& cfg, int threads);

/// Mean forecast loss with the deterministic operator base + phi.
double evaluation_loss(std::span<const Window> windows, const PropagationOperator& base,
                       const ModelParams& params, const ModelConfig& cfg, int threads);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const ModelParams&)>;

/// Epoch loop: sample the dropout operator, iterate shuffled mini-batches of the
/// training windows, one Adam step per batch; lr follows lr_at.
TrainResult train(const SpeedDataset& dataset, const PropagationOperator& base, ModelParams init,
                  const TrainConfig& cfg, const ModelConfig& model_cfg,
                  const EpochCallback& on_epoch = {});

/// Same, with parameters initialised from the "init" stream of cfg.seed.
TrainResult train(const SpeedDataset& dataset, const PropagationOperator& base,
                  const TrainConfig& cfg, const ModelConfig& model_cfg,
                  const EpochCallback& on_epoch = {});

/// CSV with columns epoch,lr,train_loss,val_loss,wall_ms.
void write_training_log(std::span<const EpochRecord> history, const std::filesystem::path& path);

}  // namespace stgf
