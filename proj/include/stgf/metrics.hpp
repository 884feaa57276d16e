#pragma once

#include "stgf/data.hpp"
#include "stgf/graph.hpp"
#include "stgf/model.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace stgf {

struct Metrics {
    double rmse = 0.0;
    double mae = 0.0;
    double acc = 0.0;  // 1 - ||truth - pred||_F / ||truth||_F
    double r2 = 0.0;
    double var = 0.0;  // explained variance
};

/// All five metrics pooled over every entry. Throws DataError when truth is
/// constant (R^2 and explained variance undefined).
Metrics metrics(const Matrix& pred, const Matrix& truth);

/// Same, but constant truth yields NaN for R^2 and VAR instead of throwing.
Metrics report_metrics(const Matrix& pred, const Matrix& truth);

struct HorizonResult {
    int horizon_min = 0;
    int step = 0;       // 1-based rollout step
    Metrics metrics;    // denormalised units
    Matrix pred;        // windows x n, raw units
    Matrix truth;       // windows x n, raw units
};

struct ForecastReport {
    int interval_minutes = 0;
    std::vector<Eigen::Index> target_start;  // per window: time row of step 1
    std::vector<HorizonResult> horizons;
};

/// Rolls the model out with base + phi (no dropout) over every evaluation window.
ForecastReport evaluate(const ModelParams& params, const ModelConfig& cfg,
                        const PropagationOperator& base, const SpeedDataset& dataset,
                        std::span<const int> horizons_min, int threads = 0);

/// Baseline predicting the mean of the window's history for every future step.
ForecastReport historical_average(const SpeedDataset& dataset, int history_steps,
                                  std::span<const int> horizons_min);

enum class ReportFormat { Csv, PlotData };

/// Csv: horizon_min,rmse,mae,acc,r2,var with four decimals, one row per horizon.
/// PlotData: timestamp,node,truth,pred,horizon_min, one row per window/horizon/node.
void emit_report(const ForecastReport& report, const std::filesystem::path& path, ReportFormat format);

struct ReportRow {
    int horizon_min = 0;
    Metrics metrics;
};
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

}  // namespace stgf
