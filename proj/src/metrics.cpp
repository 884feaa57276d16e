#include "stgf/metrics.hpp"

#include "csv.hpp"
#include "stgf/error.hpp"
#include "stgf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace stgf {

namespace {

Metrics pooled(const Matrix& pred, const Matrix& truth, bool strict) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
        throw DimensionError("metrics: prediction " + shape_str(pred) + " vs truth " + shape_str(truth));
    }
    if (truth.size() == 0) throw DataError("metrics: empty input");
    const double count = static_cast<double>(truth.size());
    const Eigen::ArrayXXd err = (truth - pred).array();
    const Eigen::ArrayXXd centered = truth.array() - truth.mean();
    const double ss_tot = centered.square().sum();
    if (ss_tot == 0.0 && strict) throw DataError("metrics: constant truth leaves R^2 and VAR undefined");

    Metrics m;
    m.rmse = std::sqrt(err.square().sum() / count);
    m.mae = err.abs().sum() / count;
    m.acc = 1.0 - std::sqrt(err.square().sum()) / truth.norm();
    m.r2 = 1.0 - err.square().sum() / ss_tot;
    const double err_var = (err - err.mean()).square().sum() / count;
    m.var = 1.0 - err_var / (ss_tot / count);
    if (ss_tot == 0.0) m.r2 = m.var = std::numeric_limits<double>::quiet_NaN();
    return m;
}

}  // namespace

Metrics metrics(const Matrix& pred, const Matrix& truth) { return pooled(pred, truth, true); }

Metrics report_metrics(const Matrix& pred, const Matrix& truth) { return pooled(pred, truth, false); }

namespace {

std::vector<int> steps_for(const SpeedDataset& ds, std::span<const int> horizons_min) {
    std::vector<int> steps;
    steps.reserve(horizons_min.size());
    for (int h : horizons_min) steps.push_back(ds.steps_for_minutes(h));
    return steps;
}

ForecastReport assemble(const SpeedDataset& ds, const std::vector<Window>& windows,
                        const std::vector<Matrix>& forecasts, std::span<const int> horizons_min,
                        const std::vector<int>& steps, int history_steps) {
    ForecastReport report;
    report.interval_minutes = ds.interval_minutes;
    report.target_start.reserve(windows.size());
    for (const auto& w : windows) report.target_start.push_back(w.start_index + history_steps);

    const auto rows = static_cast<Eigen::Index>(windows.size());
    for (std::size_t h = 0; h < steps.size(); ++h) {
        HorizonResult r;
        r.horizon_min = horizons_min[h];
        r.step = steps[h];
        r.pred.resize(rows, ds.n());
        r.truth.resize(rows, ds.n());
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& w = windows[static_cast<std::size_t>(i)];
            r.pred.row(i) = forecasts[static_cast<std::size_t>(i)].row(r.step - 1);
            r.truth.row(i) = ds.speeds.row(w.start_index + history_steps + r.step - 1);
        }
        r.metrics = report_metrics(r.pred, r.truth);
        report.horizons.push_back(std::move(r));
    }
    return report;
}

}  // namespace

ForecastReport evaluate(const ModelParams& params, const ModelConfig& cfg,
                        const PropagationOperator& base, const SpeedDataset& dataset,
                        std::span<const int> horizons_min, int threads) {
    cfg.validate();
    if (params.nodes() != dataset.n() || base.n() != dataset.n()) {
        throw ConfigError("evaluate: model has " + std::to_string(params.nodes()) +
                          " roads, dataset has " + std::to_string(dataset.n()));
    }
    const auto steps = steps_for(dataset, horizons_min);
    const int max_step = steps.empty() ? 1 : *std::max_element(steps.begin(), steps.end());
    if (max_step > cfg.horizon_steps) {
        throw ParameterError("evaluate: horizon of " + std::to_string(max_step) +
                             " steps exceeds the model's " + std::to_string(cfg.horizon_steps));
    }
    const Matrix values = normalize(dataset);
    const auto windows = make_windows(values, dataset, cfg.history_steps, max_step, Split::Eval);
    const auto op = eval_operator(base, params.phi);
    std::vector<Matrix> forecasts(windows.size());
    parallel_for(windows.size(), threads > 0 ? threads : worker_threads(), [&](std::size_t i) {
        forecasts[i] = denormalize(forecast(windows[i].history, op, params, cfg, max_step), dataset);
    });
    return assemble(dataset, windows, forecasts, horizons_min, steps, cfg.history_steps);
}

ForecastReport historical_average(const SpeedDataset& dataset, int history_steps,
                                  std::span<const int> horizons_min) {
    const auto steps = steps_for(dataset, horizons_min);
    const int max_step = steps.empty() ? 1 : *std::max_element(steps.begin(), steps.end());
    const auto windows = make_windows(dataset.speeds, dataset, history_steps, max_step, Split::Eval);
    std::vector<Matrix> forecasts;
    forecasts.reserve(windows.size());
    for (const auto& w : windows) {
        const Eigen::RowVectorXd mean = w.history.colwise().mean();
        forecasts.push_back(mean.replicate(max_step, 1));
    }
    return assemble(dataset, windows, forecasts, horizons_min, steps, history_steps);
}

namespace {

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

void emit_report(const ForecastReport& report, const std::filesystem::path& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    if (format == ReportFormat::Csv) {
        out << "horizon_min,rmse,mae,acc,r2,var\n";
        for (const auto& h : report.horizons) {
            const auto& m = h.metrics;
            out << h.horizon_min << ',' << fixed4(m.rmse) << ',' << fixed4(m.mae) << ','
                << fixed4(m.acc) << ',' << fixed4(m.r2) << ',' << fixed4(m.var) << '\n';
        }
    } else {
        out << "timestamp,node,truth,pred,horizon_min\n";
        for (const auto& h : report.horizons) {
            for (Eigen::Index w = 0; w < h.pred.rows(); ++w) {
                const auto ts = report.target_start[static_cast<std::size_t>(w)] + h.step - 1;
                for (Eigen::Index node = 0; node < h.pred.cols(); ++node) {
                    out << ts << ',' << node << ',' << csv::format_real(h.truth(w, node)) << ','
                        << csv::format_real(h.pred(w, node)) << ',' << h.horizon_min << '\n';
                }
            }
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ReportRow> read_report_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path, csv::Header::Always);
    if (!table.header || *table.header != "horizon_min,rmse,mae,acc,r2,var") {
        throw FormatError(path.string() + ": not a metric report");
    }
    std::vector<ReportRow> rows;
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        if (table.values.cols() != 6) throw FormatError(path.string() + ": expected 6 columns");
        const auto v = table.values.row(r);
        rows.push_back({static_cast<int>(v(0)), {v(1), v(2), v(3), v(4), v(5)}});
    }
    return rows;
}

}  // namespace stgf
