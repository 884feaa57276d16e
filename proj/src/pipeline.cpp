#include "stgf/pipeline.hpp"

#include "stgf/error.hpp"
#include "stgf/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

namespace stgf {

namespace {

std::string canonical_name(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

}  // namespace

DatasetDefaults dataset_defaults(std::string_view dataset_name) {
    const auto name = canonical_name(dataset_name);
    if (name == "losloop" || name == "los") return {1e-3, 0.5};
    return {1e-2, 0.1};
}

Adjacency binarize_topology(const Adjacency& adj) {
    adj.validate();
    Adjacency out{(adj.weights.array() > 0.0).cast<double>().matrix()};
    out.weights.diagonal().setZero();
    return out;
}

MapGraph learn_map_graph(const Adjacency& topology, const GvaeConfig& gvae, const GraphLearnConfig& solver,
                         std::optional<double> beta, std::uint64_t seed) {
    const auto edges = binarize_topology(topology);
    MapGraph g;
    auto rng = rng_stream(seed, "gvae");
    auto trained = train_gvae(edges, gvae, rng);
    g.embeddings = std::move(trained.embeddings);
    g.gvae_loss = std::move(trained.loss_curve);
    g.distances = pairwise_distances(g.embeddings);
    g.beta = beta ? *beta : calibrate_beta(g.distances, solver.alpha, edges.density(), solver).beta;
    GraphLearnConfig cfg = solver;
    cfg.beta = g.beta;
    g.learned = learn_graph(g.distances, cfg);
    return g;
}

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Bc: return "Bc";
        case Variant::Bd: return "Bd";
        case Variant::Full: return "full";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    if (s == "Bc" || s == "bc") return Variant::Bc;
    if (s == "Bd" || s == "bd") return Variant::Bd;
    if (s == "full" || s == "Full") return Variant::Full;
    throw UsageError("unknown ablation variant '" + std::string(s) + "' (expected Bc, Bd, full)");
}

void apply_variant(Variant v, TrainConfig& train_cfg, ModelConfig& model_cfg) {
    switch (v) {
        case Variant::Bc:
            train_cfg.train_phi = false;
            model_cfg.dropout_p = 0.0;
            break;
        case Variant::Bd:
            train_cfg.train_phi = true;
            model_cfg.dropout_p = 0.0;
            break;
        case Variant::Full:
            train_cfg.train_phi = true;
            break;
    }
}

SyntheticTraffic make_synthetic_traffic(int nodes, int time_steps, int interval_minutes,
                                        std::uint64_t seed) {
    if (nodes < 3 || time_steps < 10 || interval_minutes < 1) {
        throw ParameterError("synthetic traffic needs >= 3 nodes, >= 10 steps, interval >= 1");
    }
    auto rng = rng_stream(seed, "synthetic");
    const Eigen::Index n = nodes;
    Adjacency topo{Matrix::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = (i + 1) % n;
        topo.weights(i, j) = topo.weights(j, i) = 1.0;
    }
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (int c = 0; c < nodes / 4; ++c) {
        const auto a = pick(rng);
        const auto b = pick(rng);
        if (a != b) topo.weights(a, b) = topo.weights(b, a) = 1.0;
    }

    const Matrix diffuse = normalize_with_self_loops(topo).matrix;
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> level(35.0, 55.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::VectorXd node_phase(n), node_level(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        node_phase(i) = phase(rng);
        node_level(i) = level(rng);
    }
    const double steps_per_day = 24.0 * 60.0 / static_cast<double>(interval_minutes);

    Matrix speeds(time_steps, n);
    Eigen::VectorXd disturbance = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < time_steps; ++t) {
        Eigen::VectorXd shock(n);
        for (Eigen::Index i = 0; i < n; ++i) shock(i) = noise(rng);
        disturbance = 0.85 * (diffuse * disturbance) + 0.5 * shock;
        const double day = 2.0 * std::numbers::pi * static_cast<double>(t) / steps_per_day;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = node_level(i) + 8.0 * std::sin(day + node_phase(i)) + 3.0 * disturbance(i);
            speeds(t, i) = std::max(0.0, v);
        }
    }
    return {std::move(topo), make_dataset("synthetic", interval_minutes, std::move(speeds))};
}

}  // namespace stgf
