#pragma once

// End-to-end helpers shared by the CLI, the acceptance suite and the bindings.

#include "stgf/data.hpp"
#include "stgf/graph.hpp"
#include "stgf/graph_learn.hpp"
#include "stgf/model.hpp"
#include "stgf/train.hpp"

#include <cstdint>
#include <optional>
#include <string_view>

namespace stgf {

struct DatasetDefaults {
    double lr0 = 1e-2;
    double dropout_p = 0.1;
};

/// SZ-taxi: lr0 1e-2, dropout 0.1. Los-loop: lr0 1e-3, dropout 0.5. Others get
/// the SZ-taxi values.
DatasetDefaults dataset_defaults(std::string_view dataset_name);

/// Treats any positive entry as an edge; drops self loops.
Adjacency binarize_topology(const Adjacency& adj);

struct MapGraph {
    EmbeddingSet embeddings;
    std::vector<double> gvae_loss;
    DistanceMatrix distances;
    double beta = 0.0;
    GraphLearnResult learned;
};

/// Topology -> GVAE embeddings -> distances -> smooth-graph adjacency. With no
/// beta given it is calibrated against the topology's edge density.
MapGraph learn_map_graph(const Adjacency& topology, const GvaeConfig& gvae, const GraphLearnConfig& solver,
                         std::optional<double> beta, std::uint64_t seed);

enum class Variant { Bc, Bd, Full };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

/// Bc: phi frozen at zero, no dropout. Bd: phi trained, no dropout. Full: as configured.
void apply_variant(Variant v, TrainConfig& train_cfg, ModelConfig& model_cfg);

struct SyntheticTraffic {
    Adjacency topology;
    SpeedDataset dataset;
};

/// Ring road network with chords; speeds follow a daily profile plus an
/// autoregressive disturbance that diffuses along the roads.
SyntheticTraffic make_synthetic_traffic(int nodes, int time_steps, int interval_minutes,
                                        std::uint64_t seed);

}  // namespace stgf
