#pragma once

#include "stgf/graph.hpp"
#include "stgf/model.hpp"

#include <filesystem>
#include <string>

namespace stgf {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to rebuild the forecaster: config, weights (phi included)
/// and the MAP adjacency the propagation operator is derived from.
struct Checkpoint {
    std::string dataset;
    int interval_minutes = 0;
    ModelConfig model;
    ModelParams params;
    Adjacency graph;

    /// normalize_with_self_loops(graph)
    PropagationOperator base_operator() const;
};

/// JSON with a format/version tag; matrices are row-major arrays of doubles
/// written in shortest round-trip form, so save/load is bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stgf
