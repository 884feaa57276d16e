#pragma once

#include "stgf/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <random>

namespace stgf {

/// Square weighted adjacency; row i holds the out-weights of node i.
struct Adjacency {
    Matrix weights;

    Eigen::Index n() const { return weights.rows(); }

    /// Checks squareness and finiteness.
    void validate() const;
    /// Additionally checks 0/1 entries and zero diagonal (observed road topology).
    void validate_topology() const;
    /// Fraction of off-diagonal entries that are nonzero.
    double density() const;
};

/// Matrix multiplied into node features inside a graph convolution.
/// May be asymmetric and signed once the learned correction is added.
struct PropagationOperator {
    Matrix matrix;

    Eigen::Index n() const { return matrix.rows(); }
};

/// D^{-1/2} A D^{-1/2}, D = diag(row sums). Throws DegenerateGraphError on a zero-degree node.
PropagationOperator normalize(const Adjacency& adj);

/// D~^{-1/2} (A + I) D~^{-1/2}, D~ = diag(row sums of A + I).
PropagationOperator normalize_with_self_loops(const Adjacency& adj);

/// Bernoulli keep-mask already scaled by 1/(1-p) (inverted dropout).
Matrix sample_dropout_mask(Eigen::Index n, double p, std::mt19937_64& rng);

/// (base + phi) masked entrywise; differentiable w.r.t. phi.
ad::Var apply_dropout_operator(const PropagationOperator& base, const ad::Var& phi,
                               const Matrix& scaled_mask);

/// Draws a mask with drop probability p and applies it to base + phi.
ad::Var sample_dropout_operator(const PropagationOperator& base, const ad::Var& phi, double p,
                                std::mt19937_64& rng);

/// base + phi, no dropout. Accepts asymmetric phi.
PropagationOperator eval_operator(const PropagationOperator& base, const Matrix& phi);

/// n rows of n comma-separated reals, no header.
Adjacency read_adjacency_csv(const std::filesystem::path& path);
void write_adjacency_csv(const Adjacency& adj, const std::filesystem::path& path);

}  // namespace stgf
