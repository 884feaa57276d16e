#pragma once

#include "stgf/autodiff.hpp"
#include "stgf/graph.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace stgf {

struct EmbeddingSet {
    Matrix vectors;  // n x dim

    Eigen::Index n() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }
};

/// Symmetric, nonnegative, zero diagonal.
struct DistanceMatrix {
    Matrix z;

    Eigen::Index n() const { return z.rows(); }
    void validate() const;
};

struct GvaeConfig {
    int epochs = 200;
    double lr = 0.01;
    int hidden = 32;
    int latent_dim = 16;
};

struct GvaeResult {
    EmbeddingSet embeddings;  // posterior means
    std::vector<double> loss_curve;
};

/// Variational graph auto-encoder with identity node features. Edges are the
/// positive entries of `obs`. Returns the encoder means as embeddings.
GvaeResult train_gvae(const Adjacency& obs, const GvaeConfig& cfg, std::mt19937_64& rng);

/// -(1/(2 n^2)) * sum(1 + logvar - mu^2 - exp(logvar)); zero at the prior.
ad::Var gvae_kl(const ad::Var& mu, const ad::Var& logvar);

/// `norm` times the mean sigmoid cross-entropy of `logits` against 0/1 `labels`,
/// positives weighted by `pos_weight`.
ad::Var weighted_bce_with_logits(const ad::Var& logits, const Matrix& labels, double pos_weight,
                                 double norm);

/// sigmoid(z z^T), the inner-product decoder.
Matrix decode_edge_probabilities(const Matrix& z);

DistanceMatrix pairwise_distances(const EmbeddingSet& emb);

struct GraphLearnConfig {
    double alpha = 1.0;   // log-barrier weight on degrees
    double beta = 1.0;    // squared-norm weight
    int max_iters = 5000;
    double tol = 1e-5;    // relative primal change
};

struct GraphLearnResult {
    Adjacency adjacency;
    int iterations = 0;
    double objective = 0.0;
    double last_change = 0.0;
};

/// sum(A .* Z) - alpha * sum_i log(deg_i) + beta * ||A||_F^2; +inf when a degree is <= 0.
double smooth_graph_objective(const DistanceMatrix& dist, const Matrix& adj, double alpha,
                              double beta);

/// Minimises the smooth-graph objective over symmetric nonnegative zero-diagonal
/// adjacencies. Primal-dual forward-backward-forward iterations on the
/// upper-triangular weight vector.
GraphLearnResult learn_graph(const DistanceMatrix& dist, const GraphLearnConfig& cfg);

/// Fraction of off-diagonal entries above rel_threshold * max weight.
double weight_density(const Adjacency& adj, double rel_threshold = 1e-4);

struct BetaCalibration {
    double beta = 0.0;
    double density = 0.0;
    int steps = 0;
};

/// Log-scale bisection on beta until weight_density lies within +-10% (relative)
/// of `target_density`. Other solver settings come from `base`.
BetaCalibration calibrate_beta(const DistanceMatrix& dist, double alpha, double target_density,
                               const GraphLearnConfig& base = {}, double beta_lo = 1e-6,
                               double beta_hi = 1e6);

/// n rows of dim reals preceded by a `dim=<d>` header line.
EmbeddingSet read_embeddings_csv(const std::filesystem::path& path);
void write_embeddings_csv(const EmbeddingSet& emb, const std::filesystem::path& path);

}  // namespace stgf
