#include "stgf/graph.hpp"

#include "csv.hpp"
#include "stgf/error.hpp"

#include <cmath>

namespace stgf {

void Adjacency::validate() const {
    if (weights.rows() != weights.cols()) {
        throw DimensionError("adjacency must be square, got " + shape_str(weights));
    }
    if (!weights.allFinite()) throw NumericalError("adjacency has non-finite entries");
}

void Adjacency::validate_topology() const {
    validate();
    for (Eigen::Index i = 0; i < n(); ++i) {
        if (weights(i, i) != 0.0) {
            throw DataError("topology has a self loop at node " + std::to_string(i));
        }
        for (Eigen::Index j = 0; j < n(); ++j) {
            const double w = weights(i, j);
            if (w != 0.0 && w != 1.0) {
                throw DataError("topology entry (" + std::to_string(i) + "," + std::to_string(j) +
                                ") is not 0/1");
            }
        }
    }
}

double Adjacency::density() const {
    const auto nn = n();
    if (nn < 2) return 0.0;
    Eigen::Index nz = 0;
    for (Eigen::Index i = 0; i < nn; ++i)
        for (Eigen::Index j = 0; j < nn; ++j)
            if (i != j && weights(i, j) != 0.0) ++nz;
    return static_cast<double>(nz) / static_cast<double>(nn * (nn - 1));
}

namespace {

void require_nonnegative(const Adjacency& adj, const char* who) {
    adj.validate();
    if ((adj.weights.array() < 0.0).any()) {
        throw ContractError(std::string(who) + ": adjacency has negative weights");
    }
}

Matrix symmetric_scale(const Matrix& a) {
    const Eigen::VectorXd inv_sqrt = a.rowwise().sum().array().rsqrt();
    return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

}  // namespace

PropagationOperator normalize(const Adjacency& adj) {
    require_nonnegative(adj, "normalize");
    const Eigen::VectorXd deg = adj.weights.rowwise().sum();
    for (Eigen::Index i = 0; i < deg.size(); ++i) {
        if (!(deg(i) > 0.0)) {
            throw DegenerateGraphError("normalize: node " + std::to_string(i) + " has zero degree");
        }
    }
    return {symmetric_scale(adj.weights)};
}

PropagationOperator normalize_with_self_loops(const Adjacency& adj) {
    require_nonnegative(adj, "normalize_with_self_loops");
    Matrix a = adj.weights;
    a.diagonal().array() += 1.0;
    return {symmetric_scale(a)};
}

Matrix sample_dropout_mask(Eigen::Index n, double p, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ParameterError("dropout probability must lie in [0, 1), got " + std::to_string(p));
    }
    Matrix mask(n, n);
    if (p == 0.0) {
        mask.setOnes();
        return mask;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::bernoulli_distribution keep(1.0 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? keep_scale : 0.0;
    return mask;
}

ad::Var apply_dropout_operator(const PropagationOperator& base, const ad::Var& phi,
                               const Matrix& scaled_mask) {
    if (phi.rows() != base.n() || phi.cols() != base.n() || scaled_mask.rows() != base.n() ||
        scaled_mask.cols() != base.n()) {
        throw DimensionError("dropout operator: base " + shape_str(base.matrix) + ", phi " +
                             shape_str(phi.value()) + ", mask " + shape_str(scaled_mask));
    }
    return ad::mul_const(ad::add(ad::constant(base.matrix), phi), scaled_mask);
}

ad::Var sample_dropout_operator(const PropagationOperator& base, const ad::Var& phi, double p,
                                std::mt19937_64& rng) {
    return apply_dropout_operator(base, phi, sample_dropout_mask(base.n(), p, rng));
}

PropagationOperator eval_operator(const PropagationOperator& base, const Matrix& phi) {
    if (phi.rows() != base.n() || phi.cols() != base.n()) {
        throw DimensionError("eval_operator: base " + shape_str(base.matrix) + " vs phi " +
                             shape_str(phi));
    }
    return {base.matrix + phi};
}

Adjacency read_adjacency_csv(const std::filesystem::path& path) {
    Adjacency adj{csv::read(path, csv::Header::None).values};
    if (adj.weights.rows() != adj.weights.cols()) {
        throw FormatError(path.string() + ": adjacency is " + shape_str(adj.weights) +
                          ", expected square");
    }
    adj.validate();
    return adj;
}

void write_adjacency_csv(const Adjacency& adj, const std::filesystem::path& path) {
    csv::write(path, adj.weights);
}

}  // namespace stgf
