#include "stgf/graph_learn.hpp"

#include "csv.hpp"
#include "stgf/error.hpp"
#include "stgf/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace stgf {

void DistanceMatrix::validate() const {
    if (z.rows() != z.cols()) throw DimensionError("distance matrix must be square, got " + shape_str(z));
    if (!z.allFinite()) throw NumericalError("distance matrix has non-finite entries");
    for (Eigen::Index i = 0; i < n(); ++i) {
        if (z(i, i) != 0.0) throw ContractError("distance matrix has nonzero diagonal at " + std::to_string(i));
        for (Eigen::Index j = 0; j < n(); ++j) {
            if (z(i, j) < 0.0) {
                throw ContractError("distance matrix has negative entry at (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");
            }
            if (z(i, j) != z(j, i)) throw ContractError("distance matrix is not symmetric");
        }
    }
}

// ---------------------------------------------------------------------------
// Graph variational auto-encoder
// ---------------------------------------------------------------------------

ad::Var gvae_kl(const ad::Var& mu, const ad::Var& logvar) {
    const double n = static_cast<double>(mu.rows());
    auto terms = ad::add_scalar(ad::sub(ad::sub(logvar, ad::mul(mu, mu)), ad::exp(logvar)), 1.0);
    return ad::scale(ad::sum(terms), -0.5 / (n * n));
}

ad::Var weighted_bce_with_logits(const ad::Var& logits, const Matrix& labels, double pos_weight,
                                 double norm) {
    if (labels.rows() != logits.rows() || labels.cols() != logits.cols()) {
        throw DimensionError("weighted_bce_with_logits: logits " + shape_str(logits.value()) +
                             " vs labels " + shape_str(labels));
    }
    const auto& x = logits.value().array();
    const auto& y = labels.array();
    // -log(sigmoid(x)) = softplus(-x), -log(1 - sigmoid(x)) = softplus(x)
    auto softplus = [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); };
    const Eigen::ArrayXXd neg_x = -x;
    const Eigen::ArrayXXd per = pos_weight * y * neg_x.unaryExpr(softplus) +
                                (1.0 - y) * x.unaryExpr(softplus);
    const double scale = norm / static_cast<double>(labels.size());
    Matrix out(1, 1);
    out(0, 0) = scale * per.sum();
    return ad::make_node(std::move(out), {logits}, [labels, pos_weight, scale](ad::Node& self) {
        ad::Node& p = *self.parents[0];
        const Eigen::ArrayXXd s = p.value.array().unaryExpr([](double v) {
            return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        });
        const auto& yy = labels.array();
        const Eigen::ArrayXXd d = pos_weight * yy * (s - 1.0) + (1.0 - yy) * s;
        p.grad_ref().array() += (self.grad(0, 0) * scale) * d;
    }, "weighted_bce_with_logits");
}

Matrix decode_edge_probabilities(const Matrix& z) {
    Matrix logits = z * z.transpose();
    return logits.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

namespace {

Matrix glorot(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    return w;
}

}  // namespace

GvaeResult train_gvae(const Adjacency& obs, const GvaeConfig& cfg, std::mt19937_64& rng) {
    obs.validate();
    const Eigen::Index n = obs.n();
    if (cfg.latent_dim < 2) throw ParameterError("train_gvae: latent_dim must be >= 2");
    if (cfg.hidden < 1 || cfg.epochs < 0) throw ParameterError("train_gvae: bad hidden/epochs");

    Adjacency edges{(obs.weights.array() > 0.0).cast<double>().matrix()};
    edges.weights.diagonal().setZero();
    const double edge_count = edges.weights.sum();
    if (n == 0 || edge_count == 0.0) {
        throw DegenerateGraphError("train_gvae: graph has no edges");
    }

    const Matrix a_hat = normalize_with_self_loops(edges).matrix;
    Matrix labels = edges.weights;
    labels.diagonal().setOnes();
    const double total = static_cast<double>(n) * static_cast<double>(n);
    const double positives = labels.sum();
    // a complete graph has no negative pairs to balance against
    const bool complete = positives >= total;
    const double pos_weight = complete ? 1.0 : (total - positives) / positives;
    const double norm = complete ? 1.0 : total / (2.0 * (total - positives));

    // identity features: the first layer reduces to a_hat * W0
    std::array<Matrix, 3> weights{glorot(n, cfg.hidden, rng), glorot(cfg.hidden, cfg.latent_dim, rng),
                                  glorot(cfg.hidden, cfg.latent_dim, rng)};
    std::array<Matrix*, 3> ptrs{&weights[0], &weights[1], &weights[2]};
    AdamState adam = AdamState::like(std::array<const Matrix*, 3>{ptrs[0], ptrs[1], ptrs[2]});
    std::normal_distribution<double> gauss(0.0, 1.0);

    GvaeResult result;
    result.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs));
    auto a = ad::constant(a_hat);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto w0 = ad::param(weights[0]);
        auto w_mu = ad::param(weights[1]);
        auto w_lv = ad::param(weights[2]);
        auto hidden = ad::relu(ad::matmul(a, w0));
        auto ah = ad::matmul(a, hidden);
        auto mu = ad::matmul(ah, w_mu);
        auto logvar = ad::matmul(ah, w_lv);
        Matrix eps(n, cfg.latent_dim);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);
        auto z = ad::add(mu, ad::mul_const(ad::exp(ad::scale(logvar, 0.5)), eps));
        auto logits = ad::matmul(z, ad::transpose(z));
        auto loss = ad::add(weighted_bce_with_logits(logits, labels, pos_weight, norm),
                            gvae_kl(mu, logvar));
        ad::backward(loss);
        result.loss_curve.push_back(loss.value()(0, 0));
        const std::array<const Matrix*, 3> grads{&w0.grad(), &w_mu.grad(), &w_lv.grad()};
        adam_step(ptrs, grads, adam, cfg.lr);
    }

    const Matrix hidden = (a_hat * weights[0]).cwiseMax(0.0);
    result.embeddings.vectors = a_hat * hidden * weights[1];
    return result;
}

// ---------------------------------------------------------------------------
// Smooth graph learning
// ---------------------------------------------------------------------------

DistanceMatrix pairwise_distances(const EmbeddingSet& emb) {
    const Eigen::Index n = emb.n();
    DistanceMatrix d{Matrix::Zero(n, n)};
    for (Eigen::Index p = 0; p < n; ++p) {
        for (Eigen::Index q = p + 1; q < n; ++q) {
            const double v = (emb.vectors.row(p) - emb.vectors.row(q)).squaredNorm();
            d.z(p, q) = v;
            d.z(q, p) = v;
        }
    }
    return d;
}

double smooth_graph_objective(const DistanceMatrix& dist, const Matrix& adj, double alpha,
                              double beta) {
    const Eigen::VectorXd deg = adj.rowwise().sum();
    if ((deg.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    return adj.cwiseProduct(dist.z).sum() - alpha * deg.array().log().sum() +
           beta * adj.squaredNorm();
}

namespace {

// Upper-triangular edge list and the degree operator S (w -> A 1).
struct EdgeIndex {
    Eigen::Index n = 0;
    std::vector<Eigen::Index> src, dst;

    explicit EdgeIndex(Eigen::Index nodes) : n(nodes) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                src.push_back(i);
                dst.push_back(j);
            }
    }
    std::size_t size() const { return src.size(); }

    void degrees(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
        out.setZero(n);
        for (std::size_t k = 0; k < size(); ++k) {
            out(src[k]) += w(k);
            out(dst[k]) += w(k);
        }
    }
    void adjoint(const Eigen::VectorXd& d, Eigen::VectorXd& out) const {
        out.resize(static_cast<Eigen::Index>(size()));
        for (std::size_t k = 0; k < size(); ++k) out(k) = d(src[k]) + d(dst[k]);
    }
};

}  // namespace

GraphLearnResult learn_graph(const DistanceMatrix& dist, const GraphLearnConfig& cfg) {
    dist.validate();
    if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0) || !(cfg.tol > 0.0) || cfg.max_iters < 1) {
        throw ParameterError("learn_graph: alpha, beta, tol must be > 0 and max_iters >= 1");
    }
    const Eigen::Index n = dist.n();
    if (n < 2) throw DegenerateGraphError("learn_graph: need at least two nodes");

    const EdgeIndex edges(n);
    const auto m = static_cast<Eigen::Index>(edges.size());
    Eigen::VectorXd z(m);
    for (Eigen::Index k = 0; k < m; ++k) z(k) = dist.z(edges.src[k], edges.dst[k]);

    // objective 2 z'w + 2 beta ||w||^2 - alpha sum log(Sw), w >= 0.
    // With w = sqrt(alpha/beta) s u it becomes 2 z''u - sum log(Su) + 2 s^2 ||u||^2,
    // z'' = s z / sqrt(alpha beta). s shrinks large distances so that nearest
    // neighbours sit at O(1); primal and dual iterates then live on the same scale.
    z /= std::sqrt(cfg.alpha * cfg.beta);
    double nearest = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) best = std::min(best, dist.z(i, j));
        nearest += best;
    }
    nearest /= static_cast<double>(n) * std::sqrt(cfg.alpha * cfg.beta);
    const double s = 1.0 / std::max(1.0, nearest);
    z *= s;
    const double w_scale = std::sqrt(cfg.alpha / cfg.beta) * s;
    const double lipschitz = 4.0 * s * s;
    const double s_norm = std::sqrt(2.0 * static_cast<double>(n - 1));
    const double gamma = 0.95 / (lipschitz + s_norm);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sw(n), stv(m), y(m), y_dual(n), p(m), p_dual(n), q(m), q_dual(n), w_next(m), sp(n);

    // prox of gamma * conj(-log) via Moreau on the barrier's own prox
    // prox_{gamma(-log)}(d) = (d + sqrt(d^2 + 4 gamma)) / 2
    auto dual_prox = [&](const Eigen::VectorXd& d, Eigen::VectorXd& out) {
        out = d.array() - ((d.array() + (d.array().square() + 4.0 * gamma).sqrt()) * 0.5);
    };

    GraphLearnResult result;
    double change = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        edges.degrees(w, sw);
        edges.adjoint(v, stv);
        y = w - gamma * (lipschitz * w + stv);
        y_dual = v + gamma * sw;
        p = (y - 2.0 * gamma * z).cwiseMax(0.0);
        dual_prox(y_dual, p_dual);
        edges.adjoint(p_dual, stv);
        q = p - gamma * (lipschitz * p + stv);
        edges.degrees(p, sp);
        q_dual = p_dual + gamma * sp;
        w_next = w - y + q;
        v = v - y_dual + q_dual;

        const double denom = std::max(w_next.norm(), std::numeric_limits<double>::min());
        change = (w_next - w).norm() / denom;
        w.swap(w_next);
        if (!w.allFinite()) throw NumericalError("learn_graph: iterate became non-finite");
        if (change < cfg.tol) {
            ++it;
            break;
        }
    }
    result.iterations = it;
    result.last_change = change;
    if (!(change < cfg.tol)) {
        throw ConvergenceError("learn_graph: no convergence after " + std::to_string(cfg.max_iters) +
                                   " iterations, last relative change " + std::to_string(change),
                               change);
    }

    // report the projected point: w itself is not feasible until the limit
    w = p * w_scale;
    Matrix adj = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < m; ++k) {
        adj(edges.src[k], edges.dst[k]) = w(k);
        adj(edges.dst[k], edges.src[k]) = w(k);
    }
    const Eigen::VectorXd deg = adj.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(deg(i) > 0.0)) {
            throw ConvergenceError("learn_graph: node " + std::to_string(i) + " ended with zero degree",
                                   change);
        }
    }
    result.adjacency.weights = std::move(adj);
    result.objective = smooth_graph_objective(dist, result.adjacency.weights, cfg.alpha, cfg.beta);
    return result;
}

double weight_density(const Adjacency& adj, double rel_threshold) {
    const Eigen::Index n = adj.n();
    if (n < 2) return 0.0;
    Matrix off = adj.weights;
    off.diagonal().setZero();
    const double cutoff = rel_threshold * off.maxCoeff();
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && off(i, j) > cutoff) ++count;
    return static_cast<double>(count) / static_cast<double>(n * (n - 1));
}

BetaCalibration calibrate_beta(const DistanceMatrix& dist, double alpha, double target_density,
                               const GraphLearnConfig& base, double beta_lo, double beta_hi) {
    if (!(target_density > 0.0 && target_density <= 1.0)) {
        throw ParameterError("calibrate_beta: target density must lie in (0, 1]");
    }
    if (!(beta_lo > 0.0 && beta_hi > beta_lo)) {
        throw ParameterError("calibrate_beta: need 0 < beta_lo < beta_hi");
    }
    GraphLearnConfig cfg = base;
    cfg.alpha = alpha;
    auto density_at = [&](double beta) {
        cfg.beta = beta;
        return weight_density(learn_graph(dist, cfg).adjacency);
    };
    const double slack = 0.1 * target_density;
    auto close = [&](double d) { return std::abs(d - target_density) <= slack; };

    // density grows with beta: a larger quadratic weight spreads mass over more edges
    const double d_lo = density_at(beta_lo);
    if (close(d_lo) && target_density <= d_lo) return {beta_lo, d_lo, 1};
    const double d_hi = density_at(beta_hi);
    if (close(d_hi) && target_density >= d_hi) return {beta_hi, d_hi, 2};
    if (target_density < d_lo || target_density > d_hi) {
        throw CalibrationError("calibrate_beta: target density " + std::to_string(target_density) +
                               " outside bracket range [" + std::to_string(d_lo) + ", " +
                               std::to_string(d_hi) + "]");
    }

    double lo = std::log(beta_lo);
    double hi = std::log(beta_hi);
    for (int step = 1; step <= 40; ++step) {
        const double mid = 0.5 * (lo + hi);
        const double d = density_at(std::exp(mid));
        if (close(d)) return {std::exp(mid), d, step + 2};
        if (d < target_density) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw CalibrationError("calibrate_beta: no beta reached density " +
                           std::to_string(target_density) + " within 40 bisection steps");
}

EmbeddingSet read_embeddings_csv(const std::filesystem::path& path) {
    auto table = csv::read(path, csv::Header::Always);
    if (!table.header || table.header->rfind("dim=", 0) != 0) {
        throw FormatError(path.string() + ": missing dim=<d> header");
    }
    const auto dim = csv::parse_real(std::string_view(*table.header).substr(4));
    if (!dim || *dim != static_cast<double>(table.values.cols())) {
        throw FormatError(path.string() + ": header dimension does not match column count");
    }
    return {std::move(table.values)};
}

void write_embeddings_csv(const EmbeddingSet& emb, const std::filesystem::path& path) {
    csv::write(path, emb.vectors, "dim=" + std::to_string(emb.dim()));
}

}  // namespace stgf
