#include "commands.hpp"

#include "stgf/checkpoint.hpp"
#include "stgf/error.hpp"
#include "stgf/graph_learn.hpp"
#include "stgf/metrics.hpp"
#include "stgf/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>

namespace py = pybind11;
using namespace stgf;

namespace {

py::dict metrics_dict(const Metrics& m) {
    py::dict d;
    d["rmse"] = m.rmse;
    d["mae"] = m.mae;
    d["acc"] = m.acc;
    d["r2"] = m.r2;
    d["var"] = m.var;
    return d;
}

py::list report_list(const ForecastReport& r) {
    py::list rows;
    for (const auto& h : r.horizons) {
        py::dict d = metrics_dict(h.metrics);
        d["horizon_min"] = h.horizon_min;
        d["step"] = h.step;
        d["pred"] = h.pred;
        d["truth"] = h.truth;
        rows.append(d);
    }
    return rows;
}

SpeedDataset dataset_from(const Matrix& speeds, int interval_minutes, const std::string& name) {
    return make_dataset(name, interval_minutes, speeds);
}

Checkpoint fit(const Matrix& speeds, const Matrix& adjacency, int interval_minutes, const std::string& name,
               int hidden, std::optional<double> dropout, const std::string& reset_act, int history_minutes,
               int horizon_minutes, int epochs, int batch, std::optional<double> lr0, std::uint64_t seed,
               bool train_phi, int threads) {
    const auto ds = dataset_from(speeds, interval_minutes, name);
    const Adjacency graph{adjacency};
    graph.validate();
    if (graph.n() != ds.n()) {
        throw ConfigError("graph has n=" + std::to_string(graph.n()) + " but dataset has n=" + std::to_string(ds.n()));
    }
    const auto defaults = dataset_defaults(name);
    Checkpoint ckpt;
    ckpt.dataset = name;
    ckpt.interval_minutes = interval_minutes;
    ckpt.model.hidden = hidden;
    ckpt.model.dropout_p = dropout.value_or(defaults.dropout_p);
    ckpt.model.reset_activation = parse_reset_activation(reset_act);
    ckpt.model.history_steps = ds.steps_for_minutes(history_minutes);
    ckpt.model.horizon_steps = ds.steps_for_minutes(horizon_minutes);
    ckpt.graph = graph;
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.lr0 = lr0.value_or(defaults.lr0);
    cfg.seed = seed;
    cfg.train_phi = train_phi;
    cfg.threads = threads;
    py::gil_scoped_release release;
    ckpt.params = train(ds, ckpt.base_operator(), cfg, ckpt.model).params;
    return ckpt;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spatio-temporal graph forecasting core";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.attr("DEFAULT_SEED") = kDefaultSeed;

    m.def("normalize", [](const Matrix& a) { return normalize({a}).matrix; }, py::arg("adjacency"),
          "D^-1/2 A D^-1/2");
    m.def("normalize_with_self_loops", [](const Matrix& a) { return normalize_with_self_loops({a}).matrix; },
          py::arg("adjacency"), "D~^-1/2 (A + I) D~^-1/2");
    m.def("sample_dropout_operator",
          [](const Matrix& base, const Matrix& phi, double p, std::uint64_t seed) {
              std::mt19937_64 rng(seed);
              return sample_dropout_operator({base}, ad::constant(phi), p, rng).value();
          },
          py::arg("base"), py::arg("phi"), py::arg("p"), py::arg("seed"));

    m.def("pairwise_distances", [](const Matrix& e) { return pairwise_distances({e}).z; }, py::arg("embeddings"));
    m.def("train_gvae",
          [](const Matrix& adjacency, int epochs, double lr, int hidden, int latent_dim, std::uint64_t seed) {
              auto rng = rng_stream(seed, "gvae");
              const auto r = train_gvae({adjacency}, {epochs, lr, hidden, latent_dim}, rng);
              return py::make_tuple(r.embeddings.vectors, r.loss_curve);
          },
          py::arg("adjacency"), py::arg("epochs") = 200, py::arg("lr") = 0.01, py::arg("hidden") = 32,
          py::arg("latent_dim") = 16, py::arg("seed") = kDefaultSeed,
          "Returns (embeddings, loss_curve).");
    m.def("learn_graph",
          [](const Matrix& z, double alpha, double beta, int max_iters, double tol) {
              const auto r = learn_graph({z}, {alpha, beta, max_iters, tol});
              py::dict d;
              d["adjacency"] = r.adjacency.weights;
              d["iterations"] = r.iterations;
              d["objective"] = r.objective;
              d["last_change"] = r.last_change;
              return d;
          },
          py::arg("distances"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0, py::arg("max_iters") = 5000,
          py::arg("tol") = 1e-5);
    m.def("smooth_graph_objective",
          [](const Matrix& z, const Matrix& a, double alpha, double beta) {
              return smooth_graph_objective({z}, a, alpha, beta);
          },
          py::arg("distances"), py::arg("adjacency"), py::arg("alpha"), py::arg("beta"));
    m.def("calibrate_beta",
          [](const Matrix& z, double alpha, double target_density) {
              return calibrate_beta({z}, alpha, target_density).beta;
          },
          py::arg("distances"), py::arg("alpha"), py::arg("target_density"));
    m.def("learn_map_graph",
          [](const Matrix& topology, std::optional<double> beta, double alpha, int gvae_epochs, std::uint64_t seed) {
              GvaeConfig gvae;
              gvae.epochs = gvae_epochs;
              GraphLearnConfig solver;
              solver.alpha = alpha;
              MapGraph g;
              {
                  py::gil_scoped_release release;
                  g = learn_map_graph({topology}, gvae, solver, beta, seed);
              }
              py::dict d;
              d["adjacency"] = g.learned.adjacency.weights;
              d["embeddings"] = g.embeddings.vectors;
              d["beta"] = g.beta;
              d["gvae_loss"] = g.gvae_loss;
              d["iterations"] = g.learned.iterations;
              return d;
          },
          py::arg("topology"), py::arg("beta") = py::none(), py::arg("alpha") = 1.0, py::arg("gvae_epochs") = 200,
          py::arg("seed") = kDefaultSeed, "Topology to embeddings to a learned weighted adjacency.");
    m.def("weight_density", [](const Matrix& a) { return weight_density({a}); }, py::arg("adjacency"));

    m.def("metrics", [](const Matrix& pred, const Matrix& truth) { return metrics_dict(metrics(pred, truth)); },
          py::arg("pred"), py::arg("truth"));
    m.def("historical_average",
          [](const Matrix& speeds, int interval_minutes, int history_steps, const std::vector<int>& horizons) {
              return report_list(historical_average(dataset_from(speeds, interval_minutes, ""), history_steps, horizons));
          },
          py::arg("speeds"), py::arg("interval_minutes"), py::arg("history_steps"),
          py::arg("horizons") = std::vector<int>{15, 30, 45, 60});

    m.def("synthetic_traffic",
          [](int nodes, int steps, int interval_minutes, std::uint64_t seed) {
              const auto s = make_synthetic_traffic(nodes, steps, interval_minutes, seed);
              return py::make_tuple(s.dataset.speeds, s.topology.weights);
          },
          py::arg("nodes"), py::arg("steps"), py::arg("interval_minutes") = 15, py::arg("seed") = kDefaultSeed,
          "Returns (speeds time x n, topology n x n).");

    py::class_<Checkpoint>(m, "Model", "Trained forecaster together with its graph")
        .def_property_readonly("dataset", [](const Checkpoint& c) { return c.dataset; })
        .def_property_readonly("interval_minutes", [](const Checkpoint& c) { return c.interval_minutes; })
        .def_property_readonly("hidden", [](const Checkpoint& c) { return c.model.hidden; })
        .def_property_readonly("dropout", [](const Checkpoint& c) { return c.model.dropout_p; })
        .def_property_readonly("history_steps", [](const Checkpoint& c) { return c.model.history_steps; })
        .def_property_readonly("horizon_steps", [](const Checkpoint& c) { return c.model.horizon_steps; })
        .def_property_readonly("phi", [](const Checkpoint& c) { return c.params.phi; })
        .def_property_readonly("graph", [](const Checkpoint& c) { return c.graph.weights; })
        .def("forecast",
             [](const Checkpoint& c, const Matrix& history, int horizon) {
                 const auto op = eval_operator(c.base_operator(), c.params.phi);
                 return forecast(history, op, c.params, c.model, horizon);
             },
             py::arg("history"), py::arg("horizon"), "Normalised history (t x n) to a T x n forecast.")
        .def("evaluate",
             [](const Checkpoint& c, const Matrix& speeds, const std::vector<int>& horizons) {
                 const auto ds = dataset_from(speeds, c.interval_minutes, c.dataset);
                 ForecastReport r;
                 {
                     py::gil_scoped_release release;
                     r = evaluate(c.params, c.model, c.base_operator(), ds, horizons);
                 }
                 return report_list(r);
             },
             py::arg("speeds"), py::arg("horizons") = std::vector<int>{15, 30, 45, 60})
        .def("save", [](const Checkpoint& c, const std::filesystem::path& p) { save_checkpoint(c, p); }, py::arg("path"));

    m.def("load_model", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"));
    m.def("fit", &fit, py::arg("speeds"), py::arg("adjacency"), py::arg("interval_minutes") = 15,
          py::arg("name") = "", py::arg("hidden") = 64, py::arg("dropout") = py::none(),
          py::arg("reset_act") = "sigmoid", py::arg("history_minutes") = 60, py::arg("horizon_minutes") = 60,
          py::arg("epochs") = 100, py::arg("batch") = 32, py::arg("lr0") = py::none(),
          py::arg("seed") = kDefaultSeed, py::arg("train_phi") = true, py::arg("threads") = 0,
          "Trains the forecaster on raw speeds over the given (already learned) adjacency.");

    m.def("run_cli",
          [](const std::vector<std::string>& args) {
              std::vector<const char*> argv{"stgf"};
              for (const auto& a : args) argv.push_back(a.c_str());
              return cli::run(static_cast<int>(argv.size()), argv.data(), std::cout, std::cerr);
          },
          py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
