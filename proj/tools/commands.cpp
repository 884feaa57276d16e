#include "commands.hpp"

#include "stgf/checkpoint.hpp"
#include "stgf/error.hpp"
#include "stgf/metrics.hpp"
#include "stgf/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace stgf::cli {

namespace {

using json = nlohmann::json;

struct CommonArgs {
    std::string manifest;
    std::string out;
    std::uint64_t seed = kDefaultSeed;
};

struct TrainArgs {
    std::string graph = "learned";
    int hidden = 64;
    std::optional<double> dropout;
    std::string reset_act = "sigmoid";
    int epochs = 100;
    int batch = 32;
    std::optional<double> lr0;
    int history_min = 60;
    int horizon_min = 60;
    int checkpoint_every = 0;
    bool per_batch = false;
    bool freeze_phi = false;
};

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& out) {
    const fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
    return dir;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty() || !fs::exists(path)) {
        throw ConfigError(std::string(what) + " not found: '" + path + "'");
    }
}

Manifest load_manifest(const std::string& path) {
    require_file(path, "manifest");
    return Manifest::load(path);
}

Adjacency load_topology(const Manifest& m) {
    if (m.adjacency.empty() || !fs::exists(m.adjacency)) {
        throw ConfigError("manifest '" + m.name + "' has no readable adjacency file");
    }
    return read_adjacency_csv(m.adjacency);
}

void require_same_n(Eigen::Index a, const char* what_a, Eigen::Index b, const char* what_b) {
    if (a != b) {
        throw ConfigError(std::string(what_a) + " has n=" + std::to_string(a) + " but " + what_b +
                          " has n=" + std::to_string(b));
    }
}

std::vector<int> checked_horizons(const std::vector<int>& horizons) {
    if (horizons.empty()) throw UsageError("--horizons must list at least one horizon");
    return horizons;
}

// Resolves --graph: "obs" uses the road topology itself, anything else is a learned adjacency CSV.
Adjacency resolve_graph(const std::string& graph, const std::string& out_dir, const Manifest& m) {
    if (graph == "obs") return binarize_topology(load_topology(m));
    std::string path = graph;
    if (graph == "learned") path = (fs::path(out_dir) / "learned_adj.csv").string();
    require_file(path, "graph");
    return read_adjacency_csv(path);
}

struct RunSetup {
    ModelConfig model;
    TrainConfig train;
};

RunSetup make_setup(const TrainArgs& a, const SpeedDataset& ds, std::uint64_t seed) {
    const auto defaults = dataset_defaults(ds.name);
    RunSetup s;
    s.model.hidden = a.hidden;
    s.model.dropout_p = a.dropout.value_or(defaults.dropout_p);
    s.model.reset_activation = parse_reset_activation(a.reset_act);
    s.model.history_steps = ds.steps_for_minutes(a.history_min);
    s.model.horizon_steps = ds.steps_for_minutes(a.horizon_min);
    s.model.validate();
    s.train.epochs = a.epochs;
    s.train.batch_size = a.batch;
    s.train.lr0 = a.lr0.value_or(defaults.lr0);
    s.train.seed = seed;
    s.train.resample_per_batch = a.per_batch;
    s.train.train_phi = !a.freeze_phi;
    s.train.validate();
    return s;
}

std::string epoch_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "checkpoint_epoch%03d.json", epoch);
    return buf;
}

// ---------------------------------------------------------------------------

int cmd_embed(const CommonArgs& c, const GvaeConfig& gvae, std::ostream& out) {
    const auto m = load_manifest(c.manifest);
    const auto topo = load_topology(m);
    const auto dir = prepare_out_dir(c.out);
    auto rng = rng_stream(c.seed, "gvae");
    const auto result = train_gvae(binarize_topology(topo), gvae, rng);
    write_embeddings_csv(result.embeddings, dir / "embeddings.csv");
    write_json({{"seed", c.seed},
                {"epochs", gvae.epochs},
                {"lr", gvae.lr},
                {"hidden", gvae.hidden},
                {"latent_dim", gvae.latent_dim},
                {"loss_curve", result.loss_curve}},
               dir / "embeddings.json");
    out << "embeddings: " << result.embeddings.n() << "x" << result.embeddings.dim() << " -> "
        << (dir / "embeddings.csv").string() << '\n';
    return 0;
}

int cmd_learn_graph(const CommonArgs& c, const std::string& embeddings, double alpha,
                    const std::string& beta_arg, GraphLearnConfig solver, std::ostream& out) {
    const auto m = load_manifest(c.manifest);
    require_file(embeddings, "embeddings");
    const auto emb = read_embeddings_csv(embeddings);
    const auto topo = binarize_topology(load_topology(m));
    require_same_n(emb.n(), "embeddings", topo.n(), "adjacency");
    const auto dir = prepare_out_dir(c.out);

    const auto dist = pairwise_distances(emb);
    solver.alpha = alpha;
    if (beta_arg == "auto") {
        solver.beta = calibrate_beta(dist, alpha, topo.density(), solver).beta;
    } else {
        std::istringstream is(beta_arg);
        if (!(is >> solver.beta) || !(solver.beta > 0.0)) {
            throw UsageError("--beta must be a positive number or 'auto'");
        }
    }
    const auto learned = learn_graph(dist, solver);
    write_adjacency_csv(learned.adjacency, dir / "learned_adj.csv");
    write_json({{"alpha", solver.alpha},
                {"beta", solver.beta},
                {"iterations", learned.iterations},
                {"objective", learned.objective},
                {"last_change", learned.last_change},
                {"density", weight_density(learned.adjacency)},
                {"observed_density", topo.density()}},
               dir / "learned_adj.json");
    out << "learned graph: beta=" << solver.beta << " iterations=" << learned.iterations
        << " density=" << weight_density(learned.adjacency) << '\n';
    return 0;
}

int cmd_train(const CommonArgs& c, const TrainArgs& a, std::ostream& out) {
    const auto m = load_manifest(c.manifest);
    const auto ds = m.load_dataset();
    const auto graph = resolve_graph(a.graph, c.out, m);
    require_same_n(graph.n(), "graph", ds.n(), "dataset");
    const auto setup = make_setup(a, ds, c.seed);
    const auto dir = prepare_out_dir(c.out);

    Checkpoint ckpt;
    ckpt.dataset = ds.name;
    ckpt.interval_minutes = ds.interval_minutes;
    ckpt.model = setup.model;
    ckpt.graph = graph;
    const auto base = ckpt.base_operator();

    auto on_epoch = [&](const EpochRecord& rec, const ModelParams& params) {
        out << "epoch " << rec.epoch << " lr=" << rec.lr << " train=" << rec.train_loss
            << " val=" << rec.val_loss << '\n';
        if (a.checkpoint_every > 0 && rec.epoch % a.checkpoint_every == 0) {
            Checkpoint snap = ckpt;
            snap.params = params;
            save_checkpoint(snap, dir / epoch_name(rec.epoch));
        }
    };
    auto result = train(ds, base, setup.train, setup.model, on_epoch);
    ckpt.params = std::move(result.params);
    save_checkpoint(ckpt, dir / "checkpoint.json");
    write_training_log(result.history, dir / "train_log.csv");
    out << "checkpoint -> " << (dir / "checkpoint.json").string() << '\n';
    return 0;
}

int cmd_evaluate(const CommonArgs& c, const std::string& checkpoint, const std::vector<int>& horizons_arg,
                 const std::string& baseline, std::ostream& out) {
    const auto horizons = checked_horizons(horizons_arg);
    if (!baseline.empty() && baseline != "ha") throw UsageError("--baseline accepts only 'ha'");
    require_file(checkpoint, "checkpoint");
    const auto m = load_manifest(c.manifest);
    const auto ckpt = load_checkpoint(checkpoint);
    const auto ds = m.load_dataset();
    require_same_n(ckpt.params.nodes(), "checkpoint", ds.n(), "dataset");
    const auto dir = prepare_out_dir(c.out);

    const auto report = evaluate(ckpt.params, ckpt.model, ckpt.base_operator(), ds, horizons);
    emit_report(report, dir / "report.csv", ReportFormat::Csv);
    emit_report(report, dir / "plotdata.csv", ReportFormat::PlotData);
    for (const auto& h : report.horizons) {
        out << h.horizon_min << " min: rmse=" << h.metrics.rmse << " mae=" << h.metrics.mae
            << " acc=" << h.metrics.acc << '\n';
    }
    if (baseline == "ha") {
        const auto ha = historical_average(ds, ckpt.model.history_steps, horizons);
        emit_report(ha, dir / "report_ha.csv", ReportFormat::Csv);
    }
    return 0;
}

int cmd_ablate(const CommonArgs& c, const TrainArgs& a, const std::vector<std::string>& variant_names,
               const std::vector<int>& horizons_arg, std::ostream& out) {
    if (variant_names.empty()) throw UsageError("--variants must name at least one of Bc, Bd, full");
    std::vector<Variant> variants;
    for (const auto& v : variant_names) variants.push_back(parse_variant(v));
    const auto horizons = checked_horizons(horizons_arg);
    const auto m = load_manifest(c.manifest);
    const auto ds = m.load_dataset();
    const auto graph = resolve_graph(a.graph, c.out, m);
    require_same_n(graph.n(), "graph", ds.n(), "dataset");
    const auto base = normalize_with_self_loops(graph);
    const auto dir = prepare_out_dir(c.out);
    const int horizon = horizons.back();

    std::vector<Metrics> results;
    for (Variant v : variants) {
        auto setup = make_setup(a, ds, c.seed);
        apply_variant(v, setup.train, setup.model);
        const auto trained = train(ds, base, setup.train, setup.model);
        const std::vector<int> one{horizon};
        const auto report = evaluate(trained.params, setup.model, base, ds, one);
        results.push_back(report.horizons.front().metrics);
        out << to_string(v) << ": rmse=" << results.back().rmse << '\n';
    }

    std::ofstream csv(dir / "ablation.csv");
    if (!csv) throw IoError("cannot write ablation.csv");
    csv << "metric";
    for (Variant v : variants) csv << ',' << to_string(v);
    csv << '\n';
    const std::array<std::pair<const char*, double Metrics::*>, 5> rows{
        {{"rmse", &Metrics::rmse}, {"mae", &Metrics::mae}, {"acc", &Metrics::acc}, {"r2", &Metrics::r2},
         {"var", &Metrics::var}}};
    for (const auto& [name, field] : rows) {
        csv << name;
        for (const auto& r : results) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", r.*field);
            csv << ',' << buf;
        }
        csv << '\n';
    }
    return 0;
}

int cmd_synth(const std::string& out_dir, int nodes, int steps, int interval, std::uint64_t seed,
              std::ostream& out) {
    const auto dir = prepare_out_dir(out_dir);
    const auto synth = make_synthetic_traffic(nodes, steps, interval, seed);
    save_speeds(synth.dataset, dir / "speeds.csv");
    write_adjacency_csv(synth.topology, dir / "adj.csv");
    Manifest m;
    m.name = "synthetic";
    m.interval_minutes = interval;
    m.speeds = dir / "speeds.csv";
    m.adjacency = dir / "adj.csv";
    m.speeds_header = HeaderMode::Absent;
    m.save(dir / "manifest.json");
    out << "synthetic dataset -> " << (dir / "manifest.json").string() << '\n';
    return 0;
}

void add_train_flags(CLI::App* sub, TrainArgs& a) {
    sub->add_option("--graph", a.graph, "learned adjacency CSV, 'learned' (<out>/learned_adj.csv) or 'obs'");
    sub->add_option("--hidden", a.hidden, "hidden size")->check(CLI::PositiveNumber);
    sub->add_option("--dropout", a.dropout, "operator dropout probability (dataset default)");
    sub->add_option("--reset-act", a.reset_act, "reset-gate activation")
        ->check(CLI::IsMember({"sigmoid", "identity"}));
    sub->add_option("--epochs", a.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    sub->add_option("--batch", a.batch, "windows per batch")->check(CLI::PositiveNumber);
    sub->add_option("--lr0", a.lr0, "initial learning rate (dataset default)");
    sub->add_option("--history-min", a.history_min, "observed history in minutes");
    sub->add_option("--horizon-min", a.horizon_min, "training rollout in minutes");
    sub->add_option("--checkpoint-every", a.checkpoint_every, "also checkpoint every k epochs");
    sub->add_flag("--per-batch-resample", a.per_batch, "draw a new operator sample per batch");
    sub->add_flag("--freeze-phi", a.freeze_phi, "keep the operator correction at zero");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatio-temporal graph forecasting with a learned, dropout-sampled graph"};
    app.set_config("--config", "", "TOML/INI file of flag values; command-line flags win");
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub, bool manifest_required) {
        auto* opt = sub->add_option("--manifest", common.manifest, "dataset manifest (JSON)");
        if (manifest_required) opt->required();
        sub->add_option("--out", common.out, "output directory")->required();
        sub->add_option("--seed", common.seed, "master seed");
    };

    GvaeConfig gvae;
    auto* embed = app.add_subcommand("embed", "train GVAE node embeddings from the road topology");
    add_common(embed, true);
    embed->add_option("--epochs", gvae.epochs, "GVAE epochs");
    embed->add_option("--latent", gvae.latent_dim, "embedding dimension");

    std::string embeddings;
    double alpha = 1.0;
    std::string beta = "auto";
    GraphLearnConfig solver;
    auto* learn = app.add_subcommand("learn-graph", "solve for the MAP adjacency from embeddings");
    add_common(learn, true);
    learn->add_option("--embeddings", embeddings, "embeddings CSV")->required();
    learn->add_option("--alpha", alpha, "log-barrier weight")->check(CLI::PositiveNumber);
    learn->add_option("--beta", beta, "squared-norm weight or 'auto'");
    learn->add_option("--max-iters", solver.max_iters, "solver iteration cap");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train the forecaster");
    add_common(train_cmd, true);
    add_train_flags(train_cmd, train_args);

    std::string checkpoint;
    std::vector<int> horizons{15, 30, 45, 60};
    std::string baseline;
    auto* eval_cmd = app.add_subcommand("evaluate", "per-horizon metrics on the evaluation split");
    add_common(eval_cmd, true);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
    eval_cmd->add_option("--horizons", horizons, "horizons in minutes")->delimiter(',');
    eval_cmd->add_option("--baseline", baseline, "also evaluate a baseline (ha)");

    std::vector<std::string> variants{"Bc", "Bd", "full"};
    auto* ablate = app.add_subcommand("ablate", "train and compare ablation variants");
    add_common(ablate, true);
    add_train_flags(ablate, train_args);
    ablate->add_option("--variants", variants, "subset of Bc,Bd,full")->delimiter(',');
    ablate->add_option("--horizons", horizons, "horizons in minutes; the last is compared")->delimiter(',');

    int nodes = 12;
    int steps = 600;
    int interval = 15;
    auto* synth = app.add_subcommand("synth", "write a small synthetic dataset and manifest");
    synth->add_option("--out", common.out, "output directory")->required();
    synth->add_option("--nodes", nodes, "road count");
    synth->add_option("--steps", steps, "time steps");
    synth->add_option("--interval", interval, "minutes per step");
    synth->add_option("--seed", common.seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*embed) return cmd_embed(common, gvae, out);
        if (*learn) return cmd_learn_graph(common, embeddings, alpha, beta, solver, out);
        if (*train_cmd) return cmd_train(common, train_args, out);
        if (*eval_cmd) return cmd_evaluate(common, checkpoint, horizons, baseline, out);
        if (*ablate) return cmd_ablate(common, train_args, variants, horizons, out);
        if (*synth) return cmd_synth(common.out, nodes, steps, interval, common.seed, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace stgf::cli
