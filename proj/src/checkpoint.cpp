#include "stgf/checkpoint.hpp"

#include "stgf/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace stgf {

namespace {

using json = nlohmann::json;

json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()},
            {"cols", m.cols()},
            {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j, const std::string& what) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
        throw FormatError("checkpoint: " + what + " data length does not match its shape");
    }
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

}  // namespace

PropagationOperator Checkpoint::base_operator() const { return normalize_with_self_loops(graph); }

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    json j;
    j["format"] = "stgf-checkpoint";
    j["version"] = kCheckpointVersion;
    j["dataset"] = ckpt.dataset;
    j["interval_minutes"] = ckpt.interval_minutes;
    j["model"] = {{"hidden", ckpt.model.hidden},
                  {"dropout_p", ckpt.model.dropout_p},
                  {"reset_activation", std::string(to_string(ckpt.model.reset_activation))},
                  {"history_steps", ckpt.model.history_steps},
                  {"horizon_steps", ckpt.model.horizon_steps}};
    json params = json::object();
    const auto tensors = ckpt.params.tensors();
    for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
        params[std::string(ModelParams::names()[k])] = matrix_to_json(*tensors[k]);
    }
    j["params"] = std::move(params);
    j["map_adjacency"] = matrix_to_json(ckpt.graph.weights);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Checkpoint ckpt;
    try {
        const json j = json::parse(in);
        if (j.at("format").get<std::string>() != "stgf-checkpoint") {
            throw FormatError(path.string() + ": not a checkpoint");
        }
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
        }
        ckpt.dataset = j.at("dataset").get<std::string>();
        ckpt.interval_minutes = j.at("interval_minutes").get<int>();
        const auto& m = j.at("model");
        ckpt.model.hidden = m.at("hidden").get<int>();
        ckpt.model.dropout_p = m.at("dropout_p").get<double>();
        ckpt.model.reset_activation = parse_reset_activation(m.at("reset_activation").get<std::string>());
        ckpt.model.history_steps = m.at("history_steps").get<int>();
        ckpt.model.horizon_steps = m.at("horizon_steps").get<int>();
        auto tensors = ckpt.params.tensors();
        for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
            const std::string name(ModelParams::names()[k]);
            *tensors[k] = matrix_from_json(j.at("params").at(name), name);
        }
        ckpt.graph.weights = matrix_from_json(j.at("map_adjacency"), "map_adjacency");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }

    ckpt.model.validate();
    const auto n = ckpt.graph.n();
    const Eigen::Index h = ckpt.model.hidden;
    const auto& p = ckpt.params;
    const bool shapes_ok =
        p.proj_w.rows() == 1 && p.proj_w.cols() == h && p.proj_b.rows() == 1 && p.proj_b.cols() == h &&
        p.w_u.rows() == 2 * h && p.w_u.cols() == h && p.w_r.rows() == 2 * h && p.w_r.cols() == h &&
        p.w_c.rows() == 2 * h && p.w_c.cols() == h && p.b_u.cols() == h && p.b_r.cols() == h &&
        p.b_c.cols() == h && p.dec_w.rows() == h && p.dec_w.cols() == 1 && p.dec_b.size() == 1 &&
        p.phi.rows() == n && p.phi.cols() == n && ckpt.graph.weights.cols() == n;
    if (!shapes_ok) throw FormatError(path.string() + ": parameter shapes inconsistent with config");
    return ckpt;
}

}  // namespace stgf
