#include "stgf/data.hpp"

#include "csv.hpp"
#include "stgf/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace stgf {

int SpeedDataset::steps_for_minutes(int minutes) const {
    if (minutes <= 0 || interval_minutes <= 0 || minutes % interval_minutes != 0) {
        throw ParameterError(std::to_string(minutes) + " min is not a whole number of " +
                             std::to_string(interval_minutes) + "-min steps");
    }
    return minutes / interval_minutes;
}

SpeedDataset make_dataset(std::string name, int interval_minutes, Matrix speeds) {
    if (interval_minutes <= 0) throw DataError("interval must be positive");
    if (speeds.rows() == 0 || speeds.cols() == 0) throw DataError("dataset is empty");
    if (!speeds.allFinite()) throw DataError("dataset has non-finite speeds");
    for (Eigen::Index r = 0; r < speeds.rows(); ++r)
        for (Eigen::Index c = 0; c < speeds.cols(); ++c)
            if (speeds(r, c) < 0.0) {
                throw DataError("negative speed at row " + std::to_string(r + 1) + ", column " +
                                std::to_string(c + 1));
            }

    SpeedDataset ds;
    ds.name = std::move(name);
    ds.interval_minutes = interval_minutes;
    ds.split_index = static_cast<Eigen::Index>(
        std::floor(0.8 * static_cast<double>(speeds.rows())));
    if (ds.split_index == 0) throw DataError("dataset too short for a training split");
    ds.max_speed = speeds.topRows(ds.split_index).maxCoeff();
    if (!(ds.max_speed > 0.0)) throw DataError("training split has no positive speed");
    ds.speeds = std::move(speeds);
    return ds;
}

SpeedDataset load_speeds(const std::filesystem::path& path, int interval_minutes, std::string name,
                         HeaderMode header) {
    const auto policy = header == HeaderMode::Present ? csv::Header::Always
                        : header == HeaderMode::Absent ? csv::Header::None
                                                       : csv::Header::Auto;
    auto table = csv::read(path, policy);
    if (name.empty()) name = path.stem().string();
    return make_dataset(std::move(name), interval_minutes, std::move(table.values));
}

void save_speeds(const SpeedDataset& ds, const std::filesystem::path& path) {
    csv::write(path, ds.speeds);
}

Matrix normalize(const SpeedDataset& ds) { return normalize(ds.speeds, ds); }

Matrix normalize(const Matrix& raw, const SpeedDataset& ds) { return raw / ds.max_speed; }

Matrix denormalize(const Matrix& values, const SpeedDataset& ds) { return values * ds.max_speed; }

std::vector<Window> make_windows(const Matrix& values, const SpeedDataset& ds, int history_steps,
                                 int horizon_steps, Split split) {
    if (history_steps < 1 || horizon_steps < 1) {
        throw ParameterError("make_windows: history and horizon must be >= 1");
    }
    const Eigen::Index begin = split == Split::Train ? 0 : ds.split_index;
    const Eigen::Index end = split == Split::Train ? ds.split_index : values.rows();
    const Eigen::Index span = history_steps + horizon_steps;
    const Eigen::Index length = end - begin;
    if (span > length) {
        throw DataError("split of length " + std::to_string(length) + " cannot hold t=" +
                        std::to_string(history_steps) + ", T=" + std::to_string(horizon_steps));
    }
    std::vector<Window> windows;
    windows.reserve(static_cast<std::size_t>(length - span + 1));
    for (Eigen::Index s = begin; s + span <= end; ++s) {
        windows.push_back({values.middleRows(s, history_steps),
                           values.middleRows(s + history_steps, horizon_steps), s});
    }
    return windows;
}

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace

Manifest Manifest::load(const std::filesystem::path& path) {
    const auto j = read_json(path);
    const auto dir = path.parent_path();
    Manifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.interval_minutes = j.at("interval_minutes").get<int>();
        m.speeds = dir / j.at("speeds").get<std::string>();
        if (j.contains("adjacency")) m.adjacency = dir / j.at("adjacency").get<std::string>();
        if (j.contains("speeds_header")) {
            m.speeds_header = j.at("speeds_header").get<bool>() ? HeaderMode::Present : HeaderMode::Absent;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return m;
}

void Manifest::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["name"] = name;
    j["interval_minutes"] = interval_minutes;
    const auto dir = path.parent_path();
    j["speeds"] = std::filesystem::relative(speeds, dir.empty() ? "." : dir).generic_string();
    if (!adjacency.empty()) {
        j["adjacency"] = std::filesystem::relative(adjacency, dir.empty() ? "." : dir).generic_string();
    }
    if (speeds_header != HeaderMode::Auto) j["speeds_header"] = speeds_header == HeaderMode::Present;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

SpeedDataset Manifest::load_dataset() const {
    return load_speeds(speeds, interval_minutes, name, speeds_header);
}

}  // namespace stgf
