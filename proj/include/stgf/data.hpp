#pragma once

#include "stgf/autodiff.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stgf {

/// Time-indexed speeds (rows = time, cols = roads) in raw units.
struct SpeedDataset {
    std::string name;
    int interval_minutes = 15;
    Matrix speeds;
    double max_speed = 0.0;  // max over rows < split_index
    Eigen::Index split_index = 0;  // floor(0.8 * time)

    Eigen::Index time() const { return speeds.rows(); }
    Eigen::Index n() const { return speeds.cols(); }

    /// Steps covering `minutes`; throws ParameterError if not a whole number of steps.
    int steps_for_minutes(int minutes) const;
};

enum class HeaderMode { Auto, Present, Absent };

/// Validates and populates max_speed and split_index.
SpeedDataset make_dataset(std::string name, int interval_minutes, Matrix speeds);

/// Time rows of comma-separated speeds. With HeaderMode::Auto a non-numeric first
/// row is treated as a header.
SpeedDataset load_speeds(const std::filesystem::path& path, int interval_minutes,
                         std::string name = {}, HeaderMode header = HeaderMode::Auto);
void save_speeds(const SpeedDataset& ds, const std::filesystem::path& path);

Matrix normalize(const SpeedDataset& ds);
Matrix normalize(const Matrix& raw, const SpeedDataset& ds);
Matrix denormalize(const Matrix& values, const SpeedDataset& ds);

enum class Split { Train, Eval };

struct Window {
    Matrix history;  // t x n
    Matrix target;   // T x n
    Eigen::Index start_index = 0;  // row of history's first step
};

/// Stride-1 windows lying entirely inside the chosen split of `values`
/// (time x n, already normalised or raw).
std::vector<Window> make_windows(const Matrix& values, const SpeedDataset& ds, int history_steps,
                                 int horizon_steps, Split split);

/// Dataset manifest: JSON object with name, interval_minutes, speeds and
/// adjacency paths (relative to the manifest), optional speeds_header.
struct Manifest {
    std::string name;
    int interval_minutes = 15;
    std::filesystem::path speeds;
    std::filesystem::path adjacency;
    HeaderMode speeds_header = HeaderMode::Auto;

    static Manifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    SpeedDataset load_dataset() const;
};

}  // namespace stgf
