#pragma once
#include <cstdint>
#include <string>

#include <json.hpp>

#include "mflab/flow.hpp"
#include "mflab/measures.hpp"
#include "mflab/model.hpp"

namespace mflab {

inline constexpr const char* kVersion = "0.1.0";

// Sectioned key=value experiment description (TOML-ish: [section], strings in
// quotes, # comments). Unknown sections or keys are hard errors: a silently
// ignored typo would poison rate measurements.
struct ExperimentConfig {
  struct Model {
    std::string kind = "linear-tanh";
    int d = 2;
  } model;

  struct Data {
    int n = 8;
    std::string generator = "gaussian-pairs";  // gaussian-pairs | circle-labels | file
    double support_radius = 2.0;
    std::string file;  // DataMeasure JSON, generator = "file" only
  } data;

  struct Path {
    int L = 4;
    int N = 8;
    double init_scale = 1.0;
    int smoothing_window = 1;  // odd moving-average width across layers; 1 = off
  } path;

  FlowConfig flow;  // flow.* keys; snapshot_stride/threads are owned elsewhere

  struct Analysis {
    double gap_floor = 1e-12;
    double tail_fraction = 0.5;
    int probe_grid = 9;
  } analysis;

  struct Io {
    std::string out_dir;  // empty = resolve via --out / MFLAB_OUT / cwd
    int snapshot_stride = 0;
  } io;

  void validate() const;
};

ExperimentConfig config_from_text(const std::string& text);
ExperimentConfig load_config(const std::string& filename);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Built-in dataset generators (uniform weights, compact support):
//   gaussian-pairs: x clipped Gaussian, y = Ax + noise for a fixed banded A
//   circle-labels:  x on a ring in the first two coordinates, y the same ring
//                   rotated by a fixed angle (needs d >= 2)
//   file:           DataMeasure JSON read from data.file
DataMeasure make_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

// i.i.d. Gaussian particles scaled by init_scale, then smoothed across layers
// by a centered moving average so the initial path is regular in t
ParameterPath make_initial_path(const ExperimentConfig& cfg, int m, std::uint64_t seed);

}  // namespace mflab
