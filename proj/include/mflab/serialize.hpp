#pragma once
#include <string>

#include "mflab/measures.hpp"

namespace mflab {

// JSON layout:
//   measure: {"points": [[f64 x m] x n], "weights": [f64 x n]}
//   path:    {"layer_grid": [f64 x L+1], "layers": [measure x L]}
//   data:    {"d": int, "support_bound": f64,
//             "samples": [{"x": [...], "y": [...]}], "weights": [...]}
std::string to_json(const DiscreteMeasure& mu);
std::string to_json(const ParameterPath& path);
std::string to_json(const DataMeasure& data);

DiscreteMeasure measure_from_json(const std::string& text);
ParameterPath path_from_json(const std::string& text);
DataMeasure data_from_json(const std::string& text);

// Binary snapshot: 20-byte header = magic "MFLB", u32 version (=1), u32 L,
// u32 N, u32 m; then little-endian f64 arrays: layer_grid (L+1), then per
// layer the points (N*m row-major) followed by the weights (N).
void write_snapshot(const ParameterPath& path, const std::string& filename);
ParameterPath read_snapshot(const std::string& filename);

std::string read_text_file(const std::string& filename);
void write_text_file(const std::string& filename, const std::string& content);

}  // namespace mflab
