#include "mflab/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

namespace mflab {

using nlohmann::json;

namespace {
json measure_to_obj(const DiscreteMeasure& mu) {
  json pts = json::array();
  for (int i = 0; i < mu.n(); ++i) {
    json row = json::array();
    for (int c = 0; c < mu.m; ++c) row.push_back(mu.pt(i)[c]);
    pts.push_back(std::move(row));
  }
  return json{{"points", std::move(pts)}, {"weights", mu.weights}};
}

DiscreteMeasure measure_from_obj(const json& o) {
  require(o.is_object() && o.contains("points") && o.contains("weights"), Errc::IoError,
          "measure object needs points and weights");
  const auto& pts = o.at("points");
  require(pts.is_array() && !pts.empty(), Errc::IoError, "points must be a nonempty array");
  DiscreteMeasure mu;
  mu.m = static_cast<int>(pts.at(0).size());
  for (const auto& row : pts) {
    require(row.is_array() && static_cast<int>(row.size()) == mu.m, Errc::IoError,
            "ragged point rows");
    for (const auto& v : row) mu.pts.push_back(v.get<double>());
  }
  mu.weights = o.at("weights").get<std::vector<double>>();
  mu.validate();
  return mu;
}
}  // namespace

std::string to_json(const DiscreteMeasure& mu) { return measure_to_obj(mu).dump(); }

std::string to_json(const ParameterPath& path) {
  json layers = json::array();
  for (const auto& l : path.layers) layers.push_back(measure_to_obj(l));
  return json{{"layer_grid", path.layer_grid}, {"layers", std::move(layers)}}.dump();
}

std::string to_json(const DataMeasure& data) {
  json samples = json::array();
  for (int i = 0; i < data.n(); ++i) {
    json x = json::array(), y = json::array();
    for (int c = 0; c < data.d; ++c) {
      x.push_back(data.x(i)[c]);
      y.push_back(data.y(i)[c]);
    }
    samples.push_back(json{{"x", std::move(x)}, {"y", std::move(y)}});
  }
  return json{{"d", data.d},
              {"support_bound", data.support_bound},
              {"samples", std::move(samples)},
              {"weights", data.weights}}
      .dump();
}

namespace {
json parse(const std::string& text) {
  json o = json::parse(text, nullptr, false);
  require(!o.is_discarded(), Errc::IoError, "malformed JSON");
  return o;
}
}  // namespace

DiscreteMeasure measure_from_json(const std::string& text) { return measure_from_obj(parse(text)); }

ParameterPath path_from_json(const std::string& text) {
  json o = parse(text);
  require(o.contains("layer_grid") && o.contains("layers"), Errc::IoError,
          "path object needs layer_grid and layers");
  ParameterPath p;
  p.layer_grid = o.at("layer_grid").get<std::vector<double>>();
  for (const auto& l : o.at("layers")) p.layers.push_back(measure_from_obj(l));
  p.validate();
  return p;
}

DataMeasure data_from_json(const std::string& text) {
  json o = parse(text);
  require(o.contains("d") && o.contains("samples") && o.contains("weights") &&
              o.contains("support_bound"),
          Errc::IoError, "data object needs d, support_bound, samples, weights");
  DataMeasure data;
  data.d = o.at("d").get<int>();
  data.support_bound = o.at("support_bound").get<double>();
  for (const auto& s : o.at("samples")) {
    auto x = s.at("x").get<std::vector<double>>();
    auto y = s.at("y").get<std::vector<double>>();
    require(static_cast<int>(x.size()) == data.d && static_cast<int>(y.size()) == data.d,
            Errc::IoError, "sample dimension mismatch");
    data.xs.insert(data.xs.end(), x.begin(), x.end());
    data.ys.insert(data.ys.end(), y.begin(), y.end());
  }
  data.weights = o.at("weights").get<std::vector<double>>();
  data.validate();
  return data;
}

namespace {
constexpr char kMagic[4] = {'M', 'F', 'L', 'B'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.append(b, 4);
}
}  // namespace

void write_snapshot(const ParameterPath& path, const std::string& filename) {
  path.validate();
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<uint32_t>(path.L()));
  put_u32(buf, static_cast<uint32_t>(path.N()));
  put_u32(buf, static_cast<uint32_t>(path.m()));
  auto put_f64s = [&buf](const std::vector<double>& v) {
    buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  };
  put_f64s(path.layer_grid);
  for (const auto& l : path.layers) {
    put_f64s(l.pts);
    put_f64s(l.weights);
  }
  write_text_file(filename, buf);
}

ParameterPath read_snapshot(const std::string& filename) {
  std::string buf = read_text_file(filename);
  require(buf.size() >= 20, Errc::IoError, "snapshot truncated");
  require(std::memcmp(buf.data(), kMagic, 4) == 0, Errc::IoError, "bad snapshot magic");
  uint32_t version, L, N, m;
  std::memcpy(&version, buf.data() + 4, 4);
  std::memcpy(&L, buf.data() + 8, 4);
  std::memcpy(&N, buf.data() + 12, 4);
  std::memcpy(&m, buf.data() + 16, 4);
  require(version == kVersion, Errc::IoError, "unsupported snapshot version");
  size_t doubles = (L + 1) + static_cast<size_t>(L) * (static_cast<size_t>(N) * m + N);
  require(buf.size() == 20 + doubles * sizeof(double), Errc::IoError, "snapshot size mismatch");
  const char* cur = buf.data() + 20;
  auto take = [&cur](std::vector<double>& v, size_t count) {
    v.resize(count);
    std::memcpy(v.data(), cur, count * sizeof(double));
    cur += count * sizeof(double);
  };
  ParameterPath p;
  take(p.layer_grid, L + 1);
  p.layers.resize(L);
  for (uint32_t k = 0; k < L; ++k) {
    p.layers[k].m = static_cast<int>(m);
    take(p.layers[k].pts, static_cast<size_t>(N) * m);
    take(p.layers[k].weights, N);
  }
  p.validate();
  return p;
}

std::string read_text_file(const std::string& filename) {
  std::ifstream f(filename, std::ios::binary);
  require(f.good(), Errc::IoError, "cannot open " + filename);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& filename, const std::string& content) {
  std::ofstream f(filename, std::ios::binary);
  require(f.good(), Errc::IoError, "cannot open " + filename + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(f.good(), Errc::IoError, "write failed for " + filename);
}

}  // namespace mflab
