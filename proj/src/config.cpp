#include "mflab/config.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

#include "mflab/rng.hpp"
#include "mflab/serialize.hpp"
#include "mflab/smallmat.hpp"

namespace mflab {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    else if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

struct Value {
  std::string raw;
  std::string where;  // section.key, for diagnostics

  double as_double() const {
    char* end = nullptr;
    double v = std::strtod(raw.c_str(), &end);
    require(!raw.empty() && end == raw.c_str() + raw.size() && std::isfinite(v),
            Errc::ConfigError, where + ": expected a number, got '" + raw + "'");
    return v;
  }
  long long as_ll() const {
    char* end = nullptr;
    long long v = std::strtoll(raw.c_str(), &end, 10);
    require(!raw.empty() && end == raw.c_str() + raw.size(), Errc::ConfigError,
            where + ": expected an integer, got '" + raw + "'");
    return v;
  }
  int as_int() const {
    long long v = as_ll();
    require(v >= -2147483648LL && v <= 2147483647LL, Errc::ConfigError,
            where + ": integer out of range");
    return static_cast<int>(v);
  }
  std::uint64_t as_u64() const {
    char* end = nullptr;
    unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    require(!raw.empty() && raw[0] != '-' && end == raw.c_str() + raw.size(), Errc::ConfigError,
            where + ": expected an unsigned integer, got '" + raw + "'");
    return v;
  }
  bool as_bool() const {
    if (raw == "true") return true;
    if (raw == "false") return false;
    fail(Errc::ConfigError, where + ": expected true or false, got '" + raw + "'");
  }
  std::string as_string() const {
    require(raw.size() >= 2 && raw.front() == '"' && raw.back() == '"', Errc::ConfigError,
            where + ": expected a quoted string, got '" + raw + "'");
    return raw.substr(1, raw.size() - 2);
  }
};

}  // namespace

ExperimentConfig config_from_text(const std::string& text) {
  ExperimentConfig cfg;
  std::string section;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      require(line.back() == ']', Errc::ConfigError,
              "line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      require(section == "model" || section == "data" || section == "path" ||
                  section == "flow" || section == "analysis" || section == "io",
              Errc::ConfigError, "unknown section [" + section + "]");
      continue;
    }

    size_t eq = line.find('=');
    require(eq != std::string::npos, Errc::ConfigError,
            "line " + std::to_string(lineno) + ": expected key = value");
    require(!section.empty(), Errc::ConfigError,
            "line " + std::to_string(lineno) + ": key outside any section");
    std::string key = trim(line.substr(0, eq));
    Value v{trim(line.substr(eq + 1)), section + "." + key};
    require(!key.empty() && !v.raw.empty(), Errc::ConfigError,
            "line " + std::to_string(lineno) + ": empty key or value");

    bool known = true;
    if (section == "model") {
      if (key == "kind") cfg.model.kind = v.as_string();
      else if (key == "d") cfg.model.d = v.as_int();
      else known = false;
    } else if (section == "data") {
      if (key == "n") cfg.data.n = v.as_int();
      else if (key == "generator") cfg.data.generator = v.as_string();
      else if (key == "support_radius") cfg.data.support_radius = v.as_double();
      else if (key == "file") cfg.data.file = v.as_string();
      else known = false;
    } else if (section == "path") {
      if (key == "L") cfg.path.L = v.as_int();
      else if (key == "N") cfg.path.N = v.as_int();
      else if (key == "init_scale") cfg.path.init_scale = v.as_double();
      else if (key == "smoothing_window") cfg.path.smoothing_window = v.as_int();
      else known = false;
    } else if (section == "flow") {
      if (key == "lambda") cfg.flow.lambda = v.as_double();
      else if (key == "dtau") cfg.flow.dtau = v.as_double();
      else if (key == "tau_max") cfg.flow.tau_max = v.as_double();
      else if (key == "stop_slope") cfg.flow.stop_slope = v.as_double();
      else if (key == "record_every") cfg.flow.record_every = v.as_int();
      else if (key == "substeps") cfg.flow.substeps = v.as_int();
      else if (key == "seed") cfg.flow.seed = v.as_u64();
      else if (key == "backtracking") cfg.flow.backtracking = v.as_bool();
      else if (key == "shrink") cfg.flow.shrink = v.as_double();
      else if (key == "max_shrinks") cfg.flow.max_shrinks = v.as_int();
      else known = false;
    } else if (section == "analysis") {
      if (key == "gap_floor") cfg.analysis.gap_floor = v.as_double();
      else if (key == "tail_fraction") cfg.analysis.tail_fraction = v.as_double();
      else if (key == "probe_grid") cfg.analysis.probe_grid = v.as_int();
      else known = false;
    } else {  // io
      if (key == "out_dir") cfg.io.out_dir = v.as_string();
      else if (key == "snapshot_stride") cfg.io.snapshot_stride = v.as_int();
      else known = false;
    }
    require(known, Errc::ConfigError, "unknown key " + section + "." + key);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& filename) {
  return config_from_text(read_text_file(filename));
}

void ExperimentConfig::validate() const {
  model_kind_from_name(model.kind);  // rejects unknown kinds
  require(model.d >= 1, Errc::ConfigError, "model.d must be >= 1");
  require(data.n >= 1, Errc::ConfigError, "data.n must be >= 1");
  require(data.support_radius > 0.0 && std::isfinite(data.support_radius), Errc::ConfigError,
          "data.support_radius must be positive");
  require(data.generator == "gaussian-pairs" || data.generator == "circle-labels" ||
              data.generator == "file",
          Errc::ConfigError, "unknown data.generator '" + data.generator + "'");
  require(data.generator != "circle-labels" || model.d >= 2, Errc::ConfigError,
          "circle-labels needs model.d >= 2");
  require(data.generator != "file" || !data.file.empty(), Errc::ConfigError,
          "data.file is required when data.generator = \"file\"");
  require(path.L >= 1, Errc::ConfigError, "path.L must be >= 1");
  require(path.N >= 1, Errc::ConfigError, "path.N must be >= 1");
  require(path.init_scale >= 0.0 && std::isfinite(path.init_scale), Errc::ConfigError,
          "path.init_scale must be nonnegative");
  require(path.smoothing_window >= 1 && path.smoothing_window % 2 == 1, Errc::ConfigError,
          "path.smoothing_window must be odd (1 disables smoothing)");
  flow.validate();
  require(analysis.gap_floor > 0.0, Errc::ConfigError, "analysis.gap_floor must be positive");
  require(analysis.tail_fraction > 0.0 && analysis.tail_fraction <= 1.0, Errc::ConfigError,
          "analysis.tail_fraction must lie in (0,1]");
  require(analysis.probe_grid >= 2, Errc::ConfigError, "analysis.probe_grid must be >= 2");
  require(io.snapshot_stride >= 0, Errc::ConfigError, "io.snapshot_stride must be nonnegative");
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  return nlohmann::json{
      {"model", {{"kind", cfg.model.kind}, {"d", cfg.model.d}}},
      {"data",
       {{"n", cfg.data.n},
        {"generator", cfg.data.generator},
        {"support_radius", cfg.data.support_radius},
        {"file", cfg.data.file}}},
      {"path",
       {{"L", cfg.path.L},
        {"N", cfg.path.N},
        {"init_scale", cfg.path.init_scale},
        {"smoothing_window", cfg.path.smoothing_window}}},
      {"flow",
       {{"lambda", cfg.flow.lambda},
        {"dtau", cfg.flow.dtau},
        {"tau_max", cfg.flow.tau_max},
        {"stop_slope", cfg.flow.stop_slope},
        {"record_every", cfg.flow.record_every},
        {"substeps", cfg.flow.substeps},
        {"seed", cfg.flow.seed},
        {"backtracking", cfg.flow.backtracking},
        {"shrink", cfg.flow.shrink},
        {"max_shrinks", cfg.flow.max_shrinks}}},
      {"analysis",
       {{"gap_floor", cfg.analysis.gap_floor},
        {"tail_fraction", cfg.analysis.tail_fraction},
        {"probe_grid", cfg.analysis.probe_grid}}},
      {"io", {{"out_dir", cfg.io.out_dir}, {"snapshot_stride", cfg.io.snapshot_stride}}}};
}

DataMeasure make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  const int d = cfg.model.d, n = cfg.data.n;
  const double r = cfg.data.support_radius;

  if (cfg.data.generator == "file") {
    DataMeasure data = data_from_json(read_text_file(cfg.data.file));
    require(data.d == d, Errc::ConfigError, "data file dimension does not match model.d");
    data.validate();
    return data;
  }

  DataMeasure data;
  data.d = d;
  data.support_bound = r;
  data.weights.assign(n, 1.0 / n);
  data.xs.resize(static_cast<size_t>(n) * d);
  data.ys.resize(static_cast<size_t>(n) * d);
  Rng rng(seed);
  auto clip = [&](double* p, double rad) {
    double len = norm2(p, d);
    if (len > rad) scal(rad / len, p, d);
  };

  if (cfg.data.generator == "gaussian-pairs") {
    // fixed banded mixing map: y tracks a sheared copy of x plus small noise
    std::vector<double> a(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) {
      a[static_cast<size_t>(i) * d + i] += 0.6;
      a[static_cast<size_t>(i) * d + (i + 1) % d] += 0.25;
    }
    std::vector<double> x(d), y(d);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c) x[c] = (r / 3.0) * rng.normal();
      clip(x.data(), 0.95 * r);
      matvec(a.data(), x.data(), y.data(), d, d);
      for (int c = 0; c < d; ++c) y[c] += 0.05 * r * rng.normal();
      clip(y.data(), r);
      std::copy(x.begin(), x.end(), data.xs.begin() + static_cast<size_t>(i) * d);
      std::copy(y.begin(), y.end(), data.ys.begin() + static_cast<size_t>(i) * d);
    }
  } else {  // circle-labels
    const double rho = 0.8 * r;
    const double twist = 0.25 * 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
      double ang = 2.0 * 3.14159265358979323846 * rng.u01();
      double* x = data.xs.data() + static_cast<size_t>(i) * d;
      double* y = data.ys.data() + static_cast<size_t>(i) * d;
      x[0] = rho * std::cos(ang);
      x[1] = rho * std::sin(ang);
      y[0] = rho * std::cos(ang + twist);
      y[1] = rho * std::sin(ang + twist);
    }
  }
  data.validate();
  return data;
}

ParameterPath make_initial_path(const ExperimentConfig& cfg, int m, std::uint64_t seed) {
  ParameterPath p = make_uniform_path(cfg.path.L, cfg.path.N, m);
  Rng rng(seed);
  for (auto& layer : p.layers)
    for (auto& c : layer.pts) c = cfg.path.init_scale * rng.normal();

  const int w = cfg.path.smoothing_window;
  if (w > 1 && p.L() > 1) {
    const int h = w / 2;
    const int L = p.L();
    const size_t nm = p.layers[0].pts.size();
    std::vector<std::vector<double>> raw(L);
    for (int k = 0; k < L; ++k) raw[k] = p.layers[k].pts;
    for (int k = 0; k < L; ++k) {
      int lo = std::max(0, k - h), hi = std::min(L - 1, k + h);
      for (size_t c = 0; c < nm; ++c) {
        double acc = 0.0;
        for (int kk = lo; kk <= hi; ++kk) acc += raw[kk][c];
        p.layers[k].pts[c] = acc / (hi - lo + 1);
      }
    }
  }
  return p;
}

}  // namespace mflab
