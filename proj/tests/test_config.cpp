#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "mflab/config.hpp"
#include "mflab/serialize.hpp"
#include "mflab/smallmat.hpp"
#include "test_util.hpp"

using namespace mflab;

namespace {

bool rejects(const std::string& text) {
  try {
    config_from_text(text);
    return false;
  } catch (const Error& e) {
    return e.code == Errc::ConfigError;
  }
}

const char* kFull = R"(
# full experiment description
[model]
kind = "gated-tanh"
d = 3

[data]
n = 5
generator = "circle-labels"
support_radius = 1.5   # comment after value

[path]
L = 6
N = 4
init_scale = 0.25
smoothing_window = 5

[flow]
lambda = 0.2
dtau = 0.01
tau_max = 3.0
stop_slope = 0.001
record_every = 4
substeps = 16
seed = 99
backtracking = true
shrink = 0.25
max_shrinks = 12

[analysis]
gap_floor = 0.000001
tail_fraction = 0.4
probe_grid = 7

[io]
out_dir = "results/run # 1"
snapshot_stride = 50
)";

}  // namespace

TEST_CASE("empty text yields the documented defaults") {
  ExperimentConfig cfg = config_from_text("");
  CHECK(cfg.model.kind == "linear-tanh");
  CHECK(cfg.model.d == 2);
  CHECK(cfg.data.n == 8);
  CHECK(cfg.data.generator == "gaussian-pairs");
  CHECK(cfg.path.L == 4);
  CHECK(cfg.path.N == 8);
  CHECK(cfg.flow.lambda == 0.1);
  CHECK(cfg.flow.seed == 0);
  CHECK(cfg.analysis.probe_grid == 9);
  CHECK(cfg.io.out_dir.empty());
}

TEST_CASE("every section and key parses and lands in the right field") {
  ExperimentConfig cfg = config_from_text(kFull);
  CHECK(cfg.model.kind == "gated-tanh");
  CHECK(cfg.model.d == 3);
  CHECK(cfg.data.n == 5);
  CHECK(cfg.data.generator == "circle-labels");
  CHECK(cfg.data.support_radius == 1.5);
  CHECK(cfg.path.L == 6);
  CHECK(cfg.path.N == 4);
  CHECK(cfg.path.init_scale == 0.25);
  CHECK(cfg.path.smoothing_window == 5);
  CHECK(cfg.flow.lambda == 0.2);
  CHECK(cfg.flow.dtau == 0.01);
  CHECK(cfg.flow.tau_max == 3.0);
  CHECK(cfg.flow.stop_slope == 0.001);
  CHECK(cfg.flow.record_every == 4);
  CHECK(cfg.flow.substeps == 16);
  CHECK(cfg.flow.seed == 99);
  CHECK(cfg.flow.backtracking == true);
  CHECK(cfg.flow.shrink == 0.25);
  CHECK(cfg.flow.max_shrinks == 12);
  CHECK(cfg.analysis.gap_floor == 1e-6);
  CHECK(cfg.analysis.tail_fraction == 0.4);
  CHECK(cfg.analysis.probe_grid == 7);
  // '#' inside a quoted string is content, not a comment
  CHECK(cfg.io.out_dir == "results/run # 1");
  CHECK(cfg.io.snapshot_stride == 50);
}

TEST_CASE("CRLF input and stray whitespace are tolerated") {
  ExperimentConfig cfg = config_from_text("[model]\r\n  kind   =   \"linear-tanh\"  \r\nd=1\r\n");
  CHECK(cfg.model.d == 1);
}

TEST_CASE("unknown sections and keys are hard errors") {
  CHECK(rejects("[mode]\n"));
  CHECK(rejects("[model]\nkinds = \"linear-tanh\"\n"));
  CHECK(rejects("[data]\nsamples = 4\n"));
  CHECK(rejects("[path]\nM = 3\n"));
  CHECK(rejects("[flow]\nstep = 0.1\n"));
  CHECK(rejects("[flow]\nsnapshot_stride = 5\n"));  // lives in [io]
  CHECK(rejects("[flow]\nthreads = 2\n"));          // flag-only
  CHECK(rejects("[analysis]\nalpha = 0.5\n"));
  CHECK(rejects("[io]\ndir = \".\"\n"));
}

TEST_CASE("malformed lines are hard errors") {
  CHECK(rejects("kind = \"linear-tanh\"\n"));  // key outside any section
  CHECK(rejects("[model\nd = 2\n"));           // unterminated header
  CHECK(rejects("[model]\nd\n"));              // missing '='
  CHECK(rejects("[model]\nd =\n"));            // empty value
  CHECK(rejects("[model]\n= 2\n"));            // empty key
  CHECK(rejects("[model]\nd = two\n"));        // not an integer
  CHECK(rejects("[model]\nd = 2.5\n"));        // not an integer
  CHECK(rejects("[flow]\nlambda = fast\n"));   // not a number
  CHECK(rejects("[flow]\nseed = -3\n"));       // seeds are unsigned
  CHECK(rejects("[flow]\nbacktracking = yes\n"));
  CHECK(rejects("[model]\nkind = linear-tanh\n"));  // strings need quotes
}

TEST_CASE("validation catches out-of-range fields") {
  CHECK(rejects("[model]\nkind = \"cubic\"\n"));
  CHECK(rejects("[model]\nd = 0\n"));
  CHECK(rejects("[data]\nn = 0\n"));
  CHECK(rejects("[data]\nsupport_radius = 0.0\n"));
  CHECK(rejects("[data]\ngenerator = \"spiral\"\n"));
  CHECK(rejects("[model]\nd = 1\n[data]\ngenerator = \"circle-labels\"\n"));
  CHECK(rejects("[data]\ngenerator = \"file\"\n"));  // no file given
  CHECK(rejects("[path]\nL = 0\n"));
  CHECK(rejects("[path]\nN = 0\n"));
  CHECK(rejects("[path]\ninit_scale = -1.0\n"));
  CHECK(rejects("[path]\nsmoothing_window = 2\n"));  // must be odd
  CHECK(rejects("[flow]\ndtau = 0.0\n"));
  CHECK(rejects("[flow]\ntau_max = -1.0\n"));
  CHECK(rejects("[analysis]\ngap_floor = 0.0\n"));
  CHECK(rejects("[analysis]\ntail_fraction = 0.0\n"));
  CHECK(rejects("[analysis]\ntail_fraction = 1.5\n"));
  CHECK(rejects("[analysis]\nprobe_grid = 1\n"));
  CHECK(rejects("[io]\nsnapshot_stride = -1\n"));
}

TEST_CASE("json echo reproduces the parsed values") {
  ExperimentConfig cfg = config_from_text(kFull);
  nlohmann::json j = config_to_json(cfg);
  CHECK(j["model"]["kind"] == "gated-tanh");
  CHECK(j["model"]["d"] == 3);
  CHECK(j["data"]["generator"] == "circle-labels");
  CHECK(j["flow"]["seed"] == 99);
  CHECK(j["flow"]["backtracking"] == true);
  CHECK(j["analysis"]["tail_fraction"] == 0.4);
  CHECK(j["io"]["snapshot_stride"] == 50);
}

TEST_CASE("gaussian-pairs generator: deterministic, uniform weights, inside the ball") {
  ExperimentConfig cfg = config_from_text("[model]\nd = 3\n[data]\nn = 64\n");
  DataMeasure a = make_dataset(cfg, 7);
  DataMeasure b = make_dataset(cfg, 7);
  DataMeasure c = make_dataset(cfg, 8);
  CHECK(a.xs == b.xs);
  CHECK(a.ys == b.ys);
  CHECK(a.xs != c.xs);

  REQUIRE(a.n() == 64);
  CHECK(a.d == 3);
  CHECK(a.support_bound == 2.0);
  double wsum = 0.0;
  for (double w : a.weights) {
    CHECK(w == 1.0 / 64);
    wsum += w;
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < a.n(); ++i) {
    CHECK(norm2(a.x(i), a.d) <= 0.95 * 2.0 + 1e-12);
    CHECK(norm2(a.y(i), a.d) <= 2.0 + 1e-12);
  }
  CHECK_NOTHROW(a.validate());

  // y tracks the sheared x up to the 5% noise: correlation must be strong
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < a.xs.size(); ++i) {
    sxy += a.xs[i] * a.ys[i];
    sxx += a.xs[i] * a.xs[i];
    syy += a.ys[i] * a.ys[i];
  }
  CHECK(sxy / std::sqrt(sxx * syy) > 0.5);
}

TEST_CASE("circle-labels generator: ring inputs and a rigidly rotated target") {
  ExperimentConfig cfg =
      config_from_text("[model]\nd = 4\n[data]\nn = 32\ngenerator = \"circle-labels\"\n"
                       "support_radius = 1.0\n");
  DataMeasure data = make_dataset(cfg, 3);
  const double rho = 0.8;
  const double cos_twist = std::cos(0.25 * 3.14159265358979323846);
  for (int i = 0; i < data.n(); ++i) {
    CHECK(norm2(data.x(i), 4) == doctest::Approx(rho).epsilon(1e-12));
    CHECK(norm2(data.y(i), 4) == doctest::Approx(rho).epsilon(1e-12));
    CHECK(data.x(i)[2] == 0.0);
    CHECK(data.x(i)[3] == 0.0);
    double ca = dot(data.x(i), data.y(i), 4) / (rho * rho);
    CHECK(ca == doctest::Approx(cos_twist).epsilon(1e-12));
  }
  CHECK_NOTHROW(data.validate());
}

TEST_CASE("file generator round-trips a serialized dataset and checks dimensions") {
  Rng rng(41);
  DataMeasure src = testutil::random_samples(rng, 6, 2, /*scale=*/0.5);
  write_text_file("test_config_data.json", to_json(src));

  ExperimentConfig cfg = config_from_text(
      "[model]\nd = 2\n[data]\ngenerator = \"file\"\nfile = \"test_config_data.json\"\n");
  DataMeasure loaded = make_dataset(cfg, 0);
  CHECK(loaded.xs == src.xs);
  CHECK(loaded.ys == src.ys);
  CHECK(loaded.weights == src.weights);

  ExperimentConfig bad = config_from_text(
      "[model]\nd = 3\n[data]\ngenerator = \"file\"\nfile = \"test_config_data.json\"\n");
  CHECK_THROWS_AS(make_dataset(bad, 0), Error);
  std::remove("test_config_data.json");
}

TEST_CASE("initial path: deterministic, right shape, smoothing is a truncated moving average") {
  ExperimentConfig cfg = config_from_text("[path]\nL = 5\nN = 3\ninit_scale = 0.8\n");
  ParameterPath raw = make_initial_path(cfg, 4, 17);
  ParameterPath raw2 = make_initial_path(cfg, 4, 17);
  REQUIRE(raw.L() == 5);
  REQUIRE(raw.N() == 3);
  REQUIRE(raw.m() == 4);
  for (int k = 0; k < 5; ++k) CHECK(raw.layers[k].pts == raw2.layers[k].pts);
  CHECK_NOTHROW(raw.validate());

  // same seed, window 3: every coordinate is the average of the raw window
  ExperimentConfig smo_cfg =
      config_from_text("[path]\nL = 5\nN = 3\ninit_scale = 0.8\nsmoothing_window = 3\n");
  ParameterPath smo = make_initial_path(smo_cfg, 4, 17);
  for (int k = 0; k < 5; ++k) {
    int lo = std::max(0, k - 1), hi = std::min(4, k + 1);
    for (size_t c = 0; c < smo.layers[k].pts.size(); ++c) {
      double acc = 0.0;
      for (int kk = lo; kk <= hi; ++kk) acc += raw.layers[kk].pts[c];
      CHECK(smo.layers[k].pts[c] == doctest::Approx(acc / (hi - lo + 1)).epsilon(1e-15));
    }
  }
  CHECK(dirichlet_energy(smo) < dirichlet_energy(raw));

  // scale 0 collapses to the zero path regardless of smoothing
  ExperimentConfig zero_cfg = config_from_text("[path]\nL = 2\nN = 2\ninit_scale = 0.0\n");
  ParameterPath z = make_initial_path(zero_cfg, 3, 5);
  for (const auto& layer : z.layers)
    for (double v : layer.pts) CHECK(v == 0.0);
}
