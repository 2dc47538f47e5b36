// Wall-clock comparison of the serial (threads=1) and OpenMP gradient kernels
// on one objective evaluation, plus a bitwise cross-check of their outputs.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "mflab/config.hpp"
#include "mflab/objective.hpp"

using namespace mflab;

namespace {

double time_eval(const VectorFieldModel& model, const ParameterPath& path,
                 const DataMeasure& data, double lambda, int substeps, int threads, int reps) {
  using clock = std::chrono::steady_clock;
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = clock::now();
    FlowPoint fp = eval_objective_with_gradient(model, path, data, lambda, substeps, threads);
    auto t1 = clock::now();
    if (!std::isfinite(fp.report.j)) std::abort();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient kernel benchmark"};
  int d = 4, L = 4, N = 64, n = 32, substeps = 8, reps = 5;
  std::string kind = "gated-tanh";
  app.add_option("--d", d, "state dimension");
  app.add_option("--L", L, "layers");
  app.add_option("--N", N, "particles per layer");
  app.add_option("--n", n, "data samples");
  app.add_option("--substeps", substeps, "RK4 substeps per layer");
  app.add_option("--reps", reps, "repetitions (best-of timing)");
  app.add_option("--model", kind, "field model kind");
  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  cfg.model.kind = kind;
  cfg.model.d = d;
  cfg.data.n = n;
  cfg.path.L = L;
  cfg.path.N = N;
  cfg.path.init_scale = 0.6;
  cfg.path.smoothing_window = 3;
  cfg.validate();

  VectorFieldModel model = make_model(model_kind_from_name(cfg.model.kind), d);
  DataMeasure data = make_dataset(cfg, 7);
  ParameterPath path = make_initial_path(cfg, model.m, 8);

  std::printf("instance: %s d=%d m=%d L=%d N=%d n=%d substeps=%d\n", kind.c_str(), d, model.m, L,
              N, n, substeps);
#ifdef _OPENMP
  std::printf("openmp: max_threads=%d\n", omp_get_max_threads());
  if (omp_get_max_threads() == 1)
    std::printf("note: runtime reports a single logical core; the parallel path is exercised\n"
                "      but no speedup is expected on this machine.\n");
#else
  std::printf("openmp: built without OpenMP; all rows use the serial path\n");
#endif

  // serial reference first
  GradientField ref =
      eval_objective_with_gradient(model, path, data, 0.1, substeps, 1).gradient;
  double serial = time_eval(model, path, data, 0.1, substeps, 1, reps);
  std::printf("%-18s %10.3f ms/eval %8s\n", "threads=1 (serial)", serial * 1e3, "1.00x");

  for (int t : {0, 2, 4}) {
    GradientField g = eval_objective_with_gradient(model, path, data, 0.1, substeps, t).gradient;
    if (g.g != ref.g) {
      std::printf("FATAL: threads=%d gradient differs from the serial result\n", t);
      return 1;
    }
    double el = time_eval(model, path, data, 0.1, substeps, t, reps);
    char label[32];
    std::snprintf(label, sizeof label, "threads=%d%s", t, t == 0 ? " (default)" : "");
    std::printf("%-18s %10.3f ms/eval %7.2fx\n", label, el * 1e3, serial / el);
  }
  std::printf("gradient outputs bitwise identical across thread counts\n");
  return 0;
}
