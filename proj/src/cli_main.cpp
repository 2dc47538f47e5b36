// mflab — particle gradient-flow lab.
// Exit codes: 0 ok, 2 config/input error, 3 numerical failure, 4 check failed.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mflab/analysis.hpp"
#include "mflab/config.hpp"
#include "mflab/flow.hpp"
#include "mflab/measures.hpp"
#include "mflab/model.hpp"
#include "mflab/objective.hpp"
#include "mflab/rng.hpp"
#include "mflab/serialize.hpp"
#include "mflab/transport.hpp"

namespace {

using namespace mflab;
namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const Error& e) {
  switch (e.code) {
    case Errc::ConfigError:
    case Errc::IoError:
      return 2;
    default:
      return 3;
  }
}

std::string resolve_out_dir(const std::string& flag_out, const std::string& cfg_out) {
  if (!flag_out.empty()) return flag_out;
  if (!cfg_out.empty()) return cfg_out;
  if (const char* env = std::getenv("MFLAB_OUT"); env && *env) return env;
  return ".";
}

void write_in(const std::string& dir, const std::string& name, const std::string& content) {
  write_text_file((fs::path(dir) / name).string(), content);
}

json dissipation_json(const FlowTrace& tr) {
  DissipationReport d = dissipation_check(tr);
  return json{{"drop", d.drop}, {"integral", d.integral}, {"mismatch", d.mismatch}};
}

// Analysis on a finished trace; short or degenerate traces get a stub instead
// of failing the whole run.
json build_report(const FlowTrace& tr, double gap_floor, double tail_fraction) {
  json report;
  try {
    double j_star = estimate_j_star(tr, tail_fraction);
    LSFit ls = ls_fit(tr, j_star, gap_floor, tail_fraction);
    RateFit rf = rate_fit(tr, j_star, ls.alpha, ls.c, gap_floor, tail_fraction);
    report = analysis_report(j_star, ls, rf);
  } catch (const Error& e) {
    if (e.code != Errc::FitFailure && e.code != Errc::InsufficientData) throw;
    report = json{{"skipped", e.what()}};
  }
  if (tr.records.size() >= 2) report["dissipation"] = dissipation_json(tr);
  report["stop_reason"] = tr.stop_reason;
  report["steps"] = tr.steps_taken;
  report["final"] = json{{"tau", tr.records.back().tau},
                         {"J", tr.records.back().j},
                         {"slope", tr.records.back().slope},
                         {"residual", tr.records.back().residual}};
  return report;
}

int cmd_run(const ExperimentConfig& cfg, const std::string& out_flag) {
  std::string out = resolve_out_dir(out_flag, cfg.io.out_dir);
  fs::create_directories(out);

  VectorFieldModel model = make_model(model_kind_from_name(cfg.model.kind), cfg.model.d);
  DataMeasure data = make_dataset(cfg, cfg.flow.seed);
  ParameterPath path0 = make_initial_path(cfg, model.m, cfg.flow.seed + 1);

  // sanity-check the field's growth certificate over the working region
  double r0 = std::max(1.0, support_radius(path0));
  certify_growth(model, 256, 2.0 * r0, cfg.flow.seed + 2);

  FlowConfig fc = cfg.flow;
  fc.snapshot_stride = cfg.io.snapshot_stride;
  FlowTrace tr = run_flow(model, path0, data, fc);

  write_in(out, "trace.csv", trace_to_csv(tr));

  json snaps = json::array();
  for (size_t i = 0; i < tr.snapshots.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%04zu.bin", i);
    write_snapshot(tr.snapshots[i], (fs::path(out) / name).string());
    snaps.push_back(json{{"file", name}, {"tau", tr.snapshot_taus[i]}});
  }

  json report = build_report(tr, cfg.analysis.gap_floor, cfg.analysis.tail_fraction);
  write_in(out, "report.json", report.dump(2) + "\n");

  json manifest{{"version", kVersion},
                {"seed", cfg.flow.seed},
                {"threads", cfg.flow.threads},
                {"config", config_to_json(cfg)},
                {"stop_reason", tr.stop_reason},
                {"steps", tr.steps_taken},
                {"outputs",
                 json{{"trace", "trace.csv"}, {"report", "report.json"}, {"snapshots", snaps}}}};
  write_in(out, "manifest.json", manifest.dump(2) + "\n");

  std::printf("run: %d steps, stop=%s, final J=%.6g slope=%.3e -> %s\n", tr.steps_taken,
              tr.stop_reason.c_str(), tr.records.back().j, tr.records.back().slope, out.c_str());
  return 0;
}

// central differences against the assembled gradient; perturb != 0 is the
// sabotage hook for wiring tests
double fd_sweep_max_rel_err(const VectorFieldModel& model, const ParameterPath& path,
                            const DataMeasure& data, double lambda, int substeps, int threads,
                            double perturb) {
  FlowPoint fp = eval_objective_with_gradient(model, path, data, lambda, substeps, threads);
  GradientField g = fp.gradient;
  for (double& x : g.g) x += perturb;
  double gnorm = 0.0;
  for (double x : g.g) gnorm = std::max(gnorm, std::abs(x));

  const double h = 1e-5;
  const int m = path.m();
  double worst = 0.0;
  for (int k = 0; k < path.L(); ++k)
    for (int j = 0; j < path.N(); ++j)
      for (int c = 0; c < m; ++c) {
        ParameterPath pp = path, pm = path;
        pp.layers[k].pts[static_cast<size_t>(j) * m + c] += h;
        pm.layers[k].pts[static_cast<size_t>(j) * m + c] -= h;
        double jp = eval_objective(model, pp, data, lambda, substeps, threads).j;
        double jm = eval_objective(model, pm, data, lambda, substeps, threads).j;
        double fd = (jp - jm) / (2.0 * h) / (path.layers[k].weights[j] * path.dt(k));
        double an = g.at(k, j)[c];
        double denom = std::max({std::abs(fd), std::abs(an), 1e-6 * std::max(1.0, gnorm)});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
  return worst;
}

int cmd_grad_check(const ExperimentConfig& cfg, double perturb, int instances) {
  VectorFieldModel model = make_model(model_kind_from_name(cfg.model.kind), cfg.model.d);
  double worst = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    DataMeasure data = make_dataset(cfg, cfg.flow.seed + 1000 + inst);
    ParameterPath path = make_initial_path(cfg, model.m, cfg.flow.seed + 2000 + inst);
    worst = std::max(worst, fd_sweep_max_rel_err(model, path, data, cfg.flow.lambda,
                                                 cfg.flow.substeps, cfg.flow.threads, perturb));
  }
  bool ok = worst <= 1e-6;
  std::printf("grad-check: %s model=%s d=%d instances=%d max_rel_err=%.3e (tol 1e-6)\n",
              ok ? "PASS" : "FAIL", cfg.model.kind.c_str(), cfg.model.d, instances, worst);
  return ok ? 0 : 4;
}

int cmd_w2_selftest(std::uint64_t seed, int count) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    int n = rng.uniform_int(2, 6);
    int m = rng.uniform_int(1, 5);
    std::vector<double> pa(static_cast<size_t>(n) * m), pb(static_cast<size_t>(n) * m);
    for (auto& x : pa) x = rng.normal();
    for (auto& x : pb) x = rng.normal();
    DiscreteMeasure a = make_uniform_measure(m, std::move(pa));
    DiscreteMeasure b = make_uniform_measure(m, std::move(pb));
    worst = std::max(worst, std::abs(w2(a, b) - w2_brute_force(a, b)));
  }
  bool ok = worst <= 1e-10;
  std::printf("w2-selftest: %s %d instances, max |w2 - brute| = %.3e (tol 1e-10)\n",
              ok ? "PASS" : "FAIL", count, worst);
  return ok ? 0 : 4;
}

int cmd_rate_fit(const std::string& trace_path, const std::string& out_flag, double gap_floor,
                 double tail_fraction) {
  FlowTrace tr;
  try {
    tr = trace_from_csv(read_text_file(trace_path));
    require(!tr.records.empty(), Errc::IoError, "trace has no data rows");
    double j_star = estimate_j_star(tr, tail_fraction);
    LSFit ls = ls_fit(tr, j_star, gap_floor, tail_fraction);
    RateFit rf = rate_fit(tr, j_star, ls.alpha, ls.c, gap_floor, tail_fraction);
    json report = analysis_report(j_star, ls, rf);
    if (tr.records.size() >= 2) report["dissipation"] = dissipation_json(tr);

    std::string out = resolve_out_dir(out_flag, "");
    fs::create_directories(out);
    write_in(out, "report.json", report.dump(2) + "\n");
    std::printf("%s\n", report.dump(2).c_str());
    return 0;
  } catch (const Error& e) {
    // a trace that cannot support a fit is bad input, not a numerical failure
    if (e.code == Errc::FitFailure || e.code == Errc::InsufficientData) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    }
    throw;
  }
}

int cmd_convexity_probe(const ExperimentConfig& cfg, int count, const std::string& out_flag) {
  VectorFieldModel model = make_model(model_kind_from_name(cfg.model.kind), cfg.model.d);
  DataMeasure data = make_dataset(cfg, cfg.flow.seed);
  ParameterPath base = make_initial_path(cfg, model.m, cfg.flow.seed + 1);

  double max_ratio = 0.0, min_lambda = 0.0;
  bool any = false;
  for (int g = 0; g < count; ++g) {
    ParameterPath p1 = make_initial_path(cfg, model.m, cfg.flow.seed + 100 + 2 * g);
    ParameterPath p2 = make_initial_path(cfg, model.m, cfg.flow.seed + 101 + 2 * g);
    ConvexityReport rep =
        convexity_probe(model, p1, p2, base, data, cfg.flow.lambda, cfg.flow.substeps,
                        cfg.analysis.probe_grid, cfg.flow.threads);
    if (rep.degenerate) continue;
    double ratio = rep.lip / rep.w2_sq;
    if (!any || ratio > max_ratio) max_ratio = ratio;
    if (!any || rep.lambda_est < min_lambda) min_lambda = rep.lambda_est;
    any = true;
  }
  require(any, Errc::InsufficientData, "all probed geodesics were degenerate");

  json report{{"geodesics", count},
              {"grid", cfg.analysis.probe_grid},
              {"lambda", cfg.flow.lambda},
              {"seed", cfg.flow.seed},
              {"max_secant_ratio", max_ratio},
              {"min_lambda_est", min_lambda}};
  std::string out = resolve_out_dir(out_flag, cfg.io.out_dir);
  fs::create_directories(out);
  write_in(out, "convexity.json", report.dump(2) + "\n");
  std::printf("%s\n", report.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mflab: particle gradient-flow experiments"};
  app.require_subcommand(1);

  std::string config_path, out_flag, trace_path, model_override;
  std::uint64_t seed = 0;
  int threads = 0;
  int gc_instances = 3, w2_count = 50, cp_count = 20;
  double perturb = 0.0;

  auto* run = app.add_subcommand("run", "integrate the flow described by a config");
  run->add_option("--config", config_path, "experiment config file")->required();
  auto* run_seed = run->add_option("--seed", seed, "override flow.seed");
  auto* run_threads = run->add_option("--threads", threads, "worker threads (0 = all cores)");
  run->add_option("--out", out_flag, "output directory");

  auto* gc = app.add_subcommand("grad-check", "compare the adjoint gradient with differences");
  auto* gc_config = gc->add_option("--config", config_path, "experiment config file");
  gc->add_option("--model", model_override, "override model.kind");
  auto* gc_seed = gc->add_option("--seed", seed, "override flow.seed");
  auto* gc_threads = gc->add_option("--threads", threads, "worker threads");
  gc->add_option("--instances", gc_instances, "random instances to sweep");
  gc->add_option("--perturb-gradient", perturb, "test hook: bias the gradient by this much");

  auto* w2s = app.add_subcommand("w2-selftest", "exact transport vs brute-force enumeration");
  w2s->add_option("--seed", seed, "rng seed");
  w2s->add_option("--count", w2_count, "instances");

  auto* rf = app.add_subcommand("rate-fit", "fit convergence-rate models to a trace.csv");
  rf->add_option("--trace", trace_path, "trace.csv produced by run")->required();
  rf->add_option("--out", out_flag, "output directory for report.json");
  double gap_floor = 1e-12, tail_fraction = 0.5;
  rf->add_option("--gap-floor", gap_floor, "exclude points with J - J* below this");
  rf->add_option("--tail-fraction", tail_fraction, "fraction of the trace to fit");

  auto* cp = app.add_subcommand("convexity-probe", "secant slopes of h along random geodesics");
  cp->add_option("--config", config_path, "experiment config file")->required();
  auto* cp_seed = cp->add_option("--seed", seed, "override flow.seed");
  auto* cp_threads = cp->add_option("--threads", threads, "worker threads");
  cp->add_option("--count", cp_count, "geodesics to probe");
  cp->add_option("--out", out_flag, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (run->parsed()) {
      ExperimentConfig cfg = load_config(config_path);
      if (run_seed->count()) cfg.flow.seed = seed;
      if (run_threads->count()) cfg.flow.threads = threads;
      return cmd_run(cfg, out_flag);
    }
    if (gc->parsed()) {
      ExperimentConfig cfg;
      if (gc_config->count()) cfg = load_config(config_path);
      if (!model_override.empty()) {
        cfg.model.kind = model_override;
        cfg.validate();
      }
      if (gc_seed->count()) cfg.flow.seed = seed;
      if (gc_threads->count()) cfg.flow.threads = threads;
      require(gc_instances >= 1, Errc::ConfigError, "--instances must be >= 1");
      return cmd_grad_check(cfg, perturb, gc_instances);
    }
    if (w2s->parsed()) return cmd_w2_selftest(seed, w2_count);
    if (rf->parsed()) return cmd_rate_fit(trace_path, out_flag, gap_floor, tail_fraction);
    ExperimentConfig cfg = load_config(config_path);
    if (cp_seed->count()) cfg.flow.seed = seed;
    if (cp_threads->count()) cfg.flow.threads = threads;
    return cmd_convexity_probe(cfg, cp_count, out_flag);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
