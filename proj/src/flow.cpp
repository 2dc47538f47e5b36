#include "mflab/flow.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>

namespace mflab {

void FlowConfig::validate() const {
  require(lambda > 0.0 && std::isfinite(lambda), Errc::ConfigError, "lambda must be positive");
  require(dtau > 0.0 && std::isfinite(dtau), Errc::ConfigError, "dtau must be positive");
  require(tau_max >= 0.0 && std::isfinite(tau_max), Errc::ConfigError,
          "tau_max must be nonnegative");
  require(stop_slope >= 0.0, Errc::ConfigError, "stop_slope must be nonnegative");
  require(record_every >= 1, Errc::ConfigError, "record_every must be >= 1");
  require(substeps >= 1, Errc::ConfigError, "substeps must be >= 1");
  require(shrink > 0.0 && shrink < 1.0, Errc::ConfigError, "shrink must lie in (0,1)");
  require(max_shrinks >= 0, Errc::ConfigError, "max_shrinks must be nonnegative");
  require(snapshot_stride >= 0, Errc::ConfigError, "snapshot_stride must be nonnegative");
  require(threads >= 0, Errc::ConfigError, "threads must be nonnegative");
}

const ParameterPath& FlowTrace::final_path() const {
  require(!snapshots.empty(), Errc::InsufficientData, "trace holds no snapshots");
  return snapshots.back();
}

namespace {

struct StepOutcome {
  ParameterPath path;
  FlowPoint fp;
  StepReport rep;
};

// One accepted Euler step from `here`, shrinking on rejection when enabled.
// The returned FlowPoint is the evaluation at the new path, so a driver loop
// pays one gradient evaluation per step.
StepOutcome take_step(const VectorFieldModel& model, const ParameterPath& cur,
                      const DataMeasure& data, const FlowConfig& cfg, const FlowPoint& here) {
  double dt = cfg.dtau;
  for (int attempt = 0;; ++attempt) {
    ParameterPath trial = cur;
    for (int k = 0; k < cur.L(); ++k) {
      double* p = trial.layers[k].pts.data();
      const double* g = here.gradient.at(k, 0);
      const size_t nm = trial.layers[k].pts.size();
      for (size_t c = 0; c < nm; ++c) p[c] -= dt * g[c];
    }
    bool ok = true;
    FlowPoint next;
    if (!cfg.backtracking) {
      next = eval_objective_with_gradient(model, trial, data, cfg.lambda, cfg.substeps,
                                          cfg.threads);
    } else {
      try {
        next = eval_objective_with_gradient(model, trial, data, cfg.lambda, cfg.substeps,
                                            cfg.threads);
        ok = std::isfinite(next.report.j) && next.report.j <= here.report.j;
      } catch (const Error& e) {
        if (e.code != Errc::NonFiniteState) throw;
        ok = false;  // blow-up counts as a rejected step
      }
    }
    if (ok) {
      StepReport rep;
      rep.step_size = dt;
      rep.shrinks = attempt;
      rep.j_before = here.report.j;
      rep.j_after = next.report.j;
      return {std::move(trial), std::move(next), rep};
    }
    require(attempt < cfg.max_shrinks, Errc::StepFailure,
            "backtracking exhausted without decreasing the objective");
    dt *= cfg.shrink;
  }
}

}  // namespace

std::pair<ParameterPath, StepReport> flow_step(const VectorFieldModel& model,
                                               const ParameterPath& path, const DataMeasure& data,
                                               const FlowConfig& cfg) {
  cfg.validate();
  FlowPoint here =
      eval_objective_with_gradient(model, path, data, cfg.lambda, cfg.substeps, cfg.threads);
  StepOutcome out = take_step(model, path, data, cfg, here);
  return {std::move(out.path), out.rep};
}

FlowTrace run_flow(const VectorFieldModel& model, const ParameterPath& path0,
                   const DataMeasure& data, const FlowConfig& cfg) {
  cfg.validate();
  path0.validate();
  data.validate();

  FlowTrace tr;
  ParameterPath cur = path0;
  FlowPoint fp =
      eval_objective_with_gradient(model, cur, data, cfg.lambda, cfg.substeps, cfg.threads);

  double tau = 0.0;
  int step = 0;
  int last_recorded = -1;
  int last_snapped = -1;

  auto emit = [&](double step_size) {
    FlowRecord r;
    r.tau = tau;
    r.j = fp.report.j;
    r.loss = fp.report.loss;
    r.reg = fp.report.regularizer;
    r.slope = fp.report.slope;
    r.support_radius = support_radius(cur);
    r.dirichlet = cur.L() >= 2 ? dirichlet_energy(cur) : 0.0;
    r.step_size = step_size;
    r.accepted = true;
    r.residual = critical_point_residual(fp.gradient);
    tr.records.push_back(r);
    last_recorded = step;
  };
  auto snap = [&] {
    tr.snapshot_taus.push_back(tau);
    tr.snapshots.push_back(cur);
    last_snapped = step;
  };

  emit(0.0);
  if (cfg.snapshot_stride > 0) snap();

  double last_step_size = 0.0;
  for (;;) {
    if (fp.report.slope < cfg.stop_slope) {
      tr.stop_reason = "converged";
      break;
    }
    if (tau >= cfg.tau_max * (1.0 - 1e-9)) {
      tr.stop_reason = "horizon";
      break;
    }
    StepOutcome out = take_step(model, cur, data, cfg, fp);
    cur = std::move(out.path);
    fp = std::move(out.fp);
    tau += out.rep.step_size;
    last_step_size = out.rep.step_size;
    ++step;
    if (step % cfg.record_every == 0) emit(out.rep.step_size);
    if (cfg.snapshot_stride > 0 && step % cfg.snapshot_stride == 0) snap();
  }

  if (last_recorded != step) emit(last_step_size);
  if (last_snapped != step) snap();
  tr.steps_taken = step;
  return tr;
}

DissipationReport dissipation_check(const FlowTrace& trace) {
  require(trace.records.size() >= 2, Errc::InsufficientData,
          "dissipation check needs at least two records");
  DissipationReport rep;
  rep.drop = trace.records.front().j - trace.records.back().j;
  for (size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const FlowRecord& a = trace.records[i];
    const FlowRecord& b = trace.records[i + 1];
    rep.integral += 0.5 * (a.slope * a.slope + b.slope * b.slope) * (b.tau - a.tau);
  }
  double den = std::max(std::abs(rep.drop), std::abs(rep.integral));
  rep.mismatch = den == 0.0 ? 0.0 : std::abs(rep.drop - rep.integral) / den;
  return rep;
}

std::string trace_csv_header() {
  return "tau,J,L,reg,slope,support_radius,dirichlet,step_size,accepted\r\n";
}

std::string trace_csv_row(const FlowRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\r\n", r.tau,
                r.j, r.loss, r.reg, r.slope, r.support_radius, r.dirichlet, r.step_size,
                r.accepted ? 1 : 0);
  return buf;
}

std::string trace_to_csv(const FlowTrace& trace) {
  std::string out = trace_csv_header();
  for (const FlowRecord& r : trace.records) out += trace_csv_row(r);
  return out;
}

FlowTrace trace_from_csv(const std::string& text) {
  size_t pos = 0;
  auto next_line = [&](std::string& out) {
    if (pos >= text.size()) return false;
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      out = text.substr(pos);
      pos = text.size();
    } else {
      out = text.substr(pos, nl - pos);
      pos = nl + 1;
    }
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  };
  auto num = [](const std::string& s) {
    require(!s.empty(), Errc::IoError, "empty field in trace csv");
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    require(end == s.c_str() + s.size() && std::isfinite(v), Errc::IoError,
            "bad number in trace csv: '" + s + "'");
    return v;
  };

  FlowTrace tr;
  std::string line;
  require(next_line(line), Errc::IoError, "empty trace csv");
  require(line == "tau,J,L,reg,slope,support_radius,dirichlet,step_size,accepted", Errc::IoError,
          "unexpected trace csv header");
  while (next_line(line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    size_t p = 0;
    for (;;) {
      size_t c = line.find(',', p);
      if (c == std::string::npos) {
        f.push_back(line.substr(p));
        break;
      }
      f.push_back(line.substr(p, c - p));
      p = c + 1;
    }
    require(f.size() == 9, Errc::IoError, "trace csv row needs 9 columns");
    FlowRecord r;
    r.tau = num(f[0]);
    r.j = num(f[1]);
    r.loss = num(f[2]);
    r.reg = num(f[3]);
    r.slope = num(f[4]);
    r.support_radius = num(f[5]);
    r.dirichlet = num(f[6]);
    r.step_size = num(f[7]);
    double acc = num(f[8]);
    require(acc == 0.0 || acc == 1.0, Errc::IoError, "accepted flag must be 0 or 1");
    r.accepted = acc == 1.0;
    tr.records.push_back(r);
  }
  return tr;
}

}  // namespace mflab
