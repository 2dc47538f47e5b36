#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mflab/measures.hpp"
#include "mflab/model.hpp"
#include "mflab/objective.hpp"

namespace mflab {

// Explicit Euler on particle locations, i.e. gradient descent on the
// discretized objective. Backtracking (optional) shrinks a step until the
// objective stops increasing.
struct FlowConfig {
  double lambda = 0.1;
  double dtau = 1e-3;       // nominal step size
  double tau_max = 10.0;    // horizon
  double stop_slope = 0.0;  // stop once slope < stop_slope
  int record_every = 1;     // diagnostics stride, in steps
  int substeps = 8;         // RK4 substeps per layer
  std::uint64_t seed = 0;   // consumed by experiment drivers, not by the loop
  bool backtracking = false;
  double shrink = 0.5;  // per-rejection step multiplier
  int max_shrinks = 30;
  int snapshot_stride = 0;  // keep the path every this many steps; 0 = final only
  int threads = 0;          // 0 = runtime default

  void validate() const;
};

struct StepReport {
  double step_size = 0.0;  // actually applied after any shrinking
  int shrinks = 0;
  double j_before = 0.0;
  double j_after = 0.0;
};

struct FlowRecord {
  double tau = 0.0;
  double j = 0.0;
  double loss = 0.0;
  double reg = 0.0;
  double slope = 0.0;
  double support_radius = 0.0;
  double dirichlet = 0.0;   // 0 for single-layer paths
  double step_size = 0.0;   // size of the step that produced this state; 0 at tau=0
  bool accepted = true;
  double residual = 0.0;  // sup-norm of the gradient field; not a CSV column
};

struct FlowTrace {
  std::vector<FlowRecord> records;  // tau strictly increasing
  std::vector<double> snapshot_taus;
  std::vector<ParameterPath> snapshots;  // parallel to snapshot_taus; last = final state
  std::string stop_reason;               // "converged" or "horizon"
  int steps_taken = 0;

  const ParameterPath& final_path() const;
};

std::pair<ParameterPath, StepReport> flow_step(const VectorFieldModel& model,
                                               const ParameterPath& path, const DataMeasure& data,
                                               const FlowConfig& cfg);

FlowTrace run_flow(const VectorFieldModel& model, const ParameterPath& path0,
                   const DataMeasure& data, const FlowConfig& cfg);

// Energy-identity bookkeeping: the drop J(tau_0) - J(tau_1) against the
// trapezoidal integral of slope^2 over the recorded samples.
struct DissipationReport {
  double drop = 0.0;
  double integral = 0.0;
  double mismatch = 0.0;  // relative to the larger of the two; 0 when both vanish
};

DissipationReport dissipation_check(const FlowTrace& trace);

// ---- trace serialization (CRLF rows, %.17g) ----
std::string trace_csv_header();
std::string trace_csv_row(const FlowRecord& r);
std::string trace_to_csv(const FlowTrace& trace);

// strict inverse of trace_to_csv (no snapshots; residual is not a CSV column)
FlowTrace trace_from_csv(const std::string& text);

}  // namespace mflab
