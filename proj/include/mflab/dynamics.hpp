#pragma once
#include <vector>

#include "mflab/measures.hpp"
#include "mflab/model.hpp"

namespace mflab {

// Forward integration of x' = sum_j w_j v(x, theta_j^(k)) through the layers
// of a ParameterPath, classic RK4 with `substeps` steps per layer and the
// field frozen within each layer. Node grid has L*S+1 points; stage inputs
// are recorded so the adjoint sweep can differentiate the scheme itself.
struct ForwardTrace {
  int n_samples = 0, d = 0, L = 0, S = 0;
  std::vector<double> node_t;        // L*S+1
  std::vector<double> states;        // n * (L*S+1) * d
  std::vector<double> stage_inputs;  // n * (L*S) * 4 * d
  double gronwall_ratio = 0.0;       // max |X| relative to the certified envelope

  int nodes() const { return L * S + 1; }
  int steps() const { return L * S; }
  const double* state(int sample, int node) const {
    return states.data() + (static_cast<size_t>(sample) * nodes() + node) * d;
  }
  double* state(int sample, int node) {
    return states.data() + (static_cast<size_t>(sample) * nodes() + node) * d;
  }
  const double* stage_in(int sample, int step, int stage) const {
    return stage_inputs.data() +
           ((static_cast<size_t>(sample) * steps() + step) * 4 + stage) * d;
  }
  double* stage_in(int sample, int step, int stage) {
    return stage_inputs.data() +
           ((static_cast<size_t>(sample) * steps() + step) * 4 + stage) * d;
  }
};

// threads: 0 = OpenMP default, 1 = plain serial loop (reference path), else
// that many OpenMP threads. Results are bitwise identical for every setting.
ForwardTrace integrate_forward(const VectorFieldModel& model, const ParameterPath& path,
                               const DataMeasure& data, int substeps, int threads = 0);

// terminal states as a measure: points X_1(x_i), weights w_i
DiscreteMeasure push_forward(const VectorFieldModel& model, const ParameterPath& path,
                             const DataMeasure& data, int substeps);

// Reverse sweep through the recorded RK4 computation graph. costates[node]
// holds p_t = d loss(X_1, y_i) / d X_t for each sample (unweighted by w_i);
// stage_adjoints holds the per-stage sensitivities used to assemble parameter
// gradients and flat-derivative probes.
struct CostateTrace {
  int n_samples = 0, d = 0, L = 0, S = 0;
  std::vector<double> costates;        // n * (L*S+1) * d
  std::vector<double> stage_adjoints;  // n * (L*S) * 4 * d

  int nodes() const { return L * S + 1; }
  int steps() const { return L * S; }
  const double* costate(int sample, int node) const {
    return costates.data() + (static_cast<size_t>(sample) * nodes() + node) * d;
  }
  double* costate(int sample, int node) {
    return costates.data() + (static_cast<size_t>(sample) * nodes() + node) * d;
  }
  const double* stage_adj(int sample, int step, int stage) const {
    return stage_adjoints.data() +
           ((static_cast<size_t>(sample) * steps() + step) * 4 + stage) * d;
  }
  double* stage_adj(int sample, int step, int stage) {
    return stage_adjoints.data() +
           ((static_cast<size_t>(sample) * steps() + step) * 4 + stage) * d;
  }
};

CostateTrace integrate_costate(const VectorFieldModel& model, const ParameterPath& path,
                               const DataMeasure& data, const ForwardTrace& fwd,
                               int threads = 0);

// Tangent map of the discrete flow between two node indices (node_a <= node_b)
// for one sample: d X_{node_b} / d X_{node_a}, returned d x d row-major.
// Composing over subintervals reproduces the whole-interval matrix exactly.
std::vector<double> fundamental_matrix(const VectorFieldModel& model, const ParameterPath& path,
                                       const ForwardTrace& fwd, int sample, int node_a,
                                       int node_b);

}  // namespace mflab
