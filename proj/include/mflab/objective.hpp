#pragma once
#include <vector>

#include "mflab/dynamics.hpp"
#include "mflab/measures.hpp"
#include "mflab/model.hpp"

namespace mflab {

// J = sum_i w_i loss(X_1(x_i), y_i) + (lambda/2) sum_k dt_k sum_j w_j |theta_j|^2
struct ObjectiveReport {
  double j = 0.0;
  double loss = 0.0;
  double regularizer = 0.0;
  double slope = 0.0;  // filled when the gradient is available, else 0
};

// Per-(layer, particle) steepest-descent direction of J in the transport
// metric: G[k][j] = lambda theta_j + (1/dt_k) sum_i w_i sum_stages
// (d_theta v(u_s, theta_j))^T a_s. The coordinate gradient of the discretized
// J is recovered exactly as dJ/dtheta_j^(k) = w_j dt_k G[k][j].
struct GradientField {
  int L = 0, N = 0, m = 0;
  std::vector<double> g;  // L*N*m

  const double* at(int k, int j) const {
    return g.data() + (static_cast<size_t>(k) * N + j) * m;
  }
  double* at(int k, int j) { return g.data() + (static_cast<size_t>(k) * N + j) * m; }
};

ObjectiveReport eval_objective(const VectorFieldModel& model, const ParameterPath& path,
                               const DataMeasure& data, double lambda, int substeps,
                               int threads = 0);

GradientField wasserstein_gradient(const VectorFieldModel& model, const ParameterPath& path,
                                   const DataMeasure& data, double lambda, int substeps,
                                   int threads = 0);

// one forward/adjoint pass serving both numbers; report.slope is filled
struct FlowPoint {
  ObjectiveReport report;
  GradientField gradient;
};
FlowPoint eval_objective_with_gradient(const VectorFieldModel& model, const ParameterPath& path,
                                       const DataMeasure& data, double lambda, int substeps,
                                       int threads = 0);

// sqrt( sum_k dt_k sum_j w_j |G[k][j]|^2 ) — the minimal-selection slope
double metric_slope(const GradientField& grad, const ParameterPath& path);

// sup-norm over all entries of G
double critical_point_residual(const GradientField& grad);

// First variation of the data-fit term with respect to the parameter measure:
// eval(k, theta) is the layer-averaged pairing of the costate with v(., theta),
// i.e. the per-unit-mass sensitivity of the loss to adding particles at theta
// in layer k. Its theta-gradient at a particle equals G[k][j] - lambda theta_j.
class LossDerivative {
 public:
  LossDerivative(const VectorFieldModel& model, const ParameterPath& path,
                 const DataMeasure& data, int substeps, int threads = 0);

  double eval(int layer, const double* theta) const;
  int layers() const { return L_; }

 private:
  VectorFieldModel model_;
  std::vector<double> dt_;
  int n_ = 0, L_ = 0, S_ = 0, d_ = 0;
  // per (sample, step, stage): stage input u (d) then w_i-scaled adjoint (d)
  std::vector<double> recs_;
};

LossDerivative functional_derivative(const VectorFieldModel& model, const ParameterPath& path,
                                     const DataMeasure& data, int substeps, int threads = 0);

}  // namespace mflab
