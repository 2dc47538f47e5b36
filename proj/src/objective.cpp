#include "mflab/objective.hpp"

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mflab/smallmat.hpp"

namespace mflab {

namespace {

// Fixed-topology pairwise reduction: the summation tree depends only on the
// slot count, so totals are bitwise reproducible for any thread count.
double tree_sum(std::vector<double> v) {
  if (v.empty()) return 0.0;
  size_t n = v.size();
  while (n > 1) {
    size_t half = n / 2;
    for (size_t i = 0; i < half; ++i) v[i] = v[2 * i] + v[2 * i + 1];
    if (n % 2) v[half] = v[n - 1];
    n = half + n % 2;
  }
  return v[0];
}

double regularizer_term(const ParameterPath& path, double lambda) {
  return 0.5 * lambda * second_moment(path);
}

int resolve_threads(int threads) {
#ifdef _OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

double data_loss(const ForwardTrace& fwd, const DataMeasure& data) {
  std::vector<double> per_sample(data.n());
  for (int i = 0; i < data.n(); ++i)
    per_sample[i] = data.weights[i] * loss_value(fwd.state(i, fwd.steps()), data.y(i), fwd.d);
  return tree_sum(std::move(per_sample));
}

}  // namespace

ObjectiveReport eval_objective(const VectorFieldModel& model, const ParameterPath& path,
                               const DataMeasure& data, double lambda, int substeps,
                               int threads) {
  require(lambda >= 0.0, Errc::ShapeMismatch, "lambda must be nonnegative");
  auto fwd = integrate_forward(model, path, data, substeps, threads);
  ObjectiveReport rep;
  rep.loss = data_loss(fwd, data);
  rep.regularizer = regularizer_term(path, lambda);
  rep.j = rep.loss + rep.regularizer;
  return rep;
}

namespace {

// loss part of the gradient: (1/dt_k) sum_i w_i sum_{steps in k, stages}
// (d_theta v(u_s, theta_j))^T a_s, laid out like GradientField.
// Parallelism is over (k, j) work items; each item accumulates its own entry
// in a fixed order, so no cross-thread reduction is ever needed.
void accumulate_loss_gradient(const VectorFieldModel& model, const ParameterPath& path,
                              const DataMeasure& data, const ForwardTrace& fwd,
                              const CostateTrace& cst, GradientField& grad, int threads) {
  const int d = model.d, m = model.m, S = fwd.S, L = path.L(), N = path.N();
  const int items = L * N;
  auto work = [&](int item) {
    const int k = item / N, j = item % N;
    const double* theta = path.layers[k].pt(j);
    double* out = grad.at(k, j);
    std::vector<double> acc(m, 0.0), wa(d);
    for (int i = 0; i < data.n(); ++i) {
      const double wi = data.weights[i];
      for (int step = k * S; step < (k + 1) * S; ++step)
        for (int stage = 0; stage < 4; ++stage) {
          const double* a = cst.stage_adj(i, step, stage);
          for (int c = 0; c < d; ++c) wa[c] = wi * a[c];
          model.vjp_theta_acc(fwd.stage_in(i, step, stage), theta, wa.data(), acc.data());
        }
    }
    const double inv_dt = 1.0 / path.dt(k);
    for (int c = 0; c < m; ++c) out[c] += inv_dt * acc[c];
  };
  if (threads == 1) {
    for (int item = 0; item < items; ++item) work(item);
  } else {
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
#endif
    for (int item = 0; item < items; ++item) work(item);
    (void)nt;
  }
}

}  // namespace

GradientField wasserstein_gradient(const VectorFieldModel& model, const ParameterPath& path,
                                   const DataMeasure& data, double lambda, int substeps,
                                   int threads) {
  return eval_objective_with_gradient(model, path, data, lambda, substeps, threads).gradient;
}

FlowPoint eval_objective_with_gradient(const VectorFieldModel& model, const ParameterPath& path,
                                       const DataMeasure& data, double lambda, int substeps,
                                       int threads) {
  require(lambda >= 0.0, Errc::ShapeMismatch, "lambda must be nonnegative");
  auto fwd = integrate_forward(model, path, data, substeps, threads);
  auto cst = integrate_costate(model, path, data, fwd, threads);

  FlowPoint fp;
  fp.gradient.L = path.L();
  fp.gradient.N = path.N();
  fp.gradient.m = path.m();
  fp.gradient.g.assign(static_cast<size_t>(path.L()) * path.N() * path.m(), 0.0);
  for (int k = 0; k < path.L(); ++k)
    for (int j = 0; j < path.N(); ++j)
      axpy(lambda, path.layers[k].pt(j), fp.gradient.at(k, j), path.m());
  accumulate_loss_gradient(model, path, data, fwd, cst, fp.gradient, threads);
  require(all_finite(fp.gradient.g), Errc::NonFiniteState, "gradient became non-finite");

  fp.report.loss = data_loss(fwd, data);
  fp.report.regularizer = regularizer_term(path, lambda);
  fp.report.j = fp.report.loss + fp.report.regularizer;
  fp.report.slope = metric_slope(fp.gradient, path);
  return fp;
}

double metric_slope(const GradientField& grad, const ParameterPath& path) {
  require(grad.L == path.L() && grad.N == path.N() && grad.m == path.m(), Errc::ShapeMismatch,
          "gradient field does not match the path");
  double acc = 0.0;
  for (int k = 0; k < grad.L; ++k) {
    double layer = 0.0;
    for (int j = 0; j < grad.N; ++j)
      layer += path.layers[k].weights[j] * dot(grad.at(k, j), grad.at(k, j), grad.m);
    acc += path.dt(k) * layer;
  }
  return std::sqrt(acc);
}

double critical_point_residual(const GradientField& grad) {
  double worst = 0.0;
  for (double v : grad.g) worst = std::max(worst, std::abs(v));
  return worst;
}

LossDerivative::LossDerivative(const VectorFieldModel& model, const ParameterPath& path,
                               const DataMeasure& data, int substeps, int threads)
    : model_(model) {
  auto fwd = integrate_forward(model, path, data, substeps, threads);
  auto cst = integrate_costate(model, path, data, fwd, threads);
  n_ = data.n();
  L_ = path.L();
  S_ = substeps;
  d_ = model.d;
  dt_.resize(L_);
  for (int k = 0; k < L_; ++k) dt_[k] = path.dt(k);
  recs_.resize(static_cast<size_t>(n_) * L_ * S_ * 4 * 2 * d_);
  size_t pos = 0;
  for (int i = 0; i < n_; ++i) {
    const double wi = data.weights[i];
    for (int step = 0; step < L_ * S_; ++step)
      for (int stage = 0; stage < 4; ++stage) {
        std::memcpy(&recs_[pos], fwd.stage_in(i, step, stage), sizeof(double) * d_);
        pos += d_;
        const double* a = cst.stage_adj(i, step, stage);
        for (int c = 0; c < d_; ++c) recs_[pos + c] = wi * a[c];
        pos += d_;
      }
  }
}

double LossDerivative::eval(int layer, const double* theta) const {
  require(layer >= 0 && layer < L_, Errc::ShapeMismatch, "layer out of range");
  std::vector<double> v(d_);
  double acc = 0.0;
  const size_t stride = static_cast<size_t>(L_) * S_ * 4 * 2 * d_;
  for (int i = 0; i < n_; ++i) {
    const double* base = recs_.data() + i * stride;
    for (int step = layer * S_; step < (layer + 1) * S_; ++step)
      for (int stage = 0; stage < 4; ++stage) {
        const double* rec = base + (static_cast<size_t>(step) * 4 + stage) * 2 * d_;
        model_.eval_v(rec, theta, v.data());
        acc += dot(rec + d_, v.data(), d_);
      }
  }
  return acc / dt_[layer];
}

LossDerivative functional_derivative(const VectorFieldModel& model, const ParameterPath& path,
                                     const DataMeasure& data, int substeps, int threads) {
  return LossDerivative(model, path, data, substeps, threads);
}

}  // namespace mflab
