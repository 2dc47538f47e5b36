#include "mflab/dynamics.hpp"

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mflab/smallmat.hpp"

namespace mflab {

namespace {

void check_shapes(const VectorFieldModel& model, const ParameterPath& path,
                  const DataMeasure& data, int substeps) {
  path.validate();
  data.validate();
  require(substeps >= 1, Errc::ShapeMismatch, "substeps must be >= 1");
  require(model.d == data.d, Errc::DimensionMismatch, "model and data dimensions differ");
  require(model.m == path.m(), Errc::DimensionMismatch,
          "model parameter dimension does not match the path");
}

// mean field at x for one layer: sum_j w_j v(x, theta_j)
void layer_field(const VectorFieldModel& model, const DiscreteMeasure& layer, const double* x,
                 double* out, double* scratch) {
  const int d = model.d;
  for (int c = 0; c < d; ++c) out[c] = 0.0;
  for (int j = 0; j < layer.n(); ++j) {
    model.eval_v(x, layer.pt(j), scratch);
    axpy(layer.weights[j], scratch, out, d);
  }
}

// J_x of the mean field, d x d
void layer_jac_x(const VectorFieldModel& model, const DiscreteMeasure& layer, const double* x,
                 double* out, double* scratch) {
  const int d = model.d;
  for (int c = 0; c < d * d; ++c) out[c] = 0.0;
  for (int j = 0; j < layer.n(); ++j) {
    model.jac_v_x(x, layer.pt(j), scratch);
    axpy(layer.weights[j], scratch, out, d * d);
  }
}

// (J_x of the mean field)^T a, accumulated into out
void layer_vjp_x(const VectorFieldModel& model, const DiscreteMeasure& layer, const double* x,
                 const double* a, double* out, double* scratch) {
  const int d = model.d;
  for (int c = 0; c < d; ++c) scratch[c] = 0.0;
  for (int j = 0; j < layer.n(); ++j) {
    // vjp_x_acc accumulates w_j-weighted contributions via a pre-scaled a
    for (int c = 0; c < d; ++c) scratch[d + c] = layer.weights[j] * a[c];
    model.vjp_x_acc(x, layer.pt(j), scratch + d, scratch);
  }
  for (int c = 0; c < d; ++c) out[c] += scratch[c];
}

// envelope constant K = C * max over layers of sum_j w_j |theta_j|^p
double gronwall_k(const VectorFieldModel& model, const ParameterPath& path) {
  double worst = 0.0;
  for (const auto& layer : path.layers) {
    double mean = 0.0;
    for (int j = 0; j < layer.n(); ++j)
      mean += layer.weights[j] * std::pow(norm2(layer.pt(j), layer.m), model.growth_p);
    worst = std::max(worst, mean);
  }
  return model.growth_c * worst;
}

struct SampleSweep {
  const VectorFieldModel& model;
  const ParameterPath& path;
  const DataMeasure& data;
  ForwardTrace& trace;
  double K;  // growth envelope rate

  // returns the sample's max ratio |X| / envelope
  double run(int i) const {
    const int d = model.d, S = trace.S;
    std::vector<double> k1(d), k2(d), k3(d), k4(d), scratch(d);
    std::vector<double> x(data.x(i), data.x(i) + d);
    std::memcpy(trace.state(i, 0), x.data(), sizeof(double) * d);
    const double x0n = norm2(x.data(), d);
    double worst = 0.0;
    int step = 0;
    for (int k = 0; k < path.L(); ++k) {
      const auto& layer = path.layers[k];
      const double h = path.dt(k) / S;
      for (int s = 0; s < S; ++s, ++step) {
        double* u1 = trace.stage_in(i, step, 0);
        double* u2 = trace.stage_in(i, step, 1);
        double* u3 = trace.stage_in(i, step, 2);
        double* u4 = trace.stage_in(i, step, 3);
        std::memcpy(u1, x.data(), sizeof(double) * d);
        layer_field(model, layer, u1, k1.data(), scratch.data());
        for (int c = 0; c < d; ++c) u2[c] = x[c] + 0.5 * h * k1[c];
        layer_field(model, layer, u2, k2.data(), scratch.data());
        for (int c = 0; c < d; ++c) u3[c] = x[c] + 0.5 * h * k2[c];
        layer_field(model, layer, u3, k3.data(), scratch.data());
        for (int c = 0; c < d; ++c) u4[c] = x[c] + h * k3[c];
        layer_field(model, layer, u4, k4.data(), scratch.data());
        for (int c = 0; c < d; ++c)
          x[c] += (h / 6.0) * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        require(all_finite(x.data(), d), Errc::NonFiniteState,
                "forward state became non-finite");
        std::memcpy(trace.state(i, step + 1), x.data(), sizeof(double) * d);
        double t = trace.node_t[step + 1];
        double xn = norm2(x.data(), d);
        if (xn > 1e-300) {
          // compare in logs so large K*t cannot overflow
          double log_bound = std::log(x0n + K * t + 1e-300) + K * t;
          worst = std::max(worst, std::exp(std::log(xn) - log_bound));
        }
      }
    }
    return worst;
  }
};

int resolve_threads(int threads) {
#ifdef _OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

}  // namespace

ForwardTrace integrate_forward(const VectorFieldModel& model, const ParameterPath& path,
                               const DataMeasure& data, int substeps, int threads) {
  check_shapes(model, path, data, substeps);
  ForwardTrace trace;
  trace.n_samples = data.n();
  trace.d = model.d;
  trace.L = path.L();
  trace.S = substeps;
  trace.node_t.resize(trace.nodes());
  for (int k = 0; k < path.L(); ++k)
    for (int s = 0; s < substeps; ++s)
      trace.node_t[k * substeps + s] = path.layer_grid[k] + path.dt(k) * s / substeps;
  trace.node_t[trace.steps()] = path.layer_grid.back();
  trace.states.resize(static_cast<size_t>(trace.n_samples) * trace.nodes() * trace.d);
  trace.stage_inputs.resize(static_cast<size_t>(trace.n_samples) * trace.steps() * 4 * trace.d);

  SampleSweep sweep{model, path, data, trace, gronwall_k(model, path)};
  std::vector<double> worst(data.n(), 0.0);
  if (threads == 1) {
    for (int i = 0; i < data.n(); ++i) worst[i] = sweep.run(i);
  } else {
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
#endif
    for (int i = 0; i < data.n(); ++i) worst[i] = sweep.run(i);
    (void)nt;
  }
  for (double w : worst) trace.gronwall_ratio = std::max(trace.gronwall_ratio, w);
  require(trace.gronwall_ratio <= 1.0 + 1e-6, Errc::NonFiniteState,
          "state escaped the certified growth envelope");
  return trace;
}

DiscreteMeasure push_forward(const VectorFieldModel& model, const ParameterPath& path,
                             const DataMeasure& data, int substeps) {
  auto trace = integrate_forward(model, path, data, substeps);
  DiscreteMeasure out;
  out.m = model.d;
  out.pts.resize(static_cast<size_t>(data.n()) * model.d);
  out.weights = data.weights;
  for (int i = 0; i < data.n(); ++i)
    std::memcpy(out.pts.data() + static_cast<size_t>(i) * model.d, trace.state(i, trace.steps()),
                sizeof(double) * model.d);
  return out;
}

namespace {

struct AdjointSweep {
  const VectorFieldModel& model;
  const ParameterPath& path;
  const DataMeasure& data;
  const ForwardTrace& fwd;
  CostateTrace& out;

  void run(int i) const {
    const int d = model.d, S = out.S;
    std::vector<double> p(d), dk(d), du1(d), du2(d), du3(d), du4(d), scratch(2 * d);
    grad_loss(fwd.state(i, fwd.steps()), data.y(i), d, p.data());
    std::memcpy(out.costate(i, out.steps()), p.data(), sizeof(double) * d);
    int step = out.steps() - 1;
    for (int k = path.L() - 1; k >= 0; --k) {
      const auto& layer = path.layers[k];
      const double h = path.dt(k) / S;
      for (int s = S - 1; s >= 0; --s, --step) {
        const double* u1 = fwd.stage_in(i, step, 0);
        const double* u2 = fwd.stage_in(i, step, 1);
        const double* u3 = fwd.stage_in(i, step, 2);
        const double* u4 = fwd.stage_in(i, step, 3);
        double* a1 = out.stage_adj(i, step, 0);
        double* a2 = out.stage_adj(i, step, 1);
        double* a3 = out.stage_adj(i, step, 2);
        double* a4 = out.stage_adj(i, step, 3);

        // dk4 = (h/6) p ; du4 = J4^T dk4
        for (int c = 0; c < d; ++c) a4[c] = (h / 6.0) * p[c];
        std::fill(du4.begin(), du4.end(), 0.0);
        layer_vjp_x(model, layer, u4, a4, du4.data(), scratch.data());
        // dk3 = (h/3) p + h du4 ; du3 = J3^T dk3
        for (int c = 0; c < d; ++c) a3[c] = (h / 3.0) * p[c] + h * du4[c];
        std::fill(du3.begin(), du3.end(), 0.0);
        layer_vjp_x(model, layer, u3, a3, du3.data(), scratch.data());
        // dk2 = (h/3) p + (h/2) du3 ; du2 = J2^T dk2
        for (int c = 0; c < d; ++c) a2[c] = (h / 3.0) * p[c] + 0.5 * h * du3[c];
        std::fill(du2.begin(), du2.end(), 0.0);
        layer_vjp_x(model, layer, u2, a2, du2.data(), scratch.data());
        // dk1 = (h/6) p + (h/2) du2 ; du1 = J1^T dk1
        for (int c = 0; c < d; ++c) a1[c] = (h / 6.0) * p[c] + 0.5 * h * du2[c];
        std::fill(du1.begin(), du1.end(), 0.0);
        layer_vjp_x(model, layer, u1, a1, du1.data(), scratch.data());

        for (int c = 0; c < d; ++c) p[c] += du1[c] + du2[c] + du3[c] + du4[c];
        require(all_finite(p.data(), d), Errc::NonFiniteState,
                "costate became non-finite");
        std::memcpy(out.costate(i, step), p.data(), sizeof(double) * d);
      }
    }
  }
};

}  // namespace

CostateTrace integrate_costate(const VectorFieldModel& model, const ParameterPath& path,
                               const DataMeasure& data, const ForwardTrace& fwd, int threads) {
  check_shapes(model, path, data, fwd.S);
  require(fwd.n_samples == data.n() && fwd.d == model.d && fwd.L == path.L(),
          Errc::TraceMismatch, "forward trace does not match the path/data");
  require(fwd.states.size() ==
              static_cast<size_t>(fwd.n_samples) * fwd.nodes() * fwd.d &&
          fwd.stage_inputs.size() ==
              static_cast<size_t>(fwd.n_samples) * fwd.steps() * 4 * fwd.d,
          Errc::TraceMismatch, "forward trace arrays have the wrong size");

  CostateTrace out;
  out.n_samples = fwd.n_samples;
  out.d = fwd.d;
  out.L = fwd.L;
  out.S = fwd.S;
  out.costates.resize(fwd.states.size());
  out.stage_adjoints.resize(fwd.stage_inputs.size());

  AdjointSweep sweep{model, path, data, fwd, out};
  if (threads == 1) {
    for (int i = 0; i < data.n(); ++i) sweep.run(i);
  } else {
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
#endif
    for (int i = 0; i < data.n(); ++i) sweep.run(i);
    (void)nt;
  }
  return out;
}

std::vector<double> fundamental_matrix(const VectorFieldModel& model, const ParameterPath& path,
                                       const ForwardTrace& fwd, int sample, int node_a,
                                       int node_b) {
  require(sample >= 0 && sample < fwd.n_samples, Errc::ShapeMismatch, "sample out of range");
  require(0 <= node_a && node_a <= node_b && node_b <= fwd.steps(), Errc::ShapeMismatch,
          "node indices out of range");
  const int d = model.d, S = fwd.S;
  std::vector<double> M(static_cast<size_t>(d) * d), J(static_cast<size_t>(d) * d);
  std::vector<double> K1(M.size()), K2(M.size()), K3(M.size()), K4(M.size()), T(M.size());
  std::vector<double> scratch(static_cast<size_t>(d) * d);
  mat_identity(M.data(), d);
  for (int step = node_a; step < node_b; ++step) {
    const int k = step / S;
    const auto& layer = path.layers[k];
    const double h = path.dt(k) / S;
    // RK4 on M' = J(t) M with J evaluated at the recorded stage inputs; this
    // reproduces the exact tangent of the discrete step map
    layer_jac_x(model, layer, fwd.stage_in(sample, step, 0), J.data(), scratch.data());
    matmul(J.data(), M.data(), K1.data(), d);
    for (size_t c = 0; c < M.size(); ++c) T[c] = M[c] + 0.5 * h * K1[c];
    layer_jac_x(model, layer, fwd.stage_in(sample, step, 1), J.data(), scratch.data());
    matmul(J.data(), T.data(), K2.data(), d);
    for (size_t c = 0; c < M.size(); ++c) T[c] = M[c] + 0.5 * h * K2[c];
    layer_jac_x(model, layer, fwd.stage_in(sample, step, 2), J.data(), scratch.data());
    matmul(J.data(), T.data(), K3.data(), d);
    for (size_t c = 0; c < M.size(); ++c) T[c] = M[c] + h * K3[c];
    layer_jac_x(model, layer, fwd.stage_in(sample, step, 3), J.data(), scratch.data());
    matmul(J.data(), T.data(), K4.data(), d);
    for (size_t c = 0; c < M.size(); ++c)
      M[c] += (h / 6.0) * (K1[c] + 2.0 * K2[c] + 2.0 * K3[c] + K4[c]);
  }
  return M;
}

}  // namespace mflab
