#include "mflab/model.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "mflab/error.hpp"
#include "mflab/rng.hpp"
#include "mflab/smallmat.hpp"

namespace mflab {

VectorFieldModel VectorFieldModel::linear_tanh(int d) {
  require(d >= 1, Errc::ShapeMismatch, "state dimension must be >= 1");
  VectorFieldModel mdl;
  mdl.kind = ModelKind::LinearTanh;
  mdl.d = d;
  mdl.m = d * d + d;
  mdl.growth_c = 2.0 * std::sqrt(static_cast<double>(d));
  mdl.growth_p = 1.0;
  return mdl;
}

VectorFieldModel VectorFieldModel::gated_tanh(int d) {
  require(d >= 1, Errc::ShapeMismatch, "state dimension must be >= 1");
  VectorFieldModel mdl;
  mdl.kind = ModelKind::GatedTanh;
  mdl.d = d;
  mdl.m = d + d * d + d;
  // valid for probe radii up to ~10: the x-Lipschitz constant of the gated
  // family scales like |a||W| <= |theta|^2/2, so a global p=1 bound does not
  // exist; the flow keeps parameters in a bounded set where this C holds
  mdl.growth_c = 6.0;
  mdl.growth_p = 1.0;
  return mdl;
}

void VectorFieldModel::eval_v(const double* x, const double* theta, double* out) const {
  if (kind == ModelKind::LinearTanh) {
    const double* W = theta;
    const double* b = theta + d * d;
    for (int r = 0; r < d; ++r) {
      double s = b[r];
      const double* row = W + static_cast<size_t>(r) * d;
      for (int c = 0; c < d; ++c) s += row[c] * std::tanh(x[c]);
      out[r] = s;
    }
  } else {
    const double* a = theta;
    const double* W = theta + d;
    const double* b = theta + d + d * d;
    for (int r = 0; r < d; ++r) {
      double z = b[r];
      const double* row = W + static_cast<size_t>(r) * d;
      for (int c = 0; c < d; ++c) z += row[c] * x[c];
      out[r] = a[r] * std::tanh(z);
    }
  }
}

void VectorFieldModel::jac_v_x(const double* x, const double* theta, double* out) const {
  if (kind == ModelKind::LinearTanh) {
    const double* W = theta;
    for (int c = 0; c < d; ++c) {
      double t = std::tanh(x[c]);
      double s = 1.0 - t * t;
      for (int r = 0; r < d; ++r) out[r * d + c] = W[r * d + c] * s;
    }
  } else {
    const double* a = theta;
    const double* W = theta + d;
    const double* b = theta + d + d * d;
    for (int r = 0; r < d; ++r) {
      double z = b[r];
      for (int c = 0; c < d; ++c) z += W[r * d + c] * x[c];
      double t = std::tanh(z);
      double gs = a[r] * (1.0 - t * t);
      for (int c = 0; c < d; ++c) out[r * d + c] = gs * W[r * d + c];
    }
  }
}

void VectorFieldModel::jac_v_theta(const double* x, const double* theta, double* out) const {
  std::memset(out, 0, sizeof(double) * static_cast<size_t>(d) * m);
  if (kind == ModelKind::LinearTanh) {
    for (int r = 0; r < d; ++r) {
      double* row = out + static_cast<size_t>(r) * m;
      for (int c = 0; c < d; ++c) row[r * d + c] = std::tanh(x[c]);
      row[d * d + r] = 1.0;
    }
  } else {
    const double* a = theta;
    const double* W = theta + d;
    const double* b = theta + d + d * d;
    for (int r = 0; r < d; ++r) {
      double z = b[r];
      for (int c = 0; c < d; ++c) z += W[r * d + c] * x[c];
      double t = std::tanh(z);
      double s = 1.0 - t * t;
      double* row = out + static_cast<size_t>(r) * m;
      row[r] = t;
      for (int c = 0; c < d; ++c) row[d + r * d + c] = a[r] * s * x[c];
      row[d + d * d + r] = a[r] * s;
    }
  }
}

void VectorFieldModel::vjp_x_acc(const double* x, const double* theta, const double* a,
                                 double* out) const {
  if (kind == ModelKind::LinearTanh) {
    const double* W = theta;
    for (int c = 0; c < d; ++c) {
      double t = std::tanh(x[c]);
      double s = 1.0 - t * t;
      double acc = 0.0;
      for (int r = 0; r < d; ++r) acc += a[r] * W[r * d + c];
      out[c] += s * acc;
    }
  } else {
    const double* gate = theta;
    const double* W = theta + d;
    const double* b = theta + d + d * d;
    for (int r = 0; r < d; ++r) {
      double z = b[r];
      for (int c = 0; c < d; ++c) z += W[r * d + c] * x[c];
      double t = std::tanh(z);
      double gs = a[r] * gate[r] * (1.0 - t * t);
      for (int c = 0; c < d; ++c) out[c] += gs * W[r * d + c];
    }
  }
}

void VectorFieldModel::vjp_theta_acc(const double* x, const double* theta, const double* a,
                                     double* out) const {
  if (kind == ModelKind::LinearTanh) {
    for (int r = 0; r < d; ++r) {
      double* gW = out + static_cast<size_t>(r) * d;
      for (int c = 0; c < d; ++c) gW[c] += a[r] * std::tanh(x[c]);
      out[d * d + r] += a[r];
    }
  } else {
    const double* gate = theta;
    const double* W = theta + d;
    const double* b = theta + d + d * d;
    for (int r = 0; r < d; ++r) {
      double z = b[r];
      for (int c = 0; c < d; ++c) z += W[r * d + c] * x[c];
      double t = std::tanh(z);
      double s = 1.0 - t * t;
      out[r] += a[r] * t;
      double gs = a[r] * gate[r] * s;
      for (int c = 0; c < d; ++c) out[d + r * d + c] += gs * x[c];
      out[d + d * d + r] += gs;
    }
  }
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "linear-tanh") return ModelKind::LinearTanh;
  if (name == "gated-tanh") return ModelKind::GatedTanh;
  fail(Errc::ConfigError, "unknown model '" + name + "'");
}

const char* model_kind_name(ModelKind kind) {
  return kind == ModelKind::LinearTanh ? "linear-tanh" : "gated-tanh";
}

VectorFieldModel make_model(ModelKind kind, int d) {
  return kind == ModelKind::LinearTanh ? VectorFieldModel::linear_tanh(d)
                                       : VectorFieldModel::gated_tanh(d);
}

double loss_value(const double* x, const double* y, int d) { return sqdist(x, y, d); }

void grad_loss(const double* x, const double* y, int d, double* out) {
  for (int c = 0; c < d; ++c) out[c] = 2.0 * (x[c] - y[c]);
}

namespace {
// uniform sample in the d-ball of the given radius
void ball_sample(Rng& rng, int d, double radius, double* out) {
  double nrm2 = 0.0;
  for (int c = 0; c < d; ++c) {
    out[c] = rng.normal();
    nrm2 += out[c] * out[c];
  }
  double nrm = std::sqrt(nrm2);
  double r = radius * std::pow(rng.u01(), 1.0 / d);
  double s = nrm > 0.0 ? r / nrm : 0.0;
  for (int c = 0; c < d; ++c) out[c] *= s;
}
}  // namespace

GrowthReport certify_growth(const VectorFieldModel& model, int probe_count, double radius,
                            uint64_t seed) {
  require(probe_count >= 1, Errc::ShapeMismatch, "probe count must be >= 1");
  require(radius >= 0.0, Errc::ShapeMismatch, "probe radius must be >= 0");
  Rng rng(seed);
  const int d = model.d, m = model.m;
  std::vector<double> x1(d), x2(d), theta(m), v1(d), v2(d);
  GrowthReport rep;
  rep.certificate_c = model.growth_c;
  rep.certificate_p = model.growth_p;
  rep.probes = probe_count;
  rep.radius = radius;
  for (int probe = 0; probe < probe_count; ++probe) {
    ball_sample(rng, d, radius, x1.data());
    ball_sample(rng, d, radius, x2.data());
    ball_sample(rng, m, radius, theta.data());
    model.eval_v(x1.data(), theta.data(), v1.data());
    model.eval_v(x2.data(), theta.data(), v2.data());
    double tp = std::pow(norm2(theta.data(), m), model.growth_p);
    double growth_den = tp * (1.0 + norm2(x1.data(), d));
    double vn = norm2(v1.data(), d);
    if (vn > 0.0 || growth_den > 0.0) {
      double ratio = growth_den > 0.0 ? vn / growth_den
                                      : std::numeric_limits<double>::infinity();
      rep.max_growth_ratio = std::max(rep.max_growth_ratio, ratio);
    }
    double dx = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = x1[c] - x2[c];
      dx += t * t;
    }
    dx = std::sqrt(dx);
    double dv = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = v1[c] - v2[c];
      dv += t * t;
    }
    dv = std::sqrt(dv);
    double lip_den = tp * dx;
    if (dv > 0.0 || lip_den > 0.0) {
      double ratio = lip_den > 0.0 ? dv / lip_den
                                   : (dv > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      rep.max_lipschitz_ratio = std::max(rep.max_lipschitz_ratio, ratio);
    }
  }
  if (rep.max_growth_ratio > model.growth_c || rep.max_lipschitz_ratio > model.growth_c)
    fail(Errc::CertificateViolated, "observed growth exceeds the certificate constant");
  return rep;
}

}  // namespace mflab
