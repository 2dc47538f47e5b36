#pragma once
#include <cstdint>
#include <string>

namespace mflab {

// Per-particle vector fields v(x, theta) on R^d. Two built-in families:
//   LinearTanh: theta = (W, b),    v = W tanh(x) + b          (linear in theta)
//   GatedTanh:  theta = (a, W, b), v = a .* tanh(W x + b)     (nonlinear in theta)
// Parameter blocks are packed row-major in the order shown above.
enum class ModelKind { LinearTanh, GatedTanh };

struct VectorFieldModel {
  ModelKind kind = ModelKind::LinearTanh;
  int d = 0;  // state dimension
  int m = 0;  // parameter dimension

  // growth certificate: |v(x,theta)| <= C |theta|^p (1 + |x|) and
  // |v(x,theta) - v(x',theta)| <= C |theta|^p |x - x'|, validated by probing
  double growth_c = 0.0;
  double growth_p = 1.0;

  static VectorFieldModel linear_tanh(int d);
  static VectorFieldModel gated_tanh(int d);

  void eval_v(const double* x, const double* theta, double* out) const;       // d
  void jac_v_x(const double* x, const double* theta, double* out) const;      // d x d
  void jac_v_theta(const double* x, const double* theta, double* out) const;  // d x m

  // pullbacks used by the adjoint sweep; adds into out
  void vjp_x_acc(const double* x, const double* theta, const double* a, double* out) const;
  void vjp_theta_acc(const double* x, const double* theta, const double* a, double* out) const;
};

ModelKind model_kind_from_name(const std::string& name);
const char* model_kind_name(ModelKind kind);
VectorFieldModel make_model(ModelKind kind, int d);

// squared-error terminal loss |x - y|^2
double loss_value(const double* x, const double* y, int d);
void grad_loss(const double* x, const double* y, int d, double* out);  // 2 (x - y)

struct GrowthReport {
  double max_growth_ratio = 0.0;     // |v| / (|theta|^p (1+|x|))
  double max_lipschitz_ratio = 0.0;  // |v(x)-v(x')| / (|theta|^p |x-x'|)
  double certificate_c = 0.0;
  double certificate_p = 0.0;
  int probes = 0;
  double radius = 0.0;
};

// Probes (x, theta) pairs inside balls of the given radius; throws
// CertificateViolated if either observed ratio exceeds the certificate.
GrowthReport certify_growth(const VectorFieldModel& model, int probe_count, double radius,
                            uint64_t seed = 12345);

}  // namespace mflab
