#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mflab/error.hpp"
#include "mflab/model.hpp"
#include "mflab/rng.hpp"
#include "mflab/smallmat.hpp"

using namespace mflab;

namespace {
// central differences at h=1e-5 as the independent derivative oracle
constexpr double kH = 1e-5;

double rel_err(double got, double want, double floor_scale) {
  double den = std::max({std::abs(got), std::abs(want), floor_scale});
  return std::abs(got - want) / den;
}

void check_jacobians_fd(const VectorFieldModel& mdl, Rng& rng) {
  const int d = mdl.d, m = mdl.m;
  std::vector<double> x(d), theta(m), vp(d), vm(d), jx(d * d), jt(static_cast<size_t>(d) * m);
  for (auto& c : x) c = rng.normal();
  for (auto& c : theta) c = rng.normal();
  mdl.jac_v_x(x.data(), theta.data(), jx.data());
  mdl.jac_v_theta(x.data(), theta.data(), jt.data());
  double scale = 0.0;
  for (double v : jx) scale = std::max(scale, std::abs(v));
  for (double v : jt) scale = std::max(scale, std::abs(v));
  double floor_scale = 1e-6 * std::max(1.0, scale);

  for (int c = 0; c < d; ++c) {
    double keep = x[c];
    x[c] = keep + kH;
    mdl.eval_v(x.data(), theta.data(), vp.data());
    x[c] = keep - kH;
    mdl.eval_v(x.data(), theta.data(), vm.data());
    x[c] = keep;
    for (int r = 0; r < d; ++r) {
      double fd = (vp[r] - vm[r]) / (2 * kH);
      CHECK(rel_err(jx[r * d + c], fd, floor_scale) <= 1e-6);
    }
  }
  for (int p = 0; p < m; ++p) {
    double keep = theta[p];
    theta[p] = keep + kH;
    mdl.eval_v(x.data(), theta.data(), vp.data());
    theta[p] = keep - kH;
    mdl.eval_v(x.data(), theta.data(), vm.data());
    theta[p] = keep;
    for (int r = 0; r < d; ++r) {
      double fd = (vp[r] - vm[r]) / (2 * kH);
      CHECK(rel_err(jt[static_cast<size_t>(r) * m + p], fd, floor_scale) <= 1e-6);
    }
  }
}
}  // namespace

TEST_CASE("jacobians match central differences on random probes") {
  Rng rng(101);
  for (int rep = 0; rep < 50; ++rep) {
    check_jacobians_fd(VectorFieldModel::linear_tanh(rng.uniform_int(1, 4)), rng);
    check_jacobians_fd(VectorFieldModel::gated_tanh(rng.uniform_int(1, 4)), rng);
  }
}

TEST_CASE("gated field matches an independent re-evaluation") {
  Rng rng(7);
  int d = 3;
  auto mdl = VectorFieldModel::gated_tanh(d);
  std::vector<double> x(d), theta(mdl.m), v(d);
  for (int rep = 0; rep < 20; ++rep) {
    for (auto& c : x) c = rng.normal();
    for (auto& c : theta) c = rng.normal();
    mdl.eval_v(x.data(), theta.data(), v.data());
    for (int r = 0; r < d; ++r) {
      long double z = theta[d + d * d + r];
      for (int c = 0; c < d; ++c) z += static_cast<long double>(theta[d + r * d + c]) * x[c];
      long double want = static_cast<long double>(theta[r]) * std::tanh(z);
      CHECK(std::abs(v[r] - static_cast<double>(want)) <= 1e-14 * std::max(1.0, std::abs(v[r])));
    }
  }
}

TEST_CASE("linear-tanh field is linear in theta") {
  Rng rng(13);
  int d = 3;
  auto mdl = VectorFieldModel::linear_tanh(d);
  std::vector<double> x(d), t1(mdl.m), t2(mdl.m), tc(mdl.m), v1(d), v2(d), vc(d);
  for (int rep = 0; rep < 20; ++rep) {
    for (auto& c : x) c = rng.normal();
    for (auto& c : t1) c = rng.normal();
    for (auto& c : t2) c = rng.normal();
    double al = rng.uniform(-2, 2), be = rng.uniform(-2, 2);
    for (int p = 0; p < mdl.m; ++p) tc[p] = al * t1[p] + be * t2[p];
    mdl.eval_v(x.data(), t1.data(), v1.data());
    mdl.eval_v(x.data(), t2.data(), v2.data());
    mdl.eval_v(x.data(), tc.data(), vc.data());
    for (int r = 0; r < d; ++r)
      CHECK(vc[r] == doctest::Approx(al * v1[r] + be * v2[r]).epsilon(1e-12));
  }
}

TEST_CASE("pullbacks agree with explicit jacobian transposes") {
  Rng rng(29);
  for (ModelKind kind : {ModelKind::LinearTanh, ModelKind::GatedTanh}) {
    int d = 3;
    auto mdl = make_model(kind, d);
    std::vector<double> x(d), theta(mdl.m), a(d);
    std::vector<double> jt(static_cast<size_t>(d) * mdl.m), jx(d * d);
    std::vector<double> vt(mdl.m, 0.0), vx(d, 0.0), want_t(mdl.m), want_x(d);
    for (auto& c : x) c = rng.normal();
    for (auto& c : theta) c = rng.normal();
    for (auto& c : a) c = rng.normal();
    mdl.jac_v_theta(x.data(), theta.data(), jt.data());
    mdl.jac_v_x(x.data(), theta.data(), jx.data());
    mdl.vjp_theta_acc(x.data(), theta.data(), a.data(), vt.data());
    mdl.vjp_x_acc(x.data(), theta.data(), a.data(), vx.data());
    matvec_t(jt.data(), a.data(), want_t.data(), d, mdl.m);
    matvec_t(jx.data(), a.data(), want_x.data(), d, d);
    for (int p = 0; p < mdl.m; ++p) CHECK(vt[p] == doctest::Approx(want_t[p]).epsilon(1e-13));
    for (int c = 0; c < d; ++c) CHECK(vx[c] == doctest::Approx(want_x[c]).epsilon(1e-13));
  }
}

TEST_CASE("squared-error loss and gradient") {
  Rng rng(31);
  int d = 4;
  std::vector<double> x(d), y(d), g(d);
  for (auto& c : x) c = rng.normal();
  for (auto& c : y) c = rng.normal();
  double want = 0.0;
  for (int c = 0; c < d; ++c) want += (x[c] - y[c]) * (x[c] - y[c]);
  CHECK(loss_value(x.data(), y.data(), d) == doctest::Approx(want).epsilon(1e-15));
  grad_loss(x.data(), y.data(), d, g.data());
  for (int c = 0; c < d; ++c) {
    double keep = x[c];
    x[c] = keep + kH;
    double lp = loss_value(x.data(), y.data(), d);
    x[c] = keep - kH;
    double lm = loss_value(x.data(), y.data(), d);
    x[c] = keep;
    CHECK(g[c] == doctest::Approx((lp - lm) / (2 * kH)).epsilon(1e-7));
  }
}

TEST_CASE("growth certification") {
  auto lt = VectorFieldModel::linear_tanh(3);
  auto rep = certify_growth(lt, 2000, 10.0);
  CHECK(rep.max_growth_ratio <= lt.growth_c);
  CHECK(rep.max_lipschitz_ratio <= lt.growth_c);
  CHECK(rep.max_growth_ratio > 0.0);

  auto gt = VectorFieldModel::gated_tanh(3);
  auto rep2 = certify_growth(gt, 2000, 10.0);
  CHECK(rep2.max_growth_ratio <= gt.growth_c);
  CHECK(rep2.max_lipschitz_ratio <= gt.growth_c);

  // degenerate radius: only the zero parameter is probed, every ratio is 0
  auto rep3 = certify_growth(lt, 50, 0.0);
  CHECK(rep3.max_growth_ratio == 0.0);
  CHECK(rep3.max_lipschitz_ratio == 0.0);

  // a deliberately absurd certificate must be caught
  auto broken = lt;
  broken.growth_c = 1e-9;
  CHECK_THROWS_AS(certify_growth(broken, 200, 1.0), Error);
  try {
    certify_growth(broken, 200, 1.0);
  } catch (const Error& e) {
    CHECK(e.code == Errc::CertificateViolated);
  }
}
