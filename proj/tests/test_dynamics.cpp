#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mflab/dynamics.hpp"
#include "mflab/measures.hpp"
#include "mflab/model.hpp"
#include "mflab/rng.hpp"
#include "mflab/smallmat.hpp"
#include "test_util.hpp"

using namespace mflab;
using testutil::random_path;
using testutil::random_samples;


TEST_CASE("zero parameters leave every sample in place") {
  Rng rng(3);
  int d = 2;
  auto model = VectorFieldModel::linear_tanh(d);
  auto path = make_uniform_path(3, 4, model.m);
  auto data = random_samples(rng, 5, d);
  auto trace = integrate_forward(model, path, data, 8);
  for (int i = 0; i < data.n(); ++i)
    for (int node = 0; node <= trace.steps(); ++node)
      for (int c = 0; c < d; ++c) CHECK(trace.state(i, node)[c] == data.x(i)[c]);
  auto mu = push_forward(model, path, data, 8);
  for (int i = 0; i < data.n(); ++i)
    for (int c = 0; c < d; ++c) CHECK(mu.pt(i)[c] == data.x(i)[c]);

  // frozen field: costates stay equal to the terminal loss gradient
  auto cst = integrate_costate(model, path, data, trace);
  for (int i = 0; i < data.n(); ++i) {
    std::vector<double> g(d);
    grad_loss(data.x(i), data.y(i), d, g.data());
    for (int node = 0; node <= cst.steps(); ++node)
      for (int c = 0; c < d; ++c)
        CHECK(cst.costate(i, node)[c] == doctest::Approx(g[c]).epsilon(1e-15));
  }
}

TEST_CASE("constant drift integrates exactly") {
  // LinearTanh with W = 0 reduces to x' = b_k per layer
  int d = 2;
  auto model = VectorFieldModel::linear_tanh(d);
  ParameterPath path = make_uniform_path(3, 1, model.m);
  path.layer_grid = {0.0, 0.3, 0.45, 1.0};
  std::vector<std::vector<double>> b = {{1.0, -2.0}, {0.5, 0.25}, {-1.5, 3.0}};
  for (int k = 0; k < 3; ++k)
    for (int c = 0; c < d; ++c) path.layers[k].pts[d * d + c] = b[k][c];
  Rng rng(5);
  auto data = random_samples(rng, 3, d);
  auto mu = push_forward(model, path, data, 4);
  for (int i = 0; i < data.n(); ++i)
    for (int c = 0; c < d; ++c) {
      double want = data.x(i)[c] + 0.3 * b[0][c] + 0.15 * b[1][c] + 0.55 * b[2][c];
      CHECK(mu.pt(i)[c] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("fourth-order convergence to a fine-grid reference") {
  Rng rng(11);
  int d = 2;
  auto model = VectorFieldModel::gated_tanh(d);
  auto path = random_path(rng, 3, 4, model.m, 0.9);
  auto data = random_samples(rng, 4, d);
  auto ref = integrate_forward(model, path, data, 1024);
  auto err_at = [&](int S) {
    auto tr = integrate_forward(model, path, data, S);
    double err = 0.0;
    for (int i = 0; i < data.n(); ++i)
      err = std::max(err, std::sqrt(sqdist(tr.state(i, tr.steps()),
                                           ref.state(i, ref.steps()), d)));
    return err;
  };
  double e8 = err_at(8), e16 = err_at(16), e32 = err_at(32);
  CHECK(e16 > 0.0);
  CHECK(e8 / e16 > 10.0);   // ~16x for a 4th-order scheme
  CHECK(e8 / e16 < 26.0);
  CHECK(e16 / e32 > 10.0);
  CHECK(e16 / e32 < 26.0);
}

TEST_CASE("growth envelope is respected and recorded") {
  Rng rng(17);
  int d = 2;
  auto model = VectorFieldModel::linear_tanh(d);
  auto path = random_path(rng, 4, 6, model.m, 1.5);
  auto data = random_samples(rng, 6, d);
  auto trace = integrate_forward(model, path, data, 8);
  CHECK(trace.gronwall_ratio <= 1.0 + 1e-6);
  CHECK(trace.gronwall_ratio > 0.0);
}

TEST_CASE("adjoint sweep is the exact transpose of the discrete tangent") {
  Rng rng(23);
  for (ModelKind kind : {ModelKind::LinearTanh, ModelKind::GatedTanh}) {
    int d = 3;
    auto model = make_model(kind, d);
    auto path = random_path(rng, 2, 3, model.m, 0.8);
    auto data = random_samples(rng, 3, d);
    auto fwd = integrate_forward(model, path, data, 6);
    auto cst = integrate_costate(model, path, data, fwd);
    for (int i = 0; i < data.n(); ++i) {
      for (int node : {0, 5, 9}) {
        auto M = fundamental_matrix(model, path, fwd, i, node, fwd.steps());
        std::vector<double> want(d);
        matvec_t(M.data(), cst.costate(i, fwd.steps()), want.data(), d, d);
        for (int c = 0; c < d; ++c)
          CHECK(cst.costate(i, node)[c] ==
                doctest::Approx(want[c]).epsilon(1e-11).scale(1.0));
      }
    }
  }
}

TEST_CASE("costate pairs with state variations like a directional derivative") {
  Rng rng(29);
  int d = 2;
  auto model = VectorFieldModel::gated_tanh(d);
  auto path = random_path(rng, 3, 4, model.m, 0.8);
  auto data = random_samples(rng, 3, d);
  auto fwd = integrate_forward(model, path, data, 8);
  auto cst = integrate_costate(model, path, data, fwd);
  const double h = 1e-6;
  for (int i = 0; i < data.n(); ++i) {
    std::vector<double> dx(d);
    for (auto& c : dx) c = rng.normal();
    DataMeasure pert = data;
    for (int c = 0; c < d; ++c) pert.xs[static_cast<size_t>(i) * d + c] += h * dx[c];
    auto up = integrate_forward(model, path, pert, 8);
    for (int c = 0; c < d; ++c) pert.xs[static_cast<size_t>(i) * d + c] -= 2 * h * dx[c];
    auto dn = integrate_forward(model, path, pert, 8);
    double fd = (loss_value(up.state(i, up.steps()), data.y(i), d) -
                 loss_value(dn.state(i, dn.steps()), data.y(i), d)) /
                (2 * h);
    double pair = dot(cst.costate(i, 0), dx.data(), d);
    CHECK(pair == doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1.0));
  }
}

TEST_CASE("tangent maps compose across subintervals") {
  Rng rng(31);
  int d = 3;
  auto model = VectorFieldModel::gated_tanh(d);
  auto path = random_path(rng, 2, 3, model.m, 0.9);
  auto data = random_samples(rng, 2, d);
  auto fwd = integrate_forward(model, path, data, 8);
  int mid = 7, last = fwd.steps();
  for (int i = 0; i < data.n(); ++i) {
    auto Mab = fundamental_matrix(model, path, fwd, i, 0, mid);
    auto Mbc = fundamental_matrix(model, path, fwd, i, mid, last);
    auto Mac = fundamental_matrix(model, path, fwd, i, 0, last);
    std::vector<double> prod(static_cast<size_t>(d) * d);
    matmul(Mbc.data(), Mab.data(), prod.data(), d);
    double scale = 0.0;
    for (double v : Mac) scale = std::max(scale, std::abs(v));
    for (int c = 0; c < d * d; ++c) CHECK(std::abs(prod[c] - Mac[c]) <= 1e-8 * scale);
  }
  // empty interval is the identity
  auto Maa = fundamental_matrix(model, path, fwd, 0, 3, 3);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) CHECK(Maa[r * d + c] == (r == c ? 1.0 : 0.0));
}

TEST_CASE("variation-of-constants formula matches parameter finite differences") {
  Rng rng(37);
  int d = 2;
  auto model = VectorFieldModel::gated_tanh(d);
  int L = 3, N = 3, S = 32;
  auto path = random_path(rng, L, N, model.m, 0.8);
  auto data = random_samples(rng, 2, d);
  auto fwd = integrate_forward(model, path, data, S);

  // random per-layer parameter direction
  std::vector<std::vector<double>> dtheta(L);
  for (auto& v : dtheta) {
    v.resize(static_cast<size_t>(N) * model.m);
    for (auto& c : v) c = rng.normal();
  }

  for (int i = 0; i < data.n(); ++i) {
    // cumulative tangent maps M(node -> end)
    int nodes = fwd.steps() + 1;
    std::vector<std::vector<double>> Mto_end(nodes);
    Mto_end[nodes - 1].resize(static_cast<size_t>(d) * d);
    mat_identity(Mto_end[nodes - 1].data(), d);
    for (int node = nodes - 2; node >= 0; --node) {
      auto D = fundamental_matrix(model, path, fwd, i, node, node + 1);
      Mto_end[node].resize(static_cast<size_t>(d) * d);
      matmul(Mto_end[node + 1].data(), D.data(), Mto_end[node].data(), d);
    }
    // per-layer trapezoid of M(u->1) * sum_j w_j d_theta v(X_u, theta_j) dtheta_j
    std::vector<double> integral(d, 0.0);
    std::vector<double> jt(static_cast<size_t>(d) * model.m), contrib(d), mapped(d);
    for (int k = 0; k < L; ++k) {
      double h = path.dt(k) / S;
      for (int s = 0; s <= S; ++s) {
        int node = k * S + s;
        std::fill(contrib.begin(), contrib.end(), 0.0);
        for (int j = 0; j < N; ++j) {
          model.jac_v_theta(fwd.state(i, node), path.layers[k].pt(j), jt.data());
          std::vector<double> jv(d, 0.0);
          matvec(jt.data(), dtheta[k].data() + static_cast<size_t>(j) * model.m, jv.data(), d,
                 model.m);
          axpy(path.layers[k].weights[j], jv.data(), contrib.data(), d);
        }
        matvec(Mto_end[node].data(), contrib.data(), mapped.data(), d, d);
        double wq = (s == 0 || s == S) ? 0.5 * h : h;
        axpy(wq, mapped.data(), integral.data(), d);
      }
    }
    // central differences through the full solver
    const double eps = 1e-5;
    ParameterPath up = path, dn = path;
    for (int k = 0; k < L; ++k)
      for (size_t c = 0; c < dtheta[k].size(); ++c) {
        up.layers[k].pts[c] += eps * dtheta[k][c];
        dn.layers[k].pts[c] -= eps * dtheta[k][c];
      }
    auto mu_up = integrate_forward(model, up, data, S);
    auto mu_dn = integrate_forward(model, dn, data, S);
    double scale = 0.0;
    for (int c = 0; c < d; ++c) {
      double fd = (mu_up.state(i, mu_up.steps())[c] - mu_dn.state(i, mu_dn.steps())[c]) /
                  (2 * eps);
      scale = std::max({scale, std::abs(fd), std::abs(integral[c])});
      mapped[c] = fd;
    }
    for (int c = 0; c < d; ++c) CHECK(std::abs(integral[c] - mapped[c]) <= 1e-4 * scale);
  }
}

TEST_CASE("trace shape guards") {
  Rng rng(41);
  int d = 2;
  auto model = VectorFieldModel::linear_tanh(d);
  auto path = random_path(rng, 2, 3, model.m);
  auto data = random_samples(rng, 3, d);
  auto fwd = integrate_forward(model, path, data, 4);
  auto other = random_samples(rng, 4, d);
  CHECK_THROWS_AS(integrate_costate(model, path, other, fwd), Error);
  ForwardTrace corrupt = fwd;
  corrupt.stage_inputs.resize(corrupt.stage_inputs.size() - 1);
  CHECK_THROWS_AS(integrate_costate(model, path, data, corrupt), Error);
  CHECK_THROWS_AS(fundamental_matrix(model, path, fwd, 0, 5, 2), Error);
  CHECK_THROWS_AS(fundamental_matrix(model, path, fwd, 9, 0, 2), Error);
}

TEST_CASE("thread count never changes a bit of the trace") {
  Rng rng(47);
  int d = 3;
  auto model = VectorFieldModel::gated_tanh(d);
  auto path = random_path(rng, 3, 5, model.m, 0.9);
  auto data = random_samples(rng, 7, d);
  auto serial_f = integrate_forward(model, path, data, 8, /*threads=*/1);
  auto parallel_f = integrate_forward(model, path, data, 8, /*threads=*/4);
  CHECK(serial_f.states == parallel_f.states);
  CHECK(serial_f.stage_inputs == parallel_f.stage_inputs);
  auto serial_c = integrate_costate(model, path, data, serial_f, 1);
  auto parallel_c = integrate_costate(model, path, data, parallel_f, 4);
  CHECK(serial_c.costates == parallel_c.costates);
  CHECK(serial_c.stage_adjoints == parallel_c.stage_adjoints);
}
