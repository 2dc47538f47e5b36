#pragma once
#include <cmath>
#include <vector>

#include "mflab/measures.hpp"
#include "mflab/rng.hpp"

namespace mflab::testutil {

inline DiscreteMeasure random_uniform_measure(Rng& rng, int n, int m, double scale = 1.0) {
  std::vector<double> pts(static_cast<size_t>(n) * m);
  for (auto& x : pts) x = scale * rng.normal();
  return make_uniform_measure(m, std::move(pts));
}

inline DiscreteMeasure random_weighted_measure(Rng& rng, int n, int m, double scale = 1.0) {
  DiscreteMeasure mu = random_uniform_measure(rng, n, m, scale);
  double s = 0.0;
  for (auto& w : mu.weights) {
    w = 0.05 + rng.u01();
    s += w;
  }
  for (auto& w : mu.weights) w /= s;
  // renormalize the tail so the sum is exactly 1 within validate()'s 1e-12
  double acc = 0.0;
  for (size_t i = 0; i + 1 < mu.weights.size(); ++i) acc += mu.weights[i];
  mu.weights.back() = 1.0 - acc;
  return mu;
}

inline ParameterPath random_path(Rng& rng, int L, int N, int m, double scale = 1.0) {
  ParameterPath p = make_uniform_path(L, N, m);
  for (auto& layer : p.layers)
    for (auto& x : layer.pts) x = scale * rng.normal();
  return p;
}

inline DataMeasure random_samples(Rng& rng, int n, int d, double scale = 1.0) {
  DataMeasure data;
  data.d = d;
  data.xs.resize(static_cast<size_t>(n) * d);
  data.ys.resize(static_cast<size_t>(n) * d);
  for (auto& c : data.xs) c = scale * rng.uniform(-1.0, 1.0);
  for (auto& c : data.ys) c = scale * rng.uniform(-1.0, 1.0);
  data.weights.assign(n, 1.0 / n);
  double sd = std::sqrt(static_cast<double>(d));
  data.support_bound = 2.0 * scale * sd + 1.0;
  return data;
}

}  // namespace mflab::testutil
