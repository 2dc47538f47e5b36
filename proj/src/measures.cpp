#include "mflab/measures.hpp"

#include <cmath>

#include "mflab/smallmat.hpp"
#include "mflab/transport.hpp"

namespace mflab {

void DiscreteMeasure::validate() const {
  require(m >= 1, Errc::ShapeMismatch, "measure dimension must be >= 1");
  require(!weights.empty(), Errc::ShapeMismatch, "measure needs at least one point");
  require(pts.size() == weights.size() * static_cast<size_t>(m), Errc::ShapeMismatch,
          "point array size does not match n*m");
  require(all_finite(pts) && all_finite(weights), Errc::NonFiniteState,
          "non-finite entries in measure");
  double s = 0.0;
  for (double w : weights) {
    require(w >= 0.0, Errc::ShapeMismatch, "negative weight");
    s += w;
  }
  require(std::abs(s - 1.0) <= 1e-12, Errc::ShapeMismatch, "weights must sum to 1");
}

DiscreteMeasure make_uniform_measure(int m, std::vector<double> pts) {
  DiscreteMeasure mu;
  mu.m = m;
  require(m >= 1 && !pts.empty() && pts.size() % static_cast<size_t>(m) == 0,
          Errc::ShapeMismatch, "bad flat point array");
  size_t n = pts.size() / static_cast<size_t>(m);
  mu.pts = std::move(pts);
  mu.weights.assign(n, 1.0 / static_cast<double>(n));
  return mu;
}

void ParameterPath::validate() const {
  require(!layers.empty(), Errc::TooFewLayers, "path has no layers");
  require(layer_grid.size() == layers.size() + 1, Errc::GridMismatch,
          "layer_grid must have L+1 entries");
  require(std::abs(layer_grid.front()) <= 1e-12 && std::abs(layer_grid.back() - 1.0) <= 1e-12,
          Errc::GridMismatch, "layer_grid must span [0,1]");
  for (size_t k = 0; k + 1 < layer_grid.size(); ++k)
    require(layer_grid[k + 1] > layer_grid[k], Errc::GridMismatch,
            "layer_grid must be strictly increasing");
  int n0 = layers[0].n(), m0 = layers[0].m;
  for (const auto& l : layers) {
    l.validate();
    require(l.n() == n0 && l.m == m0, Errc::ShapeMismatch,
            "all layers must share particle count and dimension");
  }
}

ParameterPath make_uniform_path(int L, int N, int m) {
  require(L >= 1 && N >= 1 && m >= 1, Errc::ShapeMismatch, "bad path shape");
  ParameterPath p;
  p.layer_grid.resize(L + 1);
  for (int k = 0; k <= L; ++k) p.layer_grid[k] = static_cast<double>(k) / L;
  p.layer_grid[L] = 1.0;
  p.layers.assign(L, make_uniform_measure(m, std::vector<double>(static_cast<size_t>(N) * m, 0.0)));
  return p;
}

void DataMeasure::validate() const {
  require(d >= 1, Errc::ShapeMismatch, "data dimension must be >= 1");
  require(!weights.empty(), Errc::ShapeMismatch, "data measure needs samples");
  require(xs.size() == weights.size() * static_cast<size_t>(d) && ys.size() == xs.size(),
          Errc::ShapeMismatch, "sample arrays do not match n*d");
  require(all_finite(xs) && all_finite(ys) && all_finite(weights), Errc::NonFiniteState,
          "non-finite data");
  double s = 0.0;
  for (double w : weights) {
    require(w >= 0.0, Errc::ShapeMismatch, "negative sample weight");
    s += w;
  }
  // total mass 1 for ordinary datasets; anything below 1 scales the data term
  // down, and 0 turns it off entirely (pure-regularizer instances)
  require(s <= 1.0 + 1e-12, Errc::ShapeMismatch, "sample weights must sum to at most 1");
  require(support_bound > 0.0, Errc::ShapeMismatch, "support bound must be positive");
  for (int i = 0; i < n(); ++i) {
    require(norm2(x(i), d) <= support_bound * (1.0 + 1e-12), Errc::ShapeMismatch,
            "input sample outside declared ball");
    require(norm2(y(i), d) <= support_bound * (1.0 + 1e-12), Errc::ShapeMismatch,
            "target sample outside declared ball");
  }
}

void TransportPlan::validate(const DiscreteMeasure& a, const DiscreteMeasure& b) const {
  std::vector<double> ma(a.n(), 0.0), mb(b.n(), 0.0);
  for (const auto& e : entries) {
    require(e.i >= 0 && e.i < a.n() && e.j >= 0 && e.j < b.n(), Errc::ShapeMismatch,
            "plan index out of range");
    require(e.mass >= -1e-15, Errc::ShapeMismatch, "negative plan mass");
    ma[e.i] += e.mass;
    mb[e.j] += e.mass;
  }
  for (int i = 0; i < a.n(); ++i)
    require(std::abs(ma[i] - a.weights[i]) <= 1e-10, Errc::ShapeMismatch,
            "source marginal mismatch");
  for (int j = 0; j < b.n(); ++j)
    require(std::abs(mb[j] - b.weights[j]) <= 1e-10, Errc::ShapeMismatch,
            "target marginal mismatch");
}

double path_distance(const ParameterPath& p, const ParameterPath& q, int cap) {
  p.validate();
  q.validate();
  require(p.layer_grid.size() == q.layer_grid.size(), Errc::GridMismatch,
          "paths live on different grids");
  for (size_t k = 0; k < p.layer_grid.size(); ++k)
    require(std::abs(p.layer_grid[k] - q.layer_grid[k]) <= 1e-12, Errc::GridMismatch,
            "paths live on different grids");
  double acc = 0.0;
  for (int k = 0; k < p.L(); ++k) {
    double d = w2(p.layers[k], q.layers[k], cap);
    acc += p.dt(k) * d * d;
  }
  return std::sqrt(acc);
}

DiscreteMeasure time_marginal(const ParameterPath& p) {
  p.validate();
  DiscreteMeasure out;
  out.m = p.m();
  out.pts.reserve(static_cast<size_t>(p.L()) * p.N() * p.m());
  out.weights.reserve(static_cast<size_t>(p.L()) * p.N());
  for (int k = 0; k < p.L(); ++k) {
    const auto& l = p.layers[k];
    out.pts.insert(out.pts.end(), l.pts.begin(), l.pts.end());
    for (int i = 0; i < l.n(); ++i) out.weights.push_back(p.dt(k) * l.weights[i]);
  }
  return out;
}

double dirichlet_energy(const ParameterPath& p) {
  p.validate();
  require(p.L() >= 2, Errc::TooFewLayers, "dirichlet energy needs at least two layers");
  double acc = 0.0;
  for (int k = 0; k + 1 < p.L(); ++k) {
    double d = w2(p.layers[k + 1], p.layers[k]);
    acc += d * d / p.dt(k);
  }
  return 0.5 * acc;
}

double support_radius(const ParameterPath& p) {
  double r = 0.0;
  for (const auto& l : p.layers)
    for (int i = 0; i < l.n(); ++i) r = std::max(r, norm2(l.pt(i), l.m));
  return r;
}

double second_moment(const ParameterPath& p) {
  double acc = 0.0;
  for (int k = 0; k < p.L(); ++k) {
    const auto& l = p.layers[k];
    double layer = 0.0;
    for (int i = 0; i < l.n(); ++i) layer += l.weights[i] * dot(l.pt(i), l.pt(i), l.m);
    acc += p.dt(k) * layer;
  }
  return acc;
}

}  // namespace mflab
