#pragma once
#include <vector>

#include "mflab/error.hpp"

namespace mflab {

// Weighted point cloud in R^m. Weights are nonnegative and sum to 1 (checked
// to 1e-12 by validate()). Points are stored flat, row-major n x m.
struct DiscreteMeasure {
  int m = 0;
  std::vector<double> pts;      // n*m
  std::vector<double> weights;  // n

  int n() const { return static_cast<int>(weights.size()); }
  double* pt(int i) { return pts.data() + static_cast<size_t>(i) * m; }
  const double* pt(int i) const { return pts.data() + static_cast<size_t>(i) * m; }

  void validate() const;
};

// uniform-weight cloud from flat coordinates
DiscreteMeasure make_uniform_measure(int m, std::vector<double> pts);

// Piecewise-constant-in-t parameter curve: layer k holds the measure on the
// cell [layer_grid[k], layer_grid[k+1]). All layers share particle count and
// dimension. layer_grid spans [0,1] and is strictly increasing.
struct ParameterPath {
  std::vector<double> layer_grid;       // L+1 breakpoints
  std::vector<DiscreteMeasure> layers;  // L

  int L() const { return static_cast<int>(layers.size()); }
  int N() const { return layers.empty() ? 0 : layers[0].n(); }
  int m() const { return layers.empty() ? 0 : layers[0].m; }
  double dt(int k) const { return layer_grid[k + 1] - layer_grid[k]; }

  void validate() const;
};

ParameterPath make_uniform_path(int L, int N, int m);  // zeros, uniform grid

// Empirical data distribution: n paired samples (x_i, y_i) in R^d x R^d with
// total weight at most 1 (exactly 1 for ordinary datasets; 0 disables the
// data term), all inside the declared ball |x|,|y| <= support_bound.
struct DataMeasure {
  int d = 0;
  std::vector<double> xs;  // n*d
  std::vector<double> ys;  // n*d
  std::vector<double> weights;
  double support_bound = 0.0;

  int n() const { return static_cast<int>(weights.size()); }
  const double* x(int i) const { return xs.data() + static_cast<size_t>(i) * d; }
  const double* y(int i) const { return ys.data() + static_cast<size_t>(i) * d; }

  void validate() const;
};

// Coupling between two discrete measures; cost is the squared-distance
// transport cost sum_k mass_k * |a_{i_k} - b_{j_k}|^2.
struct TransportPlan {
  struct Entry {
    int i, j;
    double mass;
  };
  std::vector<Entry> entries;
  double cost = 0.0;

  // marginals must reproduce the endpoint weights to 1e-10
  void validate(const DiscreteMeasure& a, const DiscreteMeasure& b) const;
};

// ---- path statistics ----

// sqrt( sum_k dt_k * W2^2(p.layers[k], q.layers[k]) ); grids must match
double path_distance(const ParameterPath& p, const ParameterPath& q, int cap = 512);

// flatten to a single measure, layer weights scaled by dt_k
DiscreteMeasure time_marginal(const ParameterPath& p);

// forward-difference metric-derivative estimate:
//   (1/2) * sum_{k<L-1} W2^2(layers[k+1], layers[k]) / dt_k   (needs L >= 2)
double dirichlet_energy(const ParameterPath& p);

// max particle norm over all layers
double support_radius(const ParameterPath& p);

// sum_k dt_k * sum_i w_i |theta_i|^2
double second_moment(const ParameterPath& p);

}  // namespace mflab
