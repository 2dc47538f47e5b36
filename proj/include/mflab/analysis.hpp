#pragma once
#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "mflab/flow.hpp"
#include "mflab/measures.hpp"
#include "mflab/model.hpp"

namespace mflab {

// Tail-extrapolated limit value of the objective: fits J ~ J* + a e^{-b tau}
// and J ~ J* + a tau^{-c} over the trailing records, keeps whichever explains
// the tail better, and returns its J*. Constant traces return the last value.
double estimate_j_star(const FlowTrace& trace, double tail_fraction = 0.5);

// Log-gap vs log-slope regression over the trace tail. The fitted line slope s
// estimates 1/(1-alpha); alpha is clipped to (0, 1/2] with the raw value kept.
// c is the max of gap^(1-alpha)/slope over the fitted points, so the
// inequality gap^(1-alpha) <= c * slope holds on all of them by construction.
struct LSFit {
  double alpha = 0.5;
  double alpha_raw = 0.5;  // unclipped regression estimate
  double c = 0.0;
  double r2 = 0.0;
  double gap_floor = 0.0;
  int points = 0;
  double tau_lo = 0.0, tau_hi = 0.0;  // fitted window
};

LSFit ls_fit(const FlowTrace& trace, double j_star, double gap_floor = 1e-12,
             double tail_fraction = 0.5);

// Decay-law fit implied by the exponent: alpha = 1/2 predicts an exponential
// tail gap ~ exp(-tau/(2 c^2)); alpha < 1/2 predicts gap ~ tau^(-1/(1-2 alpha)).
// Also checks the distance bound dist(eta_tau, eta*) <= (c/alpha) gap^alpha on
// stored snapshots, with the last snapshot standing in for the limit.
struct RateFit {
  std::string branch;          // "exponential" or "polynomial"
  double rate = 0.0;           // fitted r in e^{-r tau}, or fitted p in tau^{-p}
  double predicted_rate = 0.0; // 1/(2 c^2), or 1/(1-2 alpha)
  double c_hat = 0.0;          // exponential branch: sqrt(1/(2 rate))
  double r2 = 0.0;
  std::vector<std::array<double, 3>> table;  // tau, observed gap, predicted gap
  double worst_distance_ratio = 0.0;
  int distance_points = 0;
  bool distance_bound_ok = true;
  bool proxy_limit = true;  // the limit is proxied by the final snapshot
};

RateFit rate_fit(const FlowTrace& trace, double j_star, double alpha, double c,
                 double gap_floor = 1e-12, double tail_fraction = 0.5);

// Directional derivative h(tau) = dJ/dtau along the generalized geodesic that
// linearly interpolates particles of path1 to path2 after matching both to
// path0 by optimal plans (uniform weights, so the plans are permutations).
// lambda_est is the smallest secant slope of h divided by the squared geodesic
// length: J is lambda_est-convex along this geodesic on the sampled grid.
struct ConvexityReport {
  std::vector<double> taus;
  std::vector<double> h;
  double lip = 0.0;         // empirical Lipschitz constant of h
  double w2_sq = 0.0;       // squared length of the geodesic
  double lambda_est = 0.0;  // 0 when degenerate
  bool degenerate = false;  // zero-length geodesic
};

ConvexityReport convexity_probe(const VectorFieldModel& model, const ParameterPath& path1,
                                const ParameterPath& path2, const ParameterPath& path0,
                                const DataMeasure& data, double lambda, int substeps,
                                int grid = 9, int threads = 0);

// JSON bundle the experiment runner writes next to the trace
nlohmann::json analysis_report(double j_star, const LSFit& ls, const RateFit& rate);

}  // namespace mflab
