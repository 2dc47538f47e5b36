#pragma once
#include <vector>

#include "mflab/measures.hpp"

namespace mflab {

// Exact linear assignment, O(n^3) shortest-augmenting-path with potentials.
// cost is n x n row-major. Returned duals satisfy u[i] + v[j] <= cost[i][j]
// with equality on matched pairs.
struct AssignResult {
  std::vector<int> row_to_col;
  std::vector<double> u, v;
  double cost = 0.0;
};
AssignResult solve_assignment(const std::vector<double>& cost, int n);

// Lexicographically smallest optimal matching: restrict to tight edges
// (complementary slackness puts every optimal matching there), then fix rows
// in order, taking the smallest column that still extends to a perfect
// matching.
std::vector<int> lex_min_optimal_matching(const std::vector<double>& cost, int n,
                                          const AssignResult& base);

// Exact optimal coupling for cost |a-b|^power (power 1 or 2) between general
// weighted clouds via successive-shortest-path min-cost flow.
TransportPlan min_cost_flow_plan(const DiscreteMeasure& a, const DiscreteMeasure& b, int power);

// Optimal coupling for squared distance. Uniform equal-size inputs take the
// assignment route (with lexicographic tie-break); anything else goes through
// the flow solver as long as n_a + n_b <= cap (SolverCapExceeded otherwise).
TransportPlan optimal_plan(const DiscreteMeasure& a, const DiscreteMeasure& b, int cap = 512);

double w2(const DiscreteMeasure& a, const DiscreteMeasure& b, int cap = 512);

// exhaustive permutation search; uniform weights, equal counts, n <= 8
double w2_brute_force(const DiscreteMeasure& a, const DiscreteMeasure& b);

// 1-Wasserstein via the flow solver (diagnostics/tests)
double w1(const DiscreteMeasure& a, const DiscreteMeasure& b, int cap = 512);

}  // namespace mflab
