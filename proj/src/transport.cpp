#include "mflab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "mflab/smallmat.hpp"

namespace mflab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  std::vector<double> c(static_cast<size_t>(a.n()) * b.n());
  for (int i = 0; i < a.n(); ++i)
    for (int j = 0; j < b.n(); ++j)
      c[static_cast<size_t>(i) * b.n() + j] = sqdist(a.pt(i), b.pt(j), a.m);
  return c;
}

bool is_uniform(const DiscreteMeasure& a) {
  double w = 1.0 / a.n();
  for (double x : a.weights)
    if (std::abs(x - w) > 1e-12) return false;
  return true;
}
}  // namespace

// shortest augmenting paths with potentials, 1-based internally
AssignResult solve_assignment(const std::vector<double>& cost, int n) {
  require(n >= 1, Errc::ShapeMismatch, "assignment needs n >= 1");
  require(cost.size() == static_cast<size_t>(n) * n, Errc::ShapeMismatch,
          "cost matrix must be n x n");
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  AssignResult r;
  r.row_to_col.assign(n, -1);
  r.u.assign(n, 0.0);
  r.v.assign(n, 0.0);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1) r.row_to_col[p[j] - 1] = j - 1;
  for (int i = 1; i <= n; ++i) r.u[i - 1] = u[i];
  for (int j = 1; j <= n; ++j) r.v[j - 1] = v[j];
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost[static_cast<size_t>(i) * n + r.row_to_col[i]];
  r.cost = total;
  return r;
}

namespace {
// Kuhn augmenting step on the tight graph; mutates matching only on success.
bool try_augment(int row, const std::vector<std::vector<int>>& adj,
                 const std::vector<char>& col_fixed, std::vector<char>& visited,
                 std::vector<int>& col_to_row, std::vector<int>& row_to_col) {
  for (int j : adj[row]) {
    if (col_fixed[j] || visited[j]) continue;
    visited[j] = 1;
    if (col_to_row[j] < 0 ||
        try_augment(col_to_row[j], adj, col_fixed, visited, col_to_row, row_to_col)) {
      col_to_row[j] = row;
      row_to_col[row] = j;
      return true;
    }
  }
  return false;
}
}  // namespace

std::vector<int> lex_min_optimal_matching(const std::vector<double>& cost, int n,
                                          const AssignResult& base) {
  double scale = 1.0;
  for (double c : cost) scale = std::max(scale, std::abs(c));
  const double tol = 1e-9 * scale;

  // all optimal matchings live on tight edges of the optimal duals
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double slack = cost[static_cast<size_t>(i) * n + j] - base.u[i] - base.v[j];
      if (std::abs(slack) <= tol) adj[i].push_back(j);
    }
    // the base matching edge is tight by complementary slackness; keep it even
    // if roundoff pushed its slack past tol
    int jb = base.row_to_col[i];
    if (std::find(adj[i].begin(), adj[i].end(), jb) == adj[i].end()) {
      adj[i].insert(std::lower_bound(adj[i].begin(), adj[i].end(), jb), jb);
    }
  }

  std::vector<int> row_to_col = base.row_to_col;
  std::vector<int> col_to_row(n, -1);
  for (int i = 0; i < n; ++i) col_to_row[row_to_col[i]] = i;
  std::vector<char> col_fixed(n, 0), visited(n);

  for (int i = 0; i < n; ++i) {
    for (int j : adj[i]) {
      if (col_fixed[j]) continue;
      if (row_to_col[i] == j) break;  // current matching already uses the candidate
      // try to rewire: give column j to row i, re-match the row that held it
      int displaced = col_to_row[j];
      int old_j = row_to_col[i];
      col_to_row[old_j] = -1;
      col_to_row[j] = i;
      row_to_col[i] = j;
      col_fixed[j] = 1;
      std::fill(visited.begin(), visited.end(), 0);
      if (displaced < 0 ||
          try_augment(displaced, adj, col_fixed, visited, col_to_row, row_to_col)) {
        col_fixed[j] = 0;
        break;
      }
      // infeasible; restore and try the next column
      col_fixed[j] = 0;
      row_to_col[i] = old_j;
      col_to_row[old_j] = i;
      col_to_row[j] = displaced;
    }
    col_fixed[row_to_col[i]] = 1;
  }
  return row_to_col;
}

// --- successive shortest paths min-cost flow (general weights) ---

namespace {
struct FlowNet {
  struct Edge {
    int to;
    double cap, cost;
  };
  std::vector<Edge> edges;  // paired: edge 2k and its reverse 2k+1
  std::vector<std::vector<int>> adj;

  explicit FlowNet(int n) : adj(n) {}
  void add(int a, int b, double cap, double cost) {
    adj[a].push_back(static_cast<int>(edges.size()));
    edges.push_back({b, cap, cost});
    adj[b].push_back(static_cast<int>(edges.size()));
    edges.push_back({a, 0.0, -cost});
  }
};
}  // namespace

TransportPlan min_cost_flow_plan(const DiscreteMeasure& a, const DiscreteMeasure& b, int power) {
  a.validate();
  b.validate();
  require(a.m == b.m, Errc::DimensionMismatch, "measures live in different dimensions");
  require(power == 1 || power == 2, Errc::ShapeMismatch, "cost power must be 1 or 2");
  const int na = a.n(), nb = b.n();
  const int S = 0, T = na + nb + 1, V = na + nb + 2;
  FlowNet net(V);
  for (int i = 0; i < na; ++i) net.add(S, 1 + i, a.weights[i], 0.0);
  std::vector<int> ab_edge(static_cast<size_t>(na) * nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      double d2 = sqdist(a.pt(i), b.pt(j), a.m);
      double c = power == 2 ? d2 : std::sqrt(d2);
      ab_edge[static_cast<size_t>(i) * nb + j] = static_cast<int>(net.edges.size());
      net.add(1 + i, 1 + na + j, 2.0, c);  // total mass is 1, cap 2 is unbounded
    }
  for (int j = 0; j < nb; ++j) net.add(1 + na + j, T, b.weights[j], 0.0);

  const double cap_eps = 1e-15;
  std::vector<double> h(V, 0.0), dist(V);
  std::vector<int> prev_edge(V);
  double remaining = 1.0;
  int rounds = 0;
  const int max_rounds = 4 * (na + nb) + 16;  // each round saturates a boundary arc
  while (remaining > 1e-12 && ++rounds <= max_rounds) {
    // Dijkstra on reduced costs
    std::fill(dist.begin(), dist.end(), kInf);
    dist[S] = 0.0;
    std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>,
                        std::greater<>> pq;
    pq.emplace(0.0, S);
    while (!pq.empty()) {
      auto [d, uu] = pq.top();
      pq.pop();
      if (d > dist[uu]) continue;
      for (int ei : net.adj[uu]) {
        const auto& e = net.edges[ei];
        if (e.cap <= cap_eps) continue;
        // roundoff can push reduced costs a hair below zero; clamping keeps
        // Dijkstra from cycling on phantom improvements
        double rc = std::max(0.0, e.cost + h[uu] - h[e.to]);
        double nd = d + rc;
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          prev_edge[e.to] = ei;
          pq.emplace(nd, e.to);
        }
      }
    }
    if (!(dist[T] < kInf)) break;  // leftover is roundoff dust; marginals get validated
    for (int vtx = 0; vtx < V; ++vtx)
      if (dist[vtx] < kInf) h[vtx] += dist[vtx];
    double push = remaining;
    for (int vtx = T; vtx != S; vtx = net.edges[prev_edge[vtx] ^ 1].to)
      push = std::min(push, net.edges[prev_edge[vtx]].cap);
    for (int vtx = T; vtx != S; vtx = net.edges[prev_edge[vtx] ^ 1].to) {
      net.edges[prev_edge[vtx]].cap -= push;
      net.edges[prev_edge[vtx] ^ 1].cap += push;
    }
    remaining -= push;
  }
  require(remaining <= 1e-9, Errc::NonFiniteState, "flow solver failed to route all mass");

  TransportPlan plan;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      int ei = ab_edge[static_cast<size_t>(i) * nb + j];
      double mass = net.edges[ei ^ 1].cap;  // reverse cap accumulates the flow
      if (mass > 1e-14) {
        plan.entries.push_back({i, j, mass});
        plan.cost += mass * net.edges[ei].cost;
      }
    }
  return plan;
}

TransportPlan optimal_plan(const DiscreteMeasure& a, const DiscreteMeasure& b, int cap) {
  a.validate();
  b.validate();
  require(a.m == b.m, Errc::DimensionMismatch, "measures live in different dimensions");
  if (a.n() == b.n() && is_uniform(a) && is_uniform(b)) {
    const int n = a.n();
    require(n <= cap, Errc::SolverCapExceeded, "support exceeds the solver cap");
    auto c = cost_matrix(a, b);
    auto base = solve_assignment(c, n);
    auto match = lex_min_optimal_matching(c, n, base);
    TransportPlan plan;
    plan.entries.reserve(n);
    const double mass = 1.0 / n;
    for (int i = 0; i < n; ++i) {
      plan.entries.push_back({i, match[i], mass});
      plan.cost += mass * c[static_cast<size_t>(i) * n + match[i]];
    }
    return plan;
  }
  require(a.n() + b.n() <= cap, Errc::SolverCapExceeded, "support exceeds the solver cap");
  return min_cost_flow_plan(a, b, 2);
}

double w2(const DiscreteMeasure& a, const DiscreteMeasure& b, int cap) {
  return std::sqrt(optimal_plan(a, b, cap).cost);
}

double w2_brute_force(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  a.validate();
  b.validate();
  require(a.m == b.m, Errc::DimensionMismatch, "measures live in different dimensions");
  require(a.n() == b.n(), Errc::ShapeMismatch, "brute force needs equal particle counts");
  require(is_uniform(a) && is_uniform(b), Errc::ShapeMismatch,
          "brute force needs uniform weights");
  const int n = a.n();
  require(n <= 8, Errc::TooLarge, "brute force capped at 8 points");
  auto c = cost_matrix(a, b);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = kInf;
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += c[static_cast<size_t>(i) * n + perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / n);
}

double w1(const DiscreteMeasure& a, const DiscreteMeasure& b, int cap) {
  require(a.n() + b.n() <= cap, Errc::SolverCapExceeded, "support exceeds the solver cap");
  return min_cost_flow_plan(a, b, 1).cost;
}

}  // namespace mflab
