#include "relayopt/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace relayopt::flow {

namespace {

void validate_input(const Mat& a, int s, int t) {
  if (a.rows != a.cols || a.rows < 2) throw InputError("capacity matrix must be square, n >= 2");
  if (s < 0 || s >= a.rows || t < 0 || t >= a.rows || s == t) throw InputError("bad flow endpoints");
  for (double v : a.d) {
    if (!(v >= 0.0)) throw InputError("negative or non-finite capacity");
  }
}

// BFS over arcs with usable residual; fills parent[], returns true if t reached.
bool bfs_residual(const Mat& res, int s, int t, std::vector<int>& parent) {
  const int n = res.rows;
  std::fill(parent.begin(), parent.end(), -1);
  parent[s] = s;
  std::queue<int> q;
  q.push(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v = 0; v < n; ++v) {
      if (parent[v] == -1 && res.at(u, v) > kResidualEps) {
        parent[v] = u;
        if (v == t) return true;
        q.push(v);
      }
    }
  }
  return false;
}

double cut_value(const Mat& a, const std::vector<bool>& in_s) {
  double c = 0.0;
  for (int i = 0; i < a.rows; ++i) {
    if (!in_s[i]) continue;
    for (int j = 0; j < a.cols; ++j)
      if (!in_s[j]) c += a.at(i, j);
  }
  return c;
}

std::vector<int> collect(const std::vector<bool>& in_s) {
  std::vector<int> ids;
  for (int i = 0; i < static_cast<int>(in_s.size()); ++i)
    if (in_s[i]) ids.push_back(i);
  return ids;
}

}  // namespace

FlowResult max_flow(const Mat& a, int s, int t) {
  validate_input(a, s, t);
  const int n = a.rows;
  Mat res = a;
  std::vector<int> parent(n, -1);
  double total = 0.0;

  while (bfs_residual(res, s, t, parent)) {
    double bottleneck = std::numeric_limits<double>::infinity();
    for (int v = t; v != s; v = parent[v]) bottleneck = std::min(bottleneck, res.at(parent[v], v));
    for (int v = t; v != s; v = parent[v]) {
      res.at(parent[v], v) -= bottleneck;
      res.at(v, parent[v]) += bottleneck;
    }
    total += bottleneck;
  }

  // S = nodes still reachable from s in the residual graph.
  std::vector<bool> in_s(n, false);
  std::vector<int> stack{s};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    if (in_s[u]) continue;
    in_s[u] = true;
    for (int v = 0; v < n; ++v)
      if (!in_s[v] && res.at(u, v) > kResidualEps) stack.push_back(v);
  }

  FlowResult out;
  out.value = total;
  out.cut_partition = collect(in_s);
  return out;
}

FlowResult brute_force_min_cut(const Mat& a, int s, int t) {
  validate_input(a, s, t);
  const int n = a.rows;
  if (n > 20) throw SizeError("brute-force min-cut limited to n <= 20");

  std::vector<int> free_nodes;
  for (int i = 0; i < n; ++i)
    if (i != s && i != t) free_nodes.push_back(i);

  const std::uint32_t count = 1u << free_nodes.size();
  std::vector<bool> in_s(n, false);
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> best_set;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    std::fill(in_s.begin(), in_s.end(), false);
    in_s[s] = true;
    for (size_t b = 0; b < free_nodes.size(); ++b)
      if (mask & (1u << b)) in_s[free_nodes[b]] = true;
    const double c = cut_value(a, in_s);
    if (c < best) {
      best = c;
      best_set = in_s;
    }
  }

  FlowResult out;
  out.value = best;
  out.cut_partition = collect(best_set);
  return out;
}

bool lipschitz_check(const Mat& a, int s, int t, int i, int j, double delta, bool symmetric) {
  validate_input(a, s, t);
  if (i == j) throw InputError("lipschitz_check requires i != j");
  Mat perturbed = a;
  perturbed.at(i, j) += delta;
  if (symmetric) perturbed.at(j, i) += delta;
  if (perturbed.at(i, j) < 0.0 || perturbed.at(j, i) < 0.0)
    throw InputError("perturbation drives capacity negative");

  const double base = max_flow(a, s, t).value;
  const double moved = max_flow(perturbed, s, t).value;
  const double bound = (symmetric ? 2.0 : 1.0) * std::abs(delta) + 1e-12;
  return std::abs(moved - base) <= bound;
}

}  // namespace relayopt::flow
