#pragma once
#include "relayopt/core.hpp"

namespace relayopt::flow {

// Residuals below this are treated as saturated; real-valued capacities need
// a cutoff for termination.
inline constexpr double kResidualEps = 1e-12;

struct FlowResult {
  double value = 0.0;
  std::vector<int> cut_partition;  // sorted node ids of a minimizing S, contains the source
};

// Exact max-flow by shortest augmenting paths on the dense capacity matrix.
// Each matrix entry A[i][j] is one directed arc i -> j; a symmetric matrix
// models the undirected graph. The minimizing cut is recovered from the
// final residual graph.
FlowResult max_flow(const Mat& a, int s, int t);

// Enumerates all 2^(n-2) source-side partitions; n <= 20.
FlowResult brute_force_min_cut(const Mat& a, int s, int t);

// Checks |C(perturbed) - C(A)| <= bound + 1e-12 where the perturbation adds
// delta to A[i][j] (and to A[j][i] when symmetric). Bound is |delta| per
// perturbed arc: 2|delta| symmetric, |delta| single-arc.
bool lipschitz_check(const Mat& a, int s, int t, int i, int j, double delta, bool symmetric = true);

}  // namespace relayopt::flow
