#pragma once
#include "relayopt/channel.hpp"
#include "relayopt/core.hpp"

namespace relayopt::spectral {

struct WeightedLaplacian {
  Mat lw;                 // W^{-1/2} (D - A) W^{-1/2}
  std::vector<double> w;  // diagonal weights
};

// Endpoint-emphasized weights: 3n on source and destination, 1 elsewhere.
std::vector<double> endpoint_weights(int n);

WeightedLaplacian weighted_laplacian(const Mat& a, const std::vector<double>& w);

struct EigenSystem {
  std::vector<double> values;  // ascending
  Mat vectors;                 // columns aligned with values
};

// Cyclic Jacobi rotations; converges when the off-diagonal Frobenius mass
// drops below 1e-12. Exact enough for the n <= 20 matrices used here.
EigenSystem jacobi_eigensystem(const Mat& sym);

struct Lambda2 {
  double value = 0.0;
  std::vector<double> eigvec;  // unit norm
};

Lambda2 lambda2(const Mat& lw);

// Gap below which the second eigenvalue is treated as degenerate; the
// eigenvector of lowest index is then used deterministically (a subgradient).
inline constexpr double kDegenerateGap = 1e-8;

struct Lambda2Grad {
  Mat grad;  // (n-2) x 2, one row per relay
  bool degenerate = false;
};

// First-order perturbation of a simple eigenvalue: d lambda2 = v^T dLW v with
// dLW assembled from the analytic capacity gradients.
Lambda2Grad lambda2_grad(const channel::ChannelParams& p, const Deployment& dep,
                         const std::vector<double>& w);

// Moves each relay by zeta along its normalized lambda2 gradient; endpoints
// and zero-gradient relays stay put.
Deployment wcc_step(const channel::ChannelParams& p, const Deployment& dep,
                    const std::vector<double>& w, double zeta);

}  // namespace relayopt::spectral
