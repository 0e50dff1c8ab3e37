#pragma once
#include "relayopt/core.hpp"

namespace relayopt::channel {

// Link-capacity model: path-loss SIR with a known jammer, neighbor
// interference gated by a smoothed step, and a two-way harmonic rate.
struct ChannelParams {
  double alpha = 2.0;      // path-loss exponent
  double eta = 2.0;        // jammer-to-legitimate power ratio
  double bandwidth = 1.0;  // rate units per link
  double r_int = 1.0;      // interference radius, coordinate units
  double rho = 1.0;        // smoothed-step height
  double kappa = 10.0;     // smoothed-step steepness
  double z0 = 1e-3;        // smoothed-step offset, 0 < z0 < 1

  void validate() const;
};

// Distances below this raise DegenerateGeometryError instead of producing
// huge values whose gradients are useless.
inline constexpr double kMinDistance = 1e-6;

// Smoothed step: rho * sigmoid(-kappa*z - ln z0). Monotone decreasing, in (0, rho).
double nu(const ChannelParams& p, double z);
double nu_prime(const ChannelParams& p, double z);

// SIR of the transmission i -> j (receiver j): d_ij^-a / (eta d_jJ^-a + sum_k nu(d_jk / r_int))
// where the sum runs over all legitimate nodes except i and j.
double sir(const ChannelParams& p, const Deployment& dep, int i, int j);

// Two-way link rate B / (1/ln(1+SIR_ij) + 1/ln(1+SIR_ji)); zero on the diagonal.
double capacity(const ChannelParams& p, const Deployment& dep, int i, int j);

// Full n x n capacity matrix: symmetric, nonnegative, zero diagonal.
Mat adjacency(const ChannelParams& p, const Deployment& dep);

// Analytic partials [dA_pq / dx_node^(coord)] for one node coordinate,
// assembled by the chain rule through distances, SIR, nu and the rate.
// coord is 0 for x, 1 for y.
Mat adjacency_grad(const ChannelParams& p, const Deployment& dep, int node, int coord);

}  // namespace relayopt::channel
