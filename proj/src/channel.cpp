#include "relayopt/channel.hpp"

#include <cmath>

namespace relayopt::channel {

void ChannelParams::validate() const {
  if (!(alpha > 0) || !(eta > 0) || !(bandwidth > 0) || !(r_int > 0) || !(rho > 0) || !(kappa > 0) || !(z0 > 0))
    throw InputError("channel parameters must be strictly positive");
  if (!(z0 < 1)) throw InputError("z0 must be below 1");
}

double nu(const ChannelParams& p, double z) {
  const double e = std::exp(-p.kappa * z - std::log(p.z0));
  return p.rho * e / (1.0 + e);
}

double nu_prime(const ChannelParams& p, double z) {
  const double e = std::exp(-p.kappa * z - std::log(p.z0));
  const double s = 1.0 + e;
  return -p.rho * p.kappa * e / (s * s);
}

namespace {

// Pairwise node distances plus node-jammer distances, validated once.
struct Geometry {
  Mat node_dist;               // n x n, zero diagonal
  std::vector<double> jam_dist;  // n

  Geometry(const Deployment& dep) {
    dep.validate();
    const int n = dep.n();
    node_dist = Mat(n, n);
    jam_dist.resize(n);
    for (int i = 0; i < n; ++i) {
      jam_dist[i] = dist(dep.positions[i], dep.jammer);
      if (jam_dist[i] < kMinDistance) throw DegenerateGeometryError("node coincides with jammer");
      for (int j = i + 1; j < n; ++j) {
        const double dij = dist(dep.positions[i], dep.positions[j]);
        if (dij < kMinDistance) throw DegenerateGeometryError("coincident nodes");
        node_dist.at(i, j) = node_dist.at(j, i) = dij;
      }
    }
  }
};

double sir_from_geometry(const ChannelParams& p, const Geometry& g, int i, int j) {
  const int n = g.node_dist.rows;
  double denom = p.eta * std::pow(g.jam_dist[j], -p.alpha);
  for (int k = 0; k < n; ++k) {
    if (k == i || k == j) continue;
    denom += nu(p, g.node_dist.at(j, k) / p.r_int);
  }
  return std::pow(g.node_dist.at(i, j), -p.alpha) / denom;
}

double rate_from_sirs(const ChannelParams& p, double s_ij, double s_ji) {
  if (s_ij <= 0.0 || s_ji <= 0.0) return 0.0;  // continuous limit of the harmonic form
  return p.bandwidth / (1.0 / std::log1p(s_ij) + 1.0 / std::log1p(s_ji));
}

}  // namespace

double sir(const ChannelParams& p, const Deployment& dep, int i, int j) {
  p.validate();
  if (i == j) throw InputError("sir requires i != j");
  Geometry g(dep);
  return sir_from_geometry(p, g, i, j);
}

double capacity(const ChannelParams& p, const Deployment& dep, int i, int j) {
  p.validate();
  if (i == j) return 0.0;
  Geometry g(dep);
  return rate_from_sirs(p, sir_from_geometry(p, g, i, j), sir_from_geometry(p, g, j, i));
}

Mat adjacency(const ChannelParams& p, const Deployment& dep) {
  p.validate();
  Geometry g(dep);
  const int n = dep.n();
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double c = rate_from_sirs(p, sir_from_geometry(p, g, i, j), sir_from_geometry(p, g, j, i));
      a.at(i, j) = a.at(j, i) = c;
    }
  return a;
}

namespace {

// One direction p -> q (receiver q): value and partials of SIR with respect
// to each distance it involves.
struct SirTerms {
  double value;
  double d_dpq;                  // w.r.t. d(p,q)
  double d_djam;                 // w.r.t. d(q, jammer)
  std::vector<double> d_dqk;     // w.r.t. d(q,k) for each node k (0 for k in {p,q})
};

SirTerms sir_terms(const ChannelParams& p, const Geometry& g, int tx, int rx) {
  const int n = g.node_dist.rows;
  const double num = std::pow(g.node_dist.at(tx, rx), -p.alpha);
  double denom = p.eta * std::pow(g.jam_dist[rx], -p.alpha);
  for (int k = 0; k < n; ++k) {
    if (k == tx || k == rx) continue;
    denom += nu(p, g.node_dist.at(rx, k) / p.r_int);
  }
  SirTerms t;
  t.value = num / denom;
  t.d_dpq = -p.alpha * std::pow(g.node_dist.at(tx, rx), -p.alpha - 1.0) / denom;
  t.d_djam = num * p.eta * p.alpha * std::pow(g.jam_dist[rx], -p.alpha - 1.0) / (denom * denom);
  t.d_dqk.assign(n, 0.0);
  for (int k = 0; k < n; ++k) {
    if (k == tx || k == rx) continue;
    t.d_dqk[k] = -num / (denom * denom) * nu_prime(p, g.node_dist.at(rx, k) / p.r_int) / p.r_int;
  }
  return t;
}

// d f_cap / d SIR for one direction, holding the other direction fixed.
double rate_dsir(const ChannelParams& p, double s_this, double s_other) {
  const double h = 1.0 / std::log1p(s_this) + 1.0 / std::log1p(s_other);
  const double l = std::log1p(s_this);
  return p.bandwidth / (h * h * l * l * (1.0 + s_this));
}

// d dist(a,b) / d x_node^(coord); zero unless node is one of the ends.
double dist_partial(const Deployment& dep, const Geometry& g, int a, int b, int node, int coord) {
  if (node != a && node != b) return 0.0;
  const Vec2 diff = dep.positions[a] - dep.positions[b];
  const double comp = (coord == 0) ? diff.x : diff.y;
  const double sign = (node == a) ? 1.0 : -1.0;
  return sign * comp / g.node_dist.at(a, b);
}

double jam_dist_partial(const Deployment& dep, const Geometry& g, int a, int node, int coord) {
  if (node != a) return 0.0;
  const Vec2 diff = dep.positions[a] - dep.jammer;
  return ((coord == 0) ? diff.x : diff.y) / g.jam_dist[a];
}

}  // namespace

Mat adjacency_grad(const ChannelParams& p, const Deployment& dep, int node, int coord) {
  p.validate();
  if (coord != 0 && coord != 1) throw InputError("coord must be 0 or 1");
  if (node < 0 || node >= dep.n()) throw InputError("node index out of range");
  Geometry g(dep);
  const int n = dep.n();
  Mat grad(n, n);

  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const SirTerms fwd = sir_terms(p, g, a, b);  // receiver b
      const SirTerms bwd = sir_terms(p, g, b, a);  // receiver a
      if (fwd.value <= 0.0 || bwd.value <= 0.0) continue;
      const double df_dsf = rate_dsir(p, fwd.value, bwd.value);
      const double df_dsb = rate_dsir(p, bwd.value, fwd.value);

      // Chain each SIR through the distances that depend on this node.
      double ds_fwd = fwd.d_dpq * dist_partial(dep, g, a, b, node, coord) +
                      fwd.d_djam * jam_dist_partial(dep, g, b, node, coord);
      double ds_bwd = bwd.d_dpq * dist_partial(dep, g, a, b, node, coord) +
                      bwd.d_djam * jam_dist_partial(dep, g, a, node, coord);
      if (node == b) {
        for (int k = 0; k < n; ++k)
          if (fwd.d_dqk[k] != 0.0) ds_fwd += fwd.d_dqk[k] * dist_partial(dep, g, b, k, node, coord);
      } else if (node != a) {
        ds_fwd += fwd.d_dqk[node] * dist_partial(dep, g, b, node, node, coord);
      }
      if (node == a) {
        for (int k = 0; k < n; ++k)
          if (bwd.d_dqk[k] != 0.0) ds_bwd += bwd.d_dqk[k] * dist_partial(dep, g, a, k, node, coord);
      } else if (node != b) {
        ds_bwd += bwd.d_dqk[node] * dist_partial(dep, g, a, node, node, coord);
      }

      const double val = df_dsf * ds_fwd + df_dsb * ds_bwd;
      grad.at(a, b) = grad.at(b, a) = val;
    }
  }
  return grad;
}

}  // namespace relayopt::channel
