#include "relayopt/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relayopt::spectral {

std::vector<double> endpoint_weights(int n) {
  std::vector<double> w(n, 1.0);
  w.front() = w.back() = 3.0 * n;
  return w;
}

WeightedLaplacian weighted_laplacian(const Mat& a, const std::vector<double>& w) {
  if (a.rows != a.cols) throw InputError("adjacency must be square");
  if (static_cast<int>(w.size()) != a.rows) throw InputError("weight vector size mismatch");
  for (double wi : w)
    if (!(wi > 0)) throw InputError("weights must be positive");

  const int n = a.rows;
  WeightedLaplacian out;
  out.w = w;
  out.lw = Mat(n, n);
  std::vector<double> degree(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) degree[i] += a.at(i, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double lij = (i == j ? degree[i] : 0.0) - a.at(i, j);
      out.lw.at(i, j) = lij / std::sqrt(w[i] * w[j]);
    }
  return out;
}

EigenSystem jacobi_eigensystem(const Mat& sym) {
  if (sym.rows != sym.cols) throw InputError("matrix must be square");
  const int n = sym.rows;
  Mat a = sym;
  Mat v = Mat::identity(n);

  auto off_mass = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) s += a.at(i, j) * a.at(i, j);
    return std::sqrt(s);
  };

  const int max_sweeps = 100;
  int sweep = 0;
  while (off_mass() > 1e-12) {
    if (++sweep > max_sweeps) throw ConvergenceError("jacobi eigensolver did not converge");
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a.at(i, i) < a.at(j, j); });

  EigenSystem out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (int c = 0; c < n; ++c) {
    out.values[c] = a.at(order[c], order[c]);
    // Fix the sign so eigenvectors are deterministic.
    int lead = 0;
    while (lead < n - 1 && std::abs(v.at(lead, order[c])) < 1e-12) ++lead;
    const double sign = v.at(lead, order[c]) >= 0 ? 1.0 : -1.0;
    for (int r = 0; r < n; ++r) out.vectors.at(r, c) = sign * v.at(r, order[c]);
  }
  return out;
}

Lambda2 lambda2(const Mat& lw) {
  const EigenSystem es = jacobi_eigensystem(lw);
  Lambda2 out;
  out.value = es.values[1];
  out.eigvec.resize(lw.rows);
  for (int r = 0; r < lw.rows; ++r) out.eigvec[r] = es.vectors.at(r, 1);
  return out;
}

Lambda2Grad lambda2_grad(const channel::ChannelParams& p, const Deployment& dep,
                         const std::vector<double>& w) {
  const int n = dep.n();
  if (n < 3) throw InputError("gradient needs at least one relay");
  const Mat a = channel::adjacency(p, dep);
  const WeightedLaplacian wl = weighted_laplacian(a, w);
  const EigenSystem es = jacobi_eigensystem(wl.lw);

  Lambda2Grad out;
  out.degenerate = (es.values[2] - es.values[1]) < kDegenerateGap;
  std::vector<double> v(n);
  for (int r = 0; r < n; ++r) v[r] = es.vectors.at(r, 1);

  out.grad = Mat(n - 2, 2);
  for (int relay = 1; relay < n - 1; ++relay) {
    for (int coord = 0; coord < 2; ++coord) {
      const Mat da = channel::adjacency_grad(p, dep, relay, coord);
      // dL = diag(row sums of dA) - dA, then the weighted quadratic form.
      double g = 0.0;
      for (int i = 0; i < n; ++i) {
        double drow = 0.0;
        for (int j = 0; j < n; ++j) drow += da.at(i, j);
        g += v[i] * v[i] * drow / w[i];
        for (int j = 0; j < n; ++j) g -= v[i] * da.at(i, j) * v[j] / std::sqrt(w[i] * w[j]);
      }
      out.grad.at(relay - 1, coord) = g;
    }
  }
  return out;
}

Deployment wcc_step(const channel::ChannelParams& p, const Deployment& dep,
                    const std::vector<double>& w, double zeta) {
  const Lambda2Grad lg = lambda2_grad(p, dep, w);
  Deployment next = dep;
  for (int relay = 1; relay < dep.n() - 1; ++relay) {
    const Vec2 g{lg.grad.at(relay - 1, 0), lg.grad.at(relay - 1, 1)};
    const double norm = g.norm();
    if (norm == 0.0) continue;
    next.positions[relay] = next.positions[relay] + g * (zeta / norm);
  }
  return next;
}

}  // namespace relayopt::spectral
