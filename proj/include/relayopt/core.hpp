#pragma once
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relayopt {

// Error classes map onto the CLI exit codes (see tools/main.cpp).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct SizeError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct DegenerateGeometryError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {x * c, y * c}; }
  double norm() const { return std::hypot(x, y); }
};

inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

// Dense row-major matrix of doubles; small sizes only (n <= a few dozen).
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), d(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

// Node positions plus the jammer. Node 0 is the source and node n-1 the
// destination; both stay fixed under every optimizer. Indices 1..n-2 are
// relays. One coordinate unit corresponds to 50 m in the evaluation scenario.
struct Deployment {
  std::vector<Vec2> positions;
  Vec2 jammer;

  int n() const { return static_cast<int>(positions.size()); }
  int source() const { return 0; }
  int dest() const { return n() - 1; }
  int relay_count() const { return n() - 2; }
  bool is_relay(int i) const { return i > 0 && i < n() - 1; }

  void validate() const {
    if (n() < 2) throw InputError("deployment needs at least 2 nodes");
    for (const auto& p : positions)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InputError("non-finite node position");
    if (!std::isfinite(jammer.x) || !std::isfinite(jammer.y)) throw InputError("non-finite jammer position");
  }
};

// splitmix64; used to derive independent substream seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(a ^ mix_seed(b)); }

}  // namespace relayopt
