#include "relayopt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace relayopt::nn {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_bwd(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

double softplus_fwd(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double huber(double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; }
double huber_slope(double x) { return std::abs(x) < 1.0 ? x : (x > 0 ? 1.0 : -1.0); }

}  // namespace

int Tape::leaf(Tensor v) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(v);
  return push(std::move(n));
}

int Tape::binary_elementwise(Op op, int a, int b, bool allow_row_broadcast) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  const bool same = ta.same_shape(tb);
  const bool row = allow_row_broadcast && tb.rows == 1 && tb.cols == ta.cols;
  const bool scalar = tb.is_scalar();
  if (!same && !row && !scalar) throw ShapeError("elementwise shape mismatch");

  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.value = Tensor(ta.rows, ta.cols);
  for (int r = 0; r < ta.rows; ++r)
    for (int c = 0; c < ta.cols; ++c) {
      const double x = ta.at(r, c);
      const double y = same ? tb.at(r, c) : (row ? tb.at(0, c) : tb.data[0]);
      double v = 0.0;
      switch (op) {
        case Op::kAdd: v = x + y; break;
        case Op::kSub: v = x - y; break;
        case Op::kMul: v = x * y; break;
        case Op::kDiv: v = x / y; break;
        case Op::kMin2: v = (x <= y) ? x : y; break;
        case Op::kMax2: v = (x >= y) ? x : y; break;
        default: throw Error("not an elementwise op");
      }
      n.value.at(r, c) = v;
    }
  return push(std::move(n));
}

int Tape::add(int a, int b) { return binary_elementwise(Op::kAdd, a, b, true); }
int Tape::sub(int a, int b) { return binary_elementwise(Op::kSub, a, b, true); }
int Tape::mul(int a, int b) { return binary_elementwise(Op::kMul, a, b, false); }
int Tape::div(int a, int b) { return binary_elementwise(Op::kDiv, a, b, false); }
int Tape::min2(int a, int b) { return binary_elementwise(Op::kMin2, a, b, false); }
int Tape::max2(int a, int b) { return binary_elementwise(Op::kMax2, a, b, false); }

int Tape::neg(int a) {
  Node n;
  n.op = Op::kNeg;
  n.a = a;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v = -v;
  return push(std::move(n));
}

int Tape::scalar_mul(int a, double c) {
  Node n;
  n.op = Op::kScalarMul;
  n.a = a;
  n.c = c;
  n.value = nodes_[a].value;
  for (auto& v : n.value.data) v *= c;
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.cols != tb.rows) throw ShapeError("matmul shape mismatch");
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.value = Tensor(ta.rows, tb.cols);
  for (int r = 0; r < ta.rows; ++r)
    for (int k = 0; k < ta.cols; ++k) {
      const double x = ta.at(r, k);
      if (x == 0.0) continue;
      for (int c = 0; c < tb.cols; ++c) n.value.at(r, c) += x * tb.at(k, c);
    }
  return push(std::move(n));
}

int Tape::row_sum(int a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::kRowSum;
  n.a = a;
  n.value = Tensor(ta.rows, 1);
  for (int r = 0; r < ta.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < ta.cols; ++c) s += ta.at(r, c);
    n.value.at(r, 0) = s;
  }
  return push(std::move(n));
}

int Tape::sum_all(int a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::kSumAll;
  n.a = a;
  n.value = Tensor::scalar(std::accumulate(ta.data.begin(), ta.data.end(), 0.0));
  return push(std::move(n));
}

int Tape::mean_all(int a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::kMeanAll;
  n.a = a;
  n.value = Tensor::scalar(std::accumulate(ta.data.begin(), ta.data.end(), 0.0) /
                           static_cast<double>(ta.numel()));
  return push(std::move(n));
}

int Tape::global_add_pool(int a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::kAddPool;
  n.a = a;
  n.value = Tensor(1, ta.cols);
  for (int r = 0; r < ta.rows; ++r)
    for (int c = 0; c < ta.cols; ++c) n.value.at(0, c) += ta.at(r, c);
  return push(std::move(n));
}

int Tape::global_sort_pool(int a, int k) {
  const Tensor& ta = nodes_[a].value;
  if (k > ta.rows) throw ShapeError("sort pool k exceeds node count");
  Node n;
  n.op = Op::kSortPool;
  n.a = a;
  n.i0 = k;
  n.order.resize(ta.rows);
  std::iota(n.order.begin(), n.order.end(), 0);
  std::stable_sort(n.order.begin(), n.order.end(), [&](int lhs, int rhs) {
    // Descending on the last channel, then on earlier channels; a canonical
    // total order on row content keeps the pooled output permutation-invariant.
    for (int c = ta.cols - 1; c >= 0; --c) {
      if (ta.at(lhs, c) != ta.at(rhs, c)) return ta.at(lhs, c) > ta.at(rhs, c);
    }
    return false;
  });
  n.value = Tensor(1, k * ta.cols);
  for (int s = 0; s < k; ++s)
    for (int c = 0; c < ta.cols; ++c) n.value.at(0, s * ta.cols + c) = ta.at(n.order[s], c);
  return push(std::move(n));
}

int Tape::graph_size_norm(int a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::kSizeNorm;
  n.a = a;
  n.c = 1.0 / std::sqrt(static_cast<double>(ta.rows));
  n.value = ta;
  for (auto& v : n.value.data) v *= n.c;
  return push(std::move(n));
}

int Tape::slice_rows(int a, int r0, int r1) {
  const Tensor& ta = nodes_[a].value;
  if (r0 < 0 || r1 > ta.rows || r0 >= r1) throw ShapeError("bad row slice");
  Node n;
  n.op = Op::kSliceRows;
  n.a = a;
  n.i0 = r0;
  n.i1 = r1;
  n.value = Tensor(r1 - r0, ta.cols);
  for (int r = r0; r < r1; ++r)
    for (int c = 0; c < ta.cols; ++c) n.value.at(r - r0, c) = ta.at(r, c);
  return push(std::move(n));
}

int Tape::row_normalize(int a) {
  const Tensor& ta = nodes_[a].value;
  Node n;
  n.op = Op::kRowNormalize;
  n.a = a;
  n.value = Tensor(ta.rows, ta.cols);
  for (int r = 0; r < ta.rows; ++r) {
    double sq = 0.0;
    for (int c = 0; c < ta.cols; ++c) sq += ta.at(r, c) * ta.at(r, c);
    const double norm = std::sqrt(sq);
    if (norm > 0.0)
      for (int c = 0; c < ta.cols; ++c) n.value.at(r, c) = ta.at(r, c) / norm;
  }
  return push(std::move(n));
}

namespace {
template <typename F>
Tensor map(const Tensor& t, F f) {
  Tensor out = t;
  for (auto& v : out.data) v = f(v);
  return out;
}
}  // namespace

int Tape::gelu(int a) {
  Node n;
  n.op = Op::kGelu;
  n.a = a;
  n.value = map(nodes_[a].value, gelu_fwd);
  return push(std::move(n));
}

int Tape::tanh(int a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = map(nodes_[a].value, [](double x) { return std::tanh(x); });
  return push(std::move(n));
}

int Tape::softplus(int a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a;
  n.value = map(nodes_[a].value, softplus_fwd);
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.value = map(nodes_[a].value, [](double x) { return x > 0 ? x : 0.0; });
  return push(std::move(n));
}

int Tape::exp(int a) {
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.value = map(nodes_[a].value, [](double x) { return std::exp(x); });
  return push(std::move(n));
}

int Tape::log(int a) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = map(nodes_[a].value, [](double x) { return std::log(x); });
  return push(std::move(n));
}

int Tape::square(int a) {
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = map(nodes_[a].value, [](double x) { return x * x; });
  return push(std::move(n));
}

int Tape::huber_mean(int a) {
  const Tensor& ta = nodes_[a].value;
  double s = 0.0;
  for (double v : ta.data) s += huber(v);
  Node n;
  n.op = Op::kHuberMean;
  n.a = a;
  n.value = Tensor::scalar(s / static_cast<double>(ta.numel()));
  return push(std::move(n));
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
  has_grads_ = false;
}

const Tensor& Tape::grad(int id) const {
  if (!has_grads_) throw Error("backward has not been run");
  return grads_[id];
}

void Tape::backward(int out) {
  if (out < 0 || out >= size()) throw Error("bad output node");
  if (!nodes_[out].value.is_scalar()) throw ShapeError("backward output must be scalar");

  grads_.assign(nodes_.size(), Tensor());
  for (size_t i = 0; i < nodes_.size(); ++i)
    grads_[i] = Tensor(nodes_[i].value.rows, nodes_[i].value.cols);
  grads_[out].data[0] = 1.0;
  has_grads_ = true;

  for (int id = out; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Tensor& g = grads_[id];
    if (n.op == Op::kLeaf) continue;
    const Tensor& va = nodes_[n.a].value;
    Tensor& ga = grads_[n.a];

    switch (n.op) {
      case Op::kAdd:
      case Op::kSub: {
        const Tensor& vb = nodes_[n.b].value;
        Tensor& gb = grads_[n.b];
        const double sign = (n.op == Op::kSub) ? -1.0 : 1.0;
        const bool same = va.same_shape(vb);
        for (int r = 0; r < va.rows; ++r)
          for (int c = 0; c < va.cols; ++c) {
            ga.at(r, c) += g.at(r, c);
            if (same)
              gb.at(r, c) += sign * g.at(r, c);
            else if (vb.is_scalar())
              gb.data[0] += sign * g.at(r, c);
            else
              gb.at(0, c) += sign * g.at(r, c);
          }
        break;
      }
      case Op::kMul:
      case Op::kDiv: {
        const Tensor& vb = nodes_[n.b].value;
        Tensor& gb = grads_[n.b];
        const bool same = va.same_shape(vb);
        for (int r = 0; r < va.rows; ++r)
          for (int c = 0; c < va.cols; ++c) {
            const double y = same ? vb.at(r, c) : vb.data[0];
            const double gi = g.at(r, c);
            if (n.op == Op::kMul) {
              ga.at(r, c) += gi * y;
              const double gy = gi * va.at(r, c);
              if (same)
                gb.at(r, c) += gy;
              else
                gb.data[0] += gy;
            } else {
              ga.at(r, c) += gi / y;
              const double gy = -gi * va.at(r, c) / (y * y);
              if (same)
                gb.at(r, c) += gy;
              else
                gb.data[0] += gy;
            }
          }
        break;
      }
      case Op::kMin2:
      case Op::kMax2: {
        const Tensor& vb = nodes_[n.b].value;
        Tensor& gb = grads_[n.b];
        for (int r = 0; r < va.rows; ++r)
          for (int c = 0; c < va.cols; ++c) {
            const double x = va.at(r, c);
            const double y = vb.is_scalar() ? vb.data[0] : vb.at(r, c);
            const bool take_a = (n.op == Op::kMin2) ? (x <= y) : (x >= y);
            if (take_a)
              ga.at(r, c) += g.at(r, c);
            else if (vb.is_scalar())
              gb.data[0] += g.at(r, c);
            else
              gb.at(r, c) += g.at(r, c);
          }
        break;
      }
      case Op::kNeg:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] -= g.data[i];
        break;
      case Op::kScalarMul:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += n.c * g.data[i];
        break;
      case Op::kMatMul: {
        const Tensor& vb = nodes_[n.b].value;
        Tensor& gb = grads_[n.b];
        // dA += G B^T, dB += A^T G
        for (int r = 0; r < va.rows; ++r)
          for (int k = 0; k < va.cols; ++k) {
            double s = 0.0;
            for (int c = 0; c < vb.cols; ++c) s += g.at(r, c) * vb.at(k, c);
            ga.at(r, k) += s;
          }
        for (int k = 0; k < vb.rows; ++k)
          for (int c = 0; c < vb.cols; ++c) {
            double s = 0.0;
            for (int r = 0; r < va.rows; ++r) s += va.at(r, k) * g.at(r, c);
            gb.at(k, c) += s;
          }
        break;
      }
      case Op::kRowSum:
        for (int r = 0; r < va.rows; ++r)
          for (int c = 0; c < va.cols; ++c) ga.at(r, c) += g.at(r, 0);
        break;
      case Op::kSumAll:
        for (auto& v : ga.data) v += g.data[0];
        break;
      case Op::kMeanAll: {
        const double scale = g.data[0] / static_cast<double>(va.numel());
        for (auto& v : ga.data) v += scale;
        break;
      }
      case Op::kAddPool:
        for (int r = 0; r < va.rows; ++r)
          for (int c = 0; c < va.cols; ++c) ga.at(r, c) += g.at(0, c);
        break;
      case Op::kSortPool:
        for (int s = 0; s < n.i0; ++s)
          for (int c = 0; c < va.cols; ++c) ga.at(n.order[s], c) += g.at(0, s * va.cols + c);
        break;
      case Op::kSizeNorm:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += n.c * g.data[i];
        break;
      case Op::kSliceRows:
        for (int r = n.i0; r < n.i1; ++r)
          for (int c = 0; c < va.cols; ++c) ga.at(r, c) += g.at(r - n.i0, c);
        break;
      case Op::kRowNormalize:
        for (int r = 0; r < va.rows; ++r) {
          double sq = 0.0;
          for (int c = 0; c < va.cols; ++c) sq += va.at(r, c) * va.at(r, c);
          const double norm = std::sqrt(sq);
          if (norm == 0.0) continue;
          double dot = 0.0;
          for (int c = 0; c < va.cols; ++c) dot += g.at(r, c) * n.value.at(r, c);
          for (int c = 0; c < va.cols; ++c)
            ga.at(r, c) += (g.at(r, c) - dot * n.value.at(r, c)) / norm;
        }
        break;
      case Op::kGelu:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * gelu_bwd(va.data[i]);
        break;
      case Op::kTanh:
        for (size_t i = 0; i < g.data.size(); ++i) {
          const double t = n.value.data[i];
          ga.data[i] += g.data[i] * (1.0 - t * t);
        }
        break;
      case Op::kSoftplus:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * sigmoid(va.data[i]);
        break;
      case Op::kRelu:
        for (size_t i = 0; i < g.data.size(); ++i)
          if (va.data[i] > 0) ga.data[i] += g.data[i];
        break;
      case Op::kExp:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * n.value.data[i];
        break;
      case Op::kLog:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / va.data[i];
        break;
      case Op::kSquare:
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * 2.0 * va.data[i];
        break;
      case Op::kHuberMean: {
        const double scale = g.data[0] / static_cast<double>(va.numel());
        for (size_t i = 0; i < va.data.size(); ++i) ga.data[i] += scale * huber_slope(va.data[i]);
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
}

}  // namespace relayopt::nn
