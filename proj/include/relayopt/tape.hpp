#pragma once
#include <vector>

#include "relayopt/tensor.hpp"

namespace relayopt::nn {

// Reverse-mode autodiff over dense tensors. Forward values are computed
// eagerly as nodes are pushed; backward() walks the record once in reverse
// and accumulates exact vector-Jacobian products, additively over fan-out.
class Tape {
 public:
  enum class Op : std::uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kScalarMul,
    kMatMul,
    kRowSum,
    kSumAll,
    kMeanAll,
    kGelu,
    kTanh,
    kSoftplus,
    kRelu,
    kExp,
    kLog,
    kSquare,
    kAddPool,
    kSortPool,
    kSizeNorm,
    kSliceRows,
    kRowNormalize,
    kMin2,
    kMax2,
    kHuberMean,
  };

  int leaf(Tensor v);
  int constant(double v) { return leaf(Tensor::scalar(v)); }

  // Elementwise; b may also be a 1 x cols row (bias) or a 1x1 scalar.
  int add(int a, int b);
  int sub(int a, int b);
  // Elementwise; b may also be a 1x1 scalar.
  int mul(int a, int b);
  int div(int a, int b);
  int neg(int a);
  int scalar_mul(int a, double c);
  int matmul(int a, int b);

  int row_sum(int a);          // n x d -> n x 1
  int sum_all(int a);          // -> 1 x 1
  int mean_all(int a);         // -> 1 x 1
  int global_add_pool(int a);  // n x d -> 1 x d (column sums)
  // Rows ordered descending by the last channel, ties broken lexicographically
  // over the remaining channels; top k rows concatenated into 1 x (k*d).
  int global_sort_pool(int a, int k);
  int graph_size_norm(int a);  // divide all entries by sqrt(row count)
  int slice_rows(int a, int r0, int r1);  // rows [r0, r1)
  // Each row divided by its Euclidean norm; zero rows stay zero.
  int row_normalize(int a);

  int gelu(int a);
  int tanh(int a);
  int softplus(int a);
  int relu(int a);
  int exp(int a);
  int log(int a);
  int square(int a);

  int min2(int a, int b);  // elementwise min, ties route gradient to a
  int max2(int a, int b);

  // mean over entries of H(x), H(x) = 0.5 x^2 for |x| < 1 else |x| - 0.5.
  int huber_mean(int a);

  const Tensor& value(int id) const { return nodes_[id].value; }
  int size() const { return static_cast<int>(nodes_.size()); }
  void clear();

  // Seeds d(out)/d(out) = 1 and accumulates gradients for every node.
  // out must be scalar.
  void backward(int out);
  const Tensor& grad(int id) const;

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c = 0.0;
    int i0 = 0, i1 = 0;        // slice bounds / sort k
    std::vector<int> order;    // sort permutation
    Tensor value;
  };

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }
  int binary_elementwise(Op op, int a, int b, bool allow_row_broadcast);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool has_grads_ = false;
};

}  // namespace relayopt::nn
