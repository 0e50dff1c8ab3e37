#pragma once
#include <string>
#include <utility>
#include <vector>

#include "relayopt/tape.hpp"

namespace relayopt::nn {

// Message passing with a root transform and an edge-weighted neighbor sum:
// X' = X W1 + (A X) W2. Differentiable w.r.t. all four inputs.
int graph_conv(Tape& tape, int x, int a, int w1, int w2);

// First-order variant with a single shared weight: X' = X W + (A X) W.
int graph_conv_first_order(Tape& tape, int x, int a, int w);

// x W + b with b broadcast over rows.
int linear(Tape& tape, int x, int w, int b);

// Scalar losses.
int mse(Tape& tape, int pred, int target);            // mean of squared differences
int frobenius_mse(Tape& tape, int y, int y_ref);      // sum of squared differences
inline int huber(Tape& tape, int x) { return tape.huber_mean(x); }

// Exact reverse-mode gradients of a scalar output at the designated input
// leaves; runs backward on the tape.
std::pair<Tensor, Tensor> grad_wrt_inputs(Tape& tape, int output, int x_leaf, int a_leaf);

// Uniform +-1/sqrt(fan_in) initialization.
Tensor init_weight(int fan_in, int fan_out, std::mt19937_64& rng);
Tensor init_bias(int fan_in, int fan_out, std::mt19937_64& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction; moments are shaped like the parameters.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // params and grads must be index-aligned across calls.
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Grad buffer for minibatch accumulation over per-sample tapes.
class GradAccumulator {
 public:
  void add(const std::vector<Tensor*>& params, const Tape& tape, const std::vector<int>& param_ids);
  std::vector<Tensor> mean() const;
  int count() const { return count_; }
  void reset() {
    sums_.clear();
    count_ = 0;
  }

 private:
  std::vector<Tensor> sums_;
  int count_ = 0;
};

}  // namespace relayopt::nn
