#include "relayopt/nn.hpp"

#include <cmath>

namespace relayopt::nn {

int graph_conv(Tape& tape, int x, int a, int w1, int w2) {
  const int root = tape.matmul(x, w1);
  const int messages = tape.matmul(tape.matmul(a, x), w2);
  return tape.add(root, messages);
}

int graph_conv_first_order(Tape& tape, int x, int a, int w) {
  const int root = tape.matmul(x, w);
  const int messages = tape.matmul(tape.matmul(a, x), w);
  return tape.add(root, messages);
}

int linear(Tape& tape, int x, int w, int b) { return tape.add(tape.matmul(x, w), b); }

int mse(Tape& tape, int pred, int target) { return tape.mean_all(tape.square(tape.sub(pred, target))); }

int frobenius_mse(Tape& tape, int y, int y_ref) { return tape.sum_all(tape.square(tape.sub(y, y_ref))); }

std::pair<Tensor, Tensor> grad_wrt_inputs(Tape& tape, int output, int x_leaf, int a_leaf) {
  if (!tape.value(output).is_scalar()) throw ShapeError("gradient output must be scalar");
  tape.backward(output);
  return {tape.grad(x_leaf), tape.grad(a_leaf)};
}

Tensor init_weight(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(fan_in, fan_out, -bound, bound, rng);
}

Tensor init_bias(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(1, fan_out, -bound, bound, rng);
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw ShapeError("params/grads size mismatch");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->rows, p->cols);
      v_.emplace_back(p->rows, p->cols);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("optimizer state does not match parameters");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p];
    const Tensor& g = grads[p];
    if (!param.same_shape(g)) throw ShapeError("gradient shape does not match parameter");
    for (size_t i = 0; i < param.data.size(); ++i) {
      m_[p].data[i] = cfg_.beta1 * m_[p].data[i] + (1.0 - cfg_.beta1) * g.data[i];
      v_[p].data[i] = cfg_.beta2 * v_[p].data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
      const double mhat = m_[p].data[i] / bc1;
      const double vhat = v_[p].data[i] / bc2;
      param.data[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void GradAccumulator::add(const std::vector<Tensor*>& params, const Tape& tape,
                          const std::vector<int>& param_ids) {
  if (params.size() != param_ids.size()) throw ShapeError("params/ids size mismatch");
  if (sums_.empty())
    for (const Tensor* p : params) sums_.emplace_back(p->rows, p->cols);
  for (size_t p = 0; p < params.size(); ++p) {
    const Tensor& g = tape.grad(param_ids[p]);
    for (size_t i = 0; i < sums_[p].data.size(); ++i) sums_[p].data[i] += g.data[i];
  }
  ++count_;
}

std::vector<Tensor> GradAccumulator::mean() const {
  std::vector<Tensor> out = sums_;
  if (count_ == 0) return out;
  for (auto& t : out)
    for (auto& v : t.data) v /= count_;
  return out;
}

}  // namespace relayopt::nn
