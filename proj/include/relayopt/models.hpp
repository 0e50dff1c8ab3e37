#pragma once
#include <string>
#include <utility>
#include <vector>

#include "relayopt/channel.hpp"
#include "relayopt/nn.hpp"

namespace relayopt::models {

using nn::Tape;
using nn::Tensor;

// Node features: column 0 flags the two endpoints, columns 1-2 are the
// coordinates.
Tensor build_features(const Deployment& dep);
Tensor adjacency_tensor(const channel::ChannelParams& p, const Deployment& dep);

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

// Forward pass bookkeeping: output node plus the leaf ids gradients are read
// from. param_ids is index-aligned with the model's parameters().
struct ForwardIds {
  int output = -1;
  int x = -1;
  int a = -1;
  std::vector<int> param_ids;
};

// Shared surface for the scalar graph regressors (max-flow learners); the
// gradient-ascent optimizer only needs this much.
class GraphScalarModel {
 public:
  virtual ~GraphScalarModel() = default;
  virtual ForwardIds forward(Tape& tape, const Tensor& x, const Tensor& a) const = 0;
  virtual std::vector<NamedParam> parameters() = 0;
  virtual std::vector<NamedParam> parameters() const = 0;
  virtual std::string arch() const = 0;
};

// Scalar max-flow regressor: GraphConv(3,32) x3 with GELU, global add pool,
// Linear(32,32), GELU, Linear(32,1).
class MflModel : public GraphScalarModel {
 public:
  explicit MflModel(std::uint64_t seed = 0);
  ForwardIds forward(Tape& tape, const Tensor& x, const Tensor& a) const override;
  std::vector<NamedParam> parameters() override;
  std::vector<NamedParam> parameters() const override;
  std::string arch() const override { return "mfl"; }

  Tensor conv1_w1, conv1_w2, conv2_w1, conv2_w2, conv3_w1, conv3_w2;
  Tensor lin1_w, lin1_b, lin2_w, lin2_b;
};

// Per-relay direction regressor: GraphConv(3,32) x3 with GELU,
// Linear(32,32), GELU, Linear(32,2); relay rows extracted, endpoints dropped.
// Output rows are normalized downstream of the model.
class GlModel {
 public:
  explicit GlModel(std::uint64_t seed = 0);
  // output shape (n-2) x 2, raw rows.
  ForwardIds forward(Tape& tape, const Tensor& x, const Tensor& a) const;
  std::vector<NamedParam> parameters();
  std::vector<NamedParam> parameters() const;
  std::string arch() const { return "gl"; }

  Tensor conv1_w1, conv1_w2, conv2_w1, conv2_w2, conv3_w1, conv3_w2;
  Tensor lin1_w, lin1_b, lin2_w, lin2_b;
};

// Policy network: GraphConv(3,32), GELU, GraphConv(32,32), GELU, sort pool
// (k=4, 128 features), then a tanh mean head and a softplus std head, each
// Linear(128, 2*(n-2)).
class ActorModel {
 public:
  explicit ActorModel(std::uint64_t seed = 0, int relay_count = 4);

  struct Ids {
    int mean = -1;
    int std = -1;
    int x = -1;
    int a = -1;
    std::vector<int> param_ids;
  };
  Ids forward(Tape& tape, const Tensor& x, const Tensor& a) const;
  std::vector<NamedParam> parameters();
  std::vector<NamedParam> parameters() const;
  std::string arch() const { return "actor"; }
  int action_dim() const { return mean_w.cols; }

  static constexpr int kSortPoolK = 4;

  Tensor conv1_w1, conv1_w2, conv2_w1, conv2_w2;
  Tensor mean_w, mean_b, std_w, std_b;
};

// Value network: GraphConv(3,32), GELU, GraphConv(32,32), GELU, global add
// pool, Linear(32,1).
class CriticModel {
 public:
  explicit CriticModel(std::uint64_t seed = 0);
  ForwardIds forward(Tape& tape, const Tensor& x, const Tensor& a) const;
  std::vector<NamedParam> parameters();
  std::vector<NamedParam> parameters() const;
  std::string arch() const { return "critic"; }

  Tensor conv1_w1, conv1_w2, conv2_w1, conv2_w2;
  Tensor lin_w, lin_b;
};

// Small regressor for the synthetic function-fitting check: GraphConv(2,32)
// x3, each followed by GELU and per-graph size normalization, add pool,
// Linear(32,32), GELU, Linear(32,1).
class SynthModel : public GraphScalarModel {
 public:
  explicit SynthModel(std::uint64_t seed = 0);
  ForwardIds forward(Tape& tape, const Tensor& x, const Tensor& a) const override;
  std::vector<NamedParam> parameters() override;
  std::vector<NamedParam> parameters() const override;
  std::string arch() const override { return "synth"; }

  Tensor conv1_w1, conv1_w2, conv2_w1, conv2_w2, conv3_w1, conv3_w2;
  Tensor lin1_w, lin1_b, lin2_w, lin2_b;
};

// Convenience evaluations on fresh tapes.
double mfl_value(const GraphScalarModel& m, const Tensor& x, const Tensor& a);
Tensor gl_rows(const GlModel& m, const Tensor& x, const Tensor& a);
std::pair<Tensor, Tensor> actor_value(const ActorModel& m, const Tensor& x, const Tensor& a);
double critic_value(const CriticModel& m, const Tensor& x, const Tensor& a);

// Text checkpoint: header with architecture name, then one parameter per
// record with name, shape, and values at 17 significant digits (bit-exact
// round trip for doubles).
void save_checkpoint(const std::string& path, const std::string& arch,
                     const std::vector<NamedParam>& params);
struct Checkpoint {
  std::string arch;
  std::vector<std::pair<std::string, Tensor>> params;
};
Checkpoint load_checkpoint(const std::string& path);
// Copies checkpoint tensors into the model; arch and shapes must match.
void restore(const Checkpoint& ck, const std::string& arch, std::vector<NamedParam> params);

template <typename ModelT>
ModelT load_model(const std::string& path) {
  ModelT model;
  restore(load_checkpoint(path), model.arch(), model.parameters());
  return model;
}

}  // namespace relayopt::models
