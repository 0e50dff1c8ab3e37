#include "relayopt/models.hpp"

#include <cstdio>
#include <fstream>

namespace relayopt::models {

using nn::init_bias;
using nn::init_weight;

Tensor build_features(const Deployment& dep) {
  dep.validate();
  const int n = dep.n();
  Tensor x(n, 3);
  for (int i = 0; i < n; ++i) {
    x.at(i, 0) = (i == dep.source() || i == dep.dest()) ? 1.0 : 0.0;
    x.at(i, 1) = dep.positions[i].x;
    x.at(i, 2) = dep.positions[i].y;
  }
  return x;
}

Tensor adjacency_tensor(const channel::ChannelParams& p, const Deployment& dep) {
  return Tensor::from_mat(channel::adjacency(p, dep));
}

namespace {

void check_features(const Tensor& x, const Tensor& a, int feature_dim) {
  if (x.cols != feature_dim) throw ShapeError("unexpected feature width");
  if (a.rows != a.cols || a.rows != x.rows) throw ShapeError("adjacency does not match features");
}

}  // namespace

// ---------------------------------------------------------------------------
// MFL

MflModel::MflModel(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x6d666cULL));
  conv1_w1 = init_weight(3, 32, rng);
  conv1_w2 = init_weight(3, 32, rng);
  conv2_w1 = init_weight(32, 32, rng);
  conv2_w2 = init_weight(32, 32, rng);
  conv3_w1 = init_weight(32, 32, rng);
  conv3_w2 = init_weight(32, 32, rng);
  lin1_w = init_weight(32, 32, rng);
  lin1_b = init_bias(32, 32, rng);
  lin2_w = init_weight(32, 1, rng);
  lin2_b = init_bias(32, 1, rng);
}

ForwardIds MflModel::forward(Tape& tape, const Tensor& x, const Tensor& a) const {
  check_features(x, a, 3);
  ForwardIds ids;
  ids.x = tape.leaf(x);
  ids.a = tape.leaf(a);
  for (const auto& p : parameters()) ids.param_ids.push_back(tape.leaf(*p.tensor));
  const auto& pid = ids.param_ids;
  int h = tape.gelu(nn::graph_conv(tape, ids.x, ids.a, pid[0], pid[1]));
  h = tape.gelu(nn::graph_conv(tape, h, ids.a, pid[2], pid[3]));
  h = tape.gelu(nn::graph_conv(tape, h, ids.a, pid[4], pid[5]));
  h = tape.global_add_pool(h);
  h = tape.gelu(nn::linear(tape, h, pid[6], pid[7]));
  ids.output = nn::linear(tape, h, pid[8], pid[9]);
  return ids;
}

std::vector<NamedParam> MflModel::parameters() {
  return {{"conv1_w1", &conv1_w1}, {"conv1_w2", &conv1_w2}, {"conv2_w1", &conv2_w1},
          {"conv2_w2", &conv2_w2}, {"conv3_w1", &conv3_w1}, {"conv3_w2", &conv3_w2},
          {"lin1_w", &lin1_w},     {"lin1_b", &lin1_b},     {"lin2_w", &lin2_w},
          {"lin2_b", &lin2_b}};
}
std::vector<NamedParam> MflModel::parameters() const {
  return const_cast<MflModel*>(this)->parameters();
}

// ---------------------------------------------------------------------------
// GL

GlModel::GlModel(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x676cULL));
  conv1_w1 = init_weight(3, 32, rng);
  conv1_w2 = init_weight(3, 32, rng);
  conv2_w1 = init_weight(32, 32, rng);
  conv2_w2 = init_weight(32, 32, rng);
  conv3_w1 = init_weight(32, 32, rng);
  conv3_w2 = init_weight(32, 32, rng);
  lin1_w = init_weight(32, 32, rng);
  lin1_b = init_bias(32, 32, rng);
  lin2_w = init_weight(32, 2, rng);
  lin2_b = init_bias(32, 2, rng);
}

ForwardIds GlModel::forward(Tape& tape, const Tensor& x, const Tensor& a) const {
  check_features(x, a, 3);
  if (x.rows < 3) throw ShapeError("direction regression needs at least one relay");
  ForwardIds ids;
  ids.x = tape.leaf(x);
  ids.a = tape.leaf(a);
  for (const auto& p : parameters()) ids.param_ids.push_back(tape.leaf(*p.tensor));
  const auto& pid = ids.param_ids;
  int h = tape.gelu(nn::graph_conv(tape, ids.x, ids.a, pid[0], pid[1]));
  h = tape.gelu(nn::graph_conv(tape, h, ids.a, pid[2], pid[3]));
  h = tape.gelu(nn::graph_conv(tape, h, ids.a, pid[4], pid[5]));
  h = tape.gelu(nn::linear(tape, h, pid[6], pid[7]));
  h = nn::linear(tape, h, pid[8], pid[9]);
  ids.output = tape.slice_rows(h, 1, x.rows - 1);  // relay rows only
  return ids;
}

std::vector<NamedParam> GlModel::parameters() {
  return {{"conv1_w1", &conv1_w1}, {"conv1_w2", &conv1_w2}, {"conv2_w1", &conv2_w1},
          {"conv2_w2", &conv2_w2}, {"conv3_w1", &conv3_w1}, {"conv3_w2", &conv3_w2},
          {"lin1_w", &lin1_w},     {"lin1_b", &lin1_b},     {"lin2_w", &lin2_w},
          {"lin2_b", &lin2_b}};
}
std::vector<NamedParam> GlModel::parameters() const {
  return const_cast<GlModel*>(this)->parameters();
}

// ---------------------------------------------------------------------------
// Actor

ActorModel::ActorModel(std::uint64_t seed, int relay_count) {
  std::mt19937_64 rng(mix_seed(seed, 0x6163746fULL));
  const int pooled = 32 * kSortPoolK;
  const int out = 2 * relay_count;
  conv1_w1 = init_weight(3, 32, rng);
  conv1_w2 = init_weight(3, 32, rng);
  conv2_w1 = init_weight(32, 32, rng);
  conv2_w2 = init_weight(32, 32, rng);
  mean_w = init_weight(pooled, out, rng);
  mean_b = init_bias(pooled, out, rng);
  std_w = init_weight(pooled, out, rng);
  std_b = init_bias(pooled, out, rng);
}

ActorModel::Ids ActorModel::forward(Tape& tape, const Tensor& x, const Tensor& a) const {
  check_features(x, a, 3);
  Ids ids;
  ids.x = tape.leaf(x);
  ids.a = tape.leaf(a);
  for (const auto& p : parameters()) ids.param_ids.push_back(tape.leaf(*p.tensor));
  const auto& pid = ids.param_ids;
  int h = tape.gelu(nn::graph_conv(tape, ids.x, ids.a, pid[0], pid[1]));
  h = tape.gelu(nn::graph_conv(tape, h, ids.a, pid[2], pid[3]));
  h = tape.global_sort_pool(h, kSortPoolK);
  ids.mean = tape.tanh(nn::linear(tape, h, pid[4], pid[5]));
  ids.std = tape.softplus(nn::linear(tape, h, pid[6], pid[7]));
  return ids;
}

std::vector<NamedParam> ActorModel::parameters() {
  return {{"conv1_w1", &conv1_w1}, {"conv1_w2", &conv1_w2}, {"conv2_w1", &conv2_w1},
          {"conv2_w2", &conv2_w2}, {"mean_w", &mean_w},     {"mean_b", &mean_b},
          {"std_w", &std_w},       {"std_b", &std_b}};
}
std::vector<NamedParam> ActorModel::parameters() const {
  return const_cast<ActorModel*>(this)->parameters();
}

// ---------------------------------------------------------------------------
// Critic

CriticModel::CriticModel(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x637269ULL));
  conv1_w1 = init_weight(3, 32, rng);
  conv1_w2 = init_weight(3, 32, rng);
  conv2_w1 = init_weight(32, 32, rng);
  conv2_w2 = init_weight(32, 32, rng);
  lin_w = init_weight(32, 1, rng);
  lin_b = init_bias(32, 1, rng);
}

ForwardIds CriticModel::forward(Tape& tape, const Tensor& x, const Tensor& a) const {
  check_features(x, a, 3);
  ForwardIds ids;
  ids.x = tape.leaf(x);
  ids.a = tape.leaf(a);
  for (const auto& p : parameters()) ids.param_ids.push_back(tape.leaf(*p.tensor));
  const auto& pid = ids.param_ids;
  int h = tape.gelu(nn::graph_conv(tape, ids.x, ids.a, pid[0], pid[1]));
  h = tape.gelu(nn::graph_conv(tape, h, ids.a, pid[2], pid[3]));
  h = tape.global_add_pool(h);
  ids.output = nn::linear(tape, h, pid[4], pid[5]);
  return ids;
}

std::vector<NamedParam> CriticModel::parameters() {
  return {{"conv1_w1", &conv1_w1}, {"conv1_w2", &conv1_w2}, {"conv2_w1", &conv2_w1},
          {"conv2_w2", &conv2_w2}, {"lin_w", &lin_w},       {"lin_b", &lin_b}};
}
std::vector<NamedParam> CriticModel::parameters() const {
  return const_cast<CriticModel*>(this)->parameters();
}

// ---------------------------------------------------------------------------
// Synthetic-check regressor

SynthModel::SynthModel(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x73796eULL));
  conv1_w1 = init_weight(2, 32, rng);
  conv1_w2 = init_weight(2, 32, rng);
  conv2_w1 = init_weight(32, 32, rng);
  conv2_w2 = init_weight(32, 32, rng);
  conv3_w1 = init_weight(32, 32, rng);
  conv3_w2 = init_weight(32, 32, rng);
  lin1_w = init_weight(32, 32, rng);
  lin1_b = init_bias(32, 32, rng);
  lin2_w = init_weight(32, 1, rng);
  lin2_b = init_bias(32, 1, rng);
}

ForwardIds SynthModel::forward(Tape& tape, const Tensor& x, const Tensor& a) const {
  check_features(x, a, 2);
  ForwardIds ids;
  ids.x = tape.leaf(x);
  ids.a = tape.leaf(a);
  for (const auto& p : parameters()) ids.param_ids.push_back(tape.leaf(*p.tensor));
  const auto& pid = ids.param_ids;
  int h = tape.graph_size_norm(tape.gelu(nn::graph_conv(tape, ids.x, ids.a, pid[0], pid[1])));
  h = tape.graph_size_norm(tape.gelu(nn::graph_conv(tape, h, ids.a, pid[2], pid[3])));
  h = tape.graph_size_norm(tape.gelu(nn::graph_conv(tape, h, ids.a, pid[4], pid[5])));
  h = tape.global_add_pool(h);
  h = tape.gelu(nn::linear(tape, h, pid[6], pid[7]));
  ids.output = nn::linear(tape, h, pid[8], pid[9]);
  return ids;
}

std::vector<NamedParam> SynthModel::parameters() {
  return {{"conv1_w1", &conv1_w1}, {"conv1_w2", &conv1_w2}, {"conv2_w1", &conv2_w1},
          {"conv2_w2", &conv2_w2}, {"conv3_w1", &conv3_w1}, {"conv3_w2", &conv3_w2},
          {"lin1_w", &lin1_w},     {"lin1_b", &lin1_b},     {"lin2_w", &lin2_w},
          {"lin2_b", &lin2_b}};
}
std::vector<NamedParam> SynthModel::parameters() const {
  return const_cast<SynthModel*>(this)->parameters();
}

// ---------------------------------------------------------------------------
// Convenience evaluations

double mfl_value(const GraphScalarModel& m, const Tensor& x, const Tensor& a) {
  Tape tape;
  return tape.value(m.forward(tape, x, a).output).value();
}

Tensor gl_rows(const GlModel& m, const Tensor& x, const Tensor& a) {
  Tape tape;
  return tape.value(m.forward(tape, x, a).output);
}

std::pair<Tensor, Tensor> actor_value(const ActorModel& m, const Tensor& x, const Tensor& a) {
  Tape tape;
  const auto ids = m.forward(tape, x, a);
  return {tape.value(ids.mean), tape.value(ids.std)};
}

double critic_value(const CriticModel& m, const Tensor& x, const Tensor& a) {
  Tape tape;
  return tape.value(m.forward(tape, x, a).output).value();
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const std::string& arch,
                     const std::vector<NamedParam>& params) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open checkpoint for writing: " + path);
  out << "relayopt-checkpoint 1 " << arch << " " << params.size() << "\n";
  char buf[40];
  for (const auto& p : params) {
    out << p.name << " " << p.tensor->rows << " " << p.tensor->cols << "\n";
    for (size_t i = 0; i < p.tensor->data.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p.tensor->data[i]);
      out << buf << (i + 1 == p.tensor->data.size() ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw InputError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  size_t count = 0;
  Checkpoint ck;
  if (!(in >> magic >> version >> ck.arch >> count) || magic != "relayopt-checkpoint" || version != 1)
    throw ParseError("not a checkpoint file: " + path);
  for (size_t p = 0; p < count; ++p) {
    std::string name;
    int rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols) || rows <= 0 || cols <= 0)
      throw ParseError("truncated checkpoint header: " + path);
    Tensor t(rows, cols);
    for (auto& v : t.data)
      if (!(in >> v)) throw ParseError("truncated checkpoint values: " + path);
    ck.params.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void restore(const Checkpoint& ck, const std::string& arch, std::vector<NamedParam> params) {
  if (ck.arch != arch)
    throw ShapeError("checkpoint architecture '" + ck.arch + "' does not match '" + arch + "'");
  if (ck.params.size() != params.size()) throw ShapeError("checkpoint parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (ck.params[i].first != params[i].name)
      throw ShapeError("checkpoint parameter name mismatch: " + ck.params[i].first);
    if (!ck.params[i].second.same_shape(*params[i].tensor))
      throw ShapeError("checkpoint shape mismatch for " + params[i].name);
    *params[i].tensor = ck.params[i].second;
  }
}

}  // namespace relayopt::models
