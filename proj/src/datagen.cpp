#include "relayopt/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relayopt/flow.hpp"
#include "relayopt/io.hpp"
#include "relayopt/optimize.hpp"
#include "relayopt/spectral.hpp"

namespace relayopt::datagen {

void PpoConfig::validate() const {
  if (!(gamma >= 0) || !(tau > 0) || segment_steps <= 0 || phi <= 0 || epochs <= 0 ||
      inner_epochs <= 0 || batch <= 0 || !(actor_lr > 0) || !(critic_lr > 0) || !(zeta > 0))
    throw InputError("bad PPO configuration value");
}

Deployment PpoEnv::apply(const Deployment& dep, const Tensor& action) const {
  if (action.rows != 1 || action.cols != 2 * (dep.n() - 2))
    throw ShapeError("action does not match relay count");
  Deployment next = dep;
  for (int relay = 1; relay < dep.n() - 1; ++relay) {
    Vec2 v{action.at(0, 2 * (relay - 1)), action.at(0, 2 * (relay - 1) + 1)};
    const double norm = v.norm();
    if (norm == 0.0) continue;
    next.positions[relay] = optimize::clamp_to_arena(
        next.positions[relay] + v * (zeta_ / norm), halfwidth_);
  }
  return next;
}

double PpoEnv::max_flow_of(const Deployment& dep) const {
  return flow::max_flow(channel::adjacency(params_, dep), dep.source(), dep.dest()).value;
}

double gaussian_log_density(const Tensor& mean, const Tensor& stddev, const Tensor& action) {
  if (!mean.same_shape(stddev) || !mean.same_shape(action)) throw ShapeError("density shape mismatch");
  static const double kLog2Pi = std::log(2.0 * std::numbers::pi);
  double logp = 0.0;
  for (size_t i = 0; i < mean.data.size(); ++i) {
    const double z = (action.data[i] - mean.data[i]) / stddev.data[i];
    logp += -0.5 * kLog2Pi - std::log(stddev.data[i]) - 0.5 * z * z;
  }
  return logp;
}

namespace {

struct ActorSample {
  Tensor mean, stddev;
};

ActorSample actor_eval(const ActorModel& actor, const Tensor& x, const Tensor& a) {
  auto [mean, stddev] = models::actor_value(actor, x, a);
  if (!mean.all_finite() || !stddev.all_finite()) throw NumericError("non-finite actor output");
  for (double s : stddev.data)
    if (!(s > 0)) throw NumericError("actor std collapsed to zero");
  return {std::move(mean), std::move(stddev)};
}

}  // namespace

std::vector<BufferEntry> ppo_rollout_epoch(const ActorModel& actor, const CriticModel& critic,
                                           PpoEnv& env, const PpoConfig& cfg,
                                           std::mt19937_64& rng) {
  cfg.validate();
  const int total = cfg.timeslots();
  std::vector<BufferEntry> buffer;
  buffer.reserve(total);
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  Deployment cur = env.reset();
  for (int t = 1; t <= total; ++t) {
    BufferEntry e;
    e.x = models::build_features(cur);
    e.a = models::adjacency_tensor(env.params(), cur);
    const ActorSample pol = actor_eval(actor, e.x, e.a);
    e.action = Tensor(1, pol.mean.cols);
    for (int c = 0; c < pol.mean.cols; ++c)
      e.action.at(0, c) = pol.mean.at(0, c) + pol.stddev.at(0, c) * unit_normal(rng);
    e.log_density = gaussian_log_density(pol.mean, pol.stddev, e.action);

    const Deployment next = env.apply(cur, e.action);
    e.x_next = models::build_features(next);
    e.a_next = models::adjacency_tensor(env.params(), next);
    e.reward = env.max_flow_of(next) - env.max_flow_of(cur);
    buffer.push_back(std::move(e));

    cur = (t % cfg.segment_steps == 0) ? env.reset() : next;
  }

  for (BufferEntry& e : buffer) {
    const double v_s = models::critic_value(critic, e.x, e.a);
    const double v_next = models::critic_value(critic, e.x_next, e.a_next);
    e.target = e.reward + cfg.gamma * v_next;
    e.advantage = e.target - v_s;
  }
  return buffer;
}

std::vector<double> density_ratios(const ActorModel& actor, const std::vector<BufferEntry>& buffer) {
  std::vector<double> out;
  out.reserve(buffer.size());
  for (const BufferEntry& e : buffer) {
    const ActorSample pol = actor_eval(actor, e.x, e.a);
    out.push_back(std::exp(gaussian_log_density(pol.mean, pol.stddev, e.action) - e.log_density));
  }
  return out;
}

double surrogate_objective(double log_ratio, double advantage, double tau) {
  const double rho = std::exp(std::clamp(log_ratio, -20.0, 20.0));
  const double clipped = advantage > 0 ? std::min(rho, 1.0 + tau) * advantage
                                       : std::max(rho, 1.0 - tau) * advantage;
  return std::min(rho * advantage, clipped);
}

namespace {

// Clipped-surrogate objective for one entry; returns the node to maximize.
int actor_objective(nn::Tape& tape, const ActorModel::Ids& ids, const BufferEntry& e,
                    const PpoConfig& cfg) {
  static const double kLog2Pi = std::log(2.0 * std::numbers::pi);
  const int action = tape.leaf(e.action);
  const int z = tape.div(tape.sub(action, ids.mean), ids.std);
  const int quad = tape.scalar_mul(tape.sum_all(tape.square(z)), -0.5);
  const int logs = tape.neg(tape.sum_all(tape.log(ids.std)));
  const int norm_const = tape.constant(-0.5 * kLog2Pi * e.action.cols);
  const int logp_new = tape.add(tape.add(quad, logs), norm_const);

  // Log-ratio clamped before exponentiation; outside-clip values saturate anyway.
  int log_ratio = tape.sub(logp_new, tape.constant(e.log_density));
  log_ratio = tape.max2(tape.min2(log_ratio, tape.constant(20.0)), tape.constant(-20.0));
  const int rho = tape.exp(log_ratio);

  const int surrogate = tape.scalar_mul(rho, e.advantage);
  int clipped;
  if (e.advantage > 0) {
    clipped = tape.scalar_mul(tape.min2(rho, tape.constant(1.0 + cfg.tau)), e.advantage);
  } else {
    clipped = tape.scalar_mul(tape.max2(rho, tape.constant(1.0 - cfg.tau)), e.advantage);
  }
  return tape.min2(surrogate, clipped);
}

}  // namespace

void ppo_update(ActorModel& actor, CriticModel& critic, const std::vector<BufferEntry>& buffer,
                const PpoConfig& cfg, nn::Adam& actor_opt, nn::Adam& critic_opt) {
  cfg.validate();
  if (buffer.empty()) throw InputError("empty buffer");
  const auto actor_params = actor.parameters();
  const auto critic_params = critic.parameters();
  std::vector<Tensor*> actor_tensors, critic_tensors;
  for (const auto& p : actor_params) actor_tensors.push_back(p.tensor);
  for (const auto& p : critic_params) critic_tensors.push_back(p.tensor);

  for (int sweep = 0; sweep < cfg.inner_epochs; ++sweep) {
    for (size_t start = 0; start < buffer.size(); start += cfg.batch) {
      const size_t end = std::min(buffer.size(), start + cfg.batch);
      nn::GradAccumulator actor_acc, critic_acc;
      for (size_t i = start; i < end; ++i) {
        const BufferEntry& e = buffer[i];
        {
          nn::Tape tape;
          const auto ids = actor.forward(tape, e.x, e.a);
          const int loss = tape.neg(actor_objective(tape, ids, e, cfg));
          if (!std::isfinite(tape.value(loss).value()))
            throw NumericError("non-finite actor loss at buffer index " + std::to_string(i));
          tape.backward(loss);
          actor_acc.add(actor_tensors, tape, ids.param_ids);
        }
        {
          nn::Tape tape;
          const auto ids = critic.forward(tape, e.x, e.a);
          const int loss = tape.huber_mean(tape.sub(ids.output, tape.constant(e.target)));
          if (!std::isfinite(tape.value(loss).value()))
            throw NumericError("non-finite critic loss at buffer index " + std::to_string(i));
          tape.backward(loss);
          critic_acc.add(critic_tensors, tape, ids.param_ids);
        }
      }
      actor_opt.step(actor_tensors, actor_acc.mean());
      critic_opt.step(critic_tensors, critic_acc.mean());
    }
  }
}

PpoTrainResult train_ppo(ActorModel& actor, CriticModel& critic, PpoEnv& env, const PpoConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x70706fULL));
  nn::Adam actor_opt({.learning_rate = cfg.actor_lr});
  nn::Adam critic_opt({.learning_rate = cfg.critic_lr});

  PpoTrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto buffer = ppo_rollout_epoch(actor, critic, env, cfg, rng);
    double total = 0.0;
    for (const auto& e : buffer) total += e.reward;
    result.epoch_rewards.push_back(total / buffer.size());
    ppo_update(actor, critic, buffer, cfg, actor_opt, critic_opt);

    const int w = cfg.convergence_window;
    if (static_cast<int>(result.epoch_rewards.size()) >= 2 * w) {
      const auto& r = result.epoch_rewards;
      double recent = 0.0, prior = 0.0;
      for (int i = 0; i < w; ++i) {
        recent += r[r.size() - 1 - i];
        prior += r[r.size() - 1 - w - i];
      }
      recent /= w;
      prior /= w;
      if (std::abs(recent - prior) < cfg.convergence_tol * std::max(std::abs(prior), 1e-12)) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dataset generation

Strategy strategy_from_name(const std::string& name) {
  if (name == "rlgp") return Strategy::kRlgp;
  if (name == "rw") return Strategy::kRw;
  if (name == "wcc") return Strategy::kWcc;
  throw InputError("unknown dataset strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kRlgp: return "rlgp";
    case Strategy::kRw: return "rw";
    case Strategy::kWcc: return "wcc";
  }
  return "?";
}

namespace {

// Unit direction per relay for the step leaving dep; zero rows mean the relay
// stays put.
Mat step_directions(Strategy strategy, const Deployment& dep, const DatagenConfig& cfg,
                    const ActorModel* actor, std::mt19937_64& rng) {
  const int relays = dep.n() - 2;
  Mat dirs(relays, 2);
  switch (strategy) {
    case Strategy::kRw: {
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      for (int r = 0; r < relays; ++r) {
        const double th = angle(rng);
        dirs.at(r, 0) = std::cos(th);
        dirs.at(r, 1) = std::sin(th);
      }
      break;
    }
    case Strategy::kWcc: {
      const auto lg = spectral::lambda2_grad(cfg.params, dep, spectral::endpoint_weights(dep.n()));
      for (int r = 0; r < relays; ++r) {
        Vec2 g{lg.grad.at(r, 0), lg.grad.at(r, 1)};
        const double norm = g.norm();
        if (norm == 0.0) continue;
        dirs.at(r, 0) = g.x / norm;
        dirs.at(r, 1) = g.y / norm;
      }
      break;
    }
    case Strategy::kRlgp: {
      if (!actor) throw InputError("policy strategy needs a trained actor");
      const Tensor x = models::build_features(dep);
      const Tensor a = models::adjacency_tensor(cfg.params, dep);
      auto [mean, stddev] = models::actor_value(*actor, x, a);
      std::normal_distribution<double> unit_normal(0.0, 1.0);
      for (int r = 0; r < relays; ++r) {
        Vec2 v{mean.at(0, 2 * r) + stddev.at(0, 2 * r) * unit_normal(rng),
               mean.at(0, 2 * r + 1) + stddev.at(0, 2 * r + 1) * unit_normal(rng)};
        const double norm = v.norm();
        if (norm == 0.0) continue;
        dirs.at(r, 0) = v.x / norm;
        dirs.at(r, 1) = v.y / norm;
      }
      break;
    }
  }
  return dirs;
}

}  // namespace

std::vector<TrajectorySample> generate_trajectory(Strategy strategy, const Deployment& dep0,
                                                  int dep_id, const DatagenConfig& cfg,
                                                  const ActorModel* actor) {
  std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(dep_id)));
  std::vector<TrajectorySample> samples;
  Deployment cur = dep0;

  for (int t = 0; t <= cfg.steps; ++t) {
    const bool snapshot = (t % cfg.snapshot_interval == 0);
    Mat dirs(dep0.n() - 2, 2);
    if (t < cfg.steps) dirs = step_directions(strategy, cur, cfg, actor, rng);

    if (snapshot) {
      TrajectorySample s;
      s.deployment_id = dep_id;
      s.step = t;
      s.dep = cur;
      s.label = flow::max_flow(channel::adjacency(cfg.params, cur), cur.source(), cur.dest()).value;
      s.directions = dirs;
      s.valid_direction = (t < cfg.steps);
      samples.push_back(std::move(s));
    }
    if (t < cfg.steps) {
      Deployment next = cur;
      for (int relay = 1; relay < cur.n() - 1; ++relay) {
        Vec2 u{dirs.at(relay - 1, 0), dirs.at(relay - 1, 1)};
        if (u.norm() == 0.0) continue;
        next.positions[relay] = optimize::clamp_to_arena(
            next.positions[relay] + u * cfg.zeta, cfg.arena_halfwidth);
      }
      cur = next;
      for (const auto& pos : cur.positions)
        if (!std::isfinite(pos.x) || !std::isfinite(pos.y))
          throw NumericError("non-finite position in trajectory " + std::to_string(dep_id));
    }
  }
  return samples;
}

void generate_dataset(Strategy strategy, const std::vector<Deployment>& deployments,
                      const DatagenConfig& cfg, const ActorModel* actor,
                      const std::string& out_path, int first_id, bool append) {
  io::DatasetWriter writer(out_path, append);
  for (size_t i = 0; i < deployments.size(); ++i) {
    const int dep_id = first_id + static_cast<int>(i);
    const auto samples = generate_trajectory(strategy, deployments[i], dep_id, cfg, actor);
    for (const auto& s : samples) writer.append(s);
  }
}

}  // namespace relayopt::datagen
