#pragma once
#include <random>
#include <string>
#include <vector>

#include "relayopt/models.hpp"

namespace relayopt::datagen {

using models::ActorModel;
using models::CriticModel;
using nn::Tensor;

struct PpoConfig {
  double gamma = 0.9;
  double tau = 0.2;  // clip range
  int segment_steps = 400;  // steps before the state resets
  int phi = 5;              // segments per epoch; T = segment_steps * phi
  int epochs = 1000;        // cap; training stops earlier on reward convergence
  int inner_epochs = 10;    // update sweeps per epoch
  int batch = 100;
  double actor_lr = 4e-4;
  double critic_lr = 1e-4;
  double zeta = 0.02;
  double arena_halfwidth = 6.0;
  std::uint64_t seed = 1;
  // Stop when the 20-epoch reward moving average changes by less than 1%.
  int convergence_window = 20;
  double convergence_tol = 0.01;

  int timeslots() const { return segment_steps * phi; }
  void validate() const;
};

// Exploration environment: cycles through a list of initial deployments at
// segment resets; actions move relays by zeta along their sampled directions.
class PpoEnv {
 public:
  PpoEnv(std::vector<Deployment> initial, channel::ChannelParams params, double zeta,
         double arena_halfwidth)
      : initial_(std::move(initial)), params_(params), zeta_(zeta), halfwidth_(arena_halfwidth) {
    if (initial_.empty()) throw InputError("environment needs at least one deployment");
  }

  const Deployment& reset() { return initial_[next_++ % initial_.size()]; }
  Deployment apply(const Deployment& dep, const Tensor& action) const;
  double max_flow_of(const Deployment& dep) const;
  const channel::ChannelParams& params() const { return params_; }
  void rewind() { next_ = 0; }

 private:
  std::vector<Deployment> initial_;
  channel::ChannelParams params_;
  double zeta_;
  double halfwidth_;
  size_t next_ = 0;
};

struct BufferEntry {
  Tensor x, a;            // state
  Tensor x_next, a_next;  // state after the action
  Tensor action;          // raw sampled values, 1 x 2(n-2)
  double reward = 0.0;    // max-flow increment
  double log_density = 0.0;  // behavior policy log pi(a|s)
  double advantage = 0.0;
  double target = 0.0;
};

// Log-density of independent per-component Gaussians.
double gaussian_log_density(const Tensor& mean, const Tensor& stddev, const Tensor& action);

// min{rho A, clip(rho, 1-tau, 1+tau, A)} with rho = exp(log-ratio clamped to
// +-20) and clip(a,b,c,d) = min{a,c} d for d > 0, max{a,b} d otherwise. The
// tape-built actor objective computes exactly this per buffer entry.
double surrogate_objective(double log_ratio, double advantage, double tau);

// One epoch of Algorithm rollout: T entries, state reset every segment;
// advantages and targets are filled from the current critic.
std::vector<BufferEntry> ppo_rollout_epoch(const ActorModel& actor, const CriticModel& critic,
                                           PpoEnv& env, const PpoConfig& cfg,
                                           std::mt19937_64& rng);

// Probability ratios of the current actor against the stored behavior
// densities; exactly one before any update.
std::vector<double> density_ratios(const ActorModel& actor, const std::vector<BufferEntry>& buffer);

// M sweeps of clipped-surrogate ascent on the actor and Huber descent on the
// critic, with advantages and targets frozen.
void ppo_update(ActorModel& actor, CriticModel& critic, const std::vector<BufferEntry>& buffer,
                const PpoConfig& cfg, nn::Adam& actor_opt, nn::Adam& critic_opt);

struct PpoTrainResult {
  std::vector<double> epoch_rewards;  // mean reward per timeslot, per epoch
  bool converged = false;
};

PpoTrainResult train_ppo(ActorModel& actor, CriticModel& critic, PpoEnv& env, const PpoConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset generation

enum class Strategy { kRlgp, kRw, kWcc };
Strategy strategy_from_name(const std::string& name);
std::string strategy_name(Strategy s);

struct DatagenConfig {
  channel::ChannelParams params;
  double zeta = 0.02;
  int steps = 400;            // updates per deployment
  int snapshot_interval = 5;  // sample every k steps, including step 0
  double arena_halfwidth = 6.0;
  std::uint64_t seed = 1;
};

// One labeled snapshot: positions, exact max-flow, and the unit direction
// each relay traveled when leaving this snapshot. The final snapshot has no
// outgoing step; its directions are zero and flagged invalid.
struct TrajectorySample {
  int deployment_id = 0;
  int step = 0;
  Deployment dep;
  double label = 0.0;
  Mat directions;  // (n-2) x 2
  bool valid_direction = true;
};

// Runs one trajectory and returns its snapshots. The actor is required for
// the policy-driven strategy and ignored otherwise.
std::vector<TrajectorySample> generate_trajectory(Strategy strategy, const Deployment& dep0,
                                                  int dep_id, const DatagenConfig& cfg,
                                                  const ActorModel* actor);

// Writes one record per snapshot to the line-delimited dataset file. Records
// are append-only and deployments use independent seed streams, so generation
// can resume per deployment: pass the next deployment id and append=true.
void generate_dataset(Strategy strategy, const std::vector<Deployment>& deployments,
                      const DatagenConfig& cfg, const ActorModel* actor,
                      const std::string& out_path, int first_id = 0, bool append = false);

}  // namespace relayopt::datagen
