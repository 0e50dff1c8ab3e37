#pragma once
#include <optional>
#include <string>
#include <vector>

#include "relayopt/models.hpp"
#include "relayopt/spectral.hpp"

namespace relayopt::optimize {

enum class Method { kMfl, kGl, kWcc, kHybrid, kRl };

Method method_from_name(const std::string& name);
std::string method_name(Method m);

struct StepConfig {
  double zeta = 0.02;
  double arena_halfwidth = 6.0;  // positions are clamped to this box
  // When true, each scalar coordinate derivative is normalized by its own
  // magnitude (a sign update) instead of normalizing the per-relay 2-vector.
  bool per_scalar_sign = false;
};

// Clamp a position to the arena box.
Vec2 clamp_to_arena(Vec2 p, double halfwidth);

// Total derivative of the regressor output per relay coordinate, through
// both the feature path and the capacity-matrix path. Rows are relays.
Mat mfl_position_gradient(const models::GraphScalarModel& model,
                          const channel::ChannelParams& p, const Deployment& dep);

Deployment mfl_step(const models::GraphScalarModel& model, const channel::ChannelParams& p,
                    const Deployment& dep, const StepConfig& cfg);

Deployment gl_step(const models::GlModel& model, const channel::ChannelParams& p,
                   const Deployment& dep, const StepConfig& cfg);

Deployment wcc_step(const channel::ChannelParams& p, const Deployment& dep,
                    const std::vector<double>& w, const StepConfig& cfg);

Deployment rl_step(const models::ActorModel& actor, const channel::ChannelParams& p,
                   const Deployment& dep, const StepConfig& cfg);

struct HybridOutcome {
  Deployment dep;
  std::string branch;  // "mfl" or "wcc"
  double max_flow = 0.0;
};

// Greedy per-step choice: evaluates the exact max-flow of both candidate
// deployments and keeps the larger; ties go to the regressor branch. If one
// branch fails it falls back to the other.
HybridOutcome hybrid_step(const models::GraphScalarModel& model, const channel::ChannelParams& p,
                          const Deployment& dep, const std::vector<double>& w,
                          const StepConfig& cfg);

struct Trajectory {
  std::vector<Deployment> deployments;  // length steps + 1
  std::vector<double> max_flows;        // realized value at every snapshot
  std::vector<std::string> tags;        // hybrid branch per step; "-" otherwise
};

struct ModelSet {
  const models::GraphScalarModel* mfl = nullptr;
  const models::GlModel* gl = nullptr;
  const models::ActorModel* actor = nullptr;
  std::vector<double> wcc_weights;
};

Trajectory run_trajectory(Method method, const ModelSet& m, const channel::ChannelParams& p,
                          const Deployment& dep0, const StepConfig& cfg, int steps);

}  // namespace relayopt::optimize
