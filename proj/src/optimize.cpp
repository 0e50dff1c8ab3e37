#include "relayopt/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "relayopt/flow.hpp"

namespace relayopt::optimize {

Method method_from_name(const std::string& name) {
  if (name == "mfl") return Method::kMfl;
  if (name == "gl") return Method::kGl;
  if (name == "wcc") return Method::kWcc;
  if (name == "hybrid") return Method::kHybrid;
  if (name == "rl") return Method::kRl;
  throw InputError("unknown method: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kMfl: return "mfl";
    case Method::kGl: return "gl";
    case Method::kWcc: return "wcc";
    case Method::kHybrid: return "hybrid";
    case Method::kRl: return "rl";
  }
  return "?";
}

Vec2 clamp_to_arena(Vec2 p, double halfwidth) {
  return {std::clamp(p.x, -halfwidth, halfwidth), std::clamp(p.y, -halfwidth, halfwidth)};
}

namespace {

// Move each relay zeta along its unit direction; zero rows stay put.
Deployment apply_directions(const Deployment& dep, const Mat& dirs, const StepConfig& cfg,
                            bool normalize_rows) {
  Deployment next = dep;
  for (int relay = 1; relay < dep.n() - 1; ++relay) {
    Vec2 u{dirs.at(relay - 1, 0), dirs.at(relay - 1, 1)};
    if (normalize_rows) {
      const double norm = u.norm();
      if (norm == 0.0) continue;
      u = u * (1.0 / norm);
    }
    next.positions[relay] =
        clamp_to_arena(next.positions[relay] + u * cfg.zeta, cfg.arena_halfwidth);
  }
  return next;
}

}  // namespace

Mat mfl_position_gradient(const models::GraphScalarModel& model, const channel::ChannelParams& p,
                          const Deployment& dep) {
  nn::Tape tape;
  const auto ids = model.forward(tape, models::build_features(dep), models::adjacency_tensor(p, dep));
  const auto [dx, da] = nn::grad_wrt_inputs(tape, ids.output, ids.x, ids.a);

  const int n = dep.n();
  Mat grad(n - 2, 2);
  for (int relay = 1; relay < n - 1; ++relay)
    for (int coord = 0; coord < 2; ++coord) {
      // Feature path: the coordinate is entry (relay, coord+1) of X.
      double g = dx.at(relay, coord + 1);
      // Capacity path: Hilbert-Schmidt product of dA with the analytic
      // per-coordinate capacity gradients.
      const Mat dadx = channel::adjacency_grad(p, dep, relay, coord);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g += da.at(i, j) * dadx.at(i, j);
      grad.at(relay - 1, coord) = g;
    }
  return grad;
}

Deployment mfl_step(const models::GraphScalarModel& model, const channel::ChannelParams& p,
                    const Deployment& dep, const StepConfig& cfg) {
  Mat grad = mfl_position_gradient(model, p, dep);
  if (cfg.per_scalar_sign) {
    for (auto& v : grad.d) v = (v > 0) - (v < 0);
    return apply_directions(dep, grad, cfg, false);
  }
  return apply_directions(dep, grad, cfg, true);
}

Deployment gl_step(const models::GlModel& model, const channel::ChannelParams& p,
                   const Deployment& dep, const StepConfig& cfg) {
  const models::Tensor rows =
      models::gl_rows(model, models::build_features(dep), models::adjacency_tensor(p, dep));
  return apply_directions(dep, rows.to_mat(), cfg, true);
}

Deployment wcc_step(const channel::ChannelParams& p, const Deployment& dep,
                    const std::vector<double>& w, const StepConfig& cfg) {
  const spectral::Lambda2Grad lg = spectral::lambda2_grad(p, dep, w);
  return apply_directions(dep, lg.grad, cfg, true);
}

Deployment rl_step(const models::ActorModel& actor, const channel::ChannelParams& p,
                   const Deployment& dep, const StepConfig& cfg) {
  const auto [mean, stddev] =
      models::actor_value(actor, models::build_features(dep), models::adjacency_tensor(p, dep));
  (void)stddev;  // deterministic evaluation: the mean action is used directly
  if (mean.cols != 2 * (dep.n() - 2)) throw ShapeError("actor head does not match relay count");
  Mat dirs(dep.n() - 2, 2);
  for (int r = 0; r < dirs.rows; ++r) {
    dirs.at(r, 0) = mean.at(0, 2 * r);
    dirs.at(r, 1) = mean.at(0, 2 * r + 1);
  }
  return apply_directions(dep, dirs, cfg, true);
}

HybridOutcome hybrid_step(const models::GraphScalarModel& model, const channel::ChannelParams& p,
                          const Deployment& dep, const std::vector<double>& w,
                          const StepConfig& cfg) {
  std::optional<Deployment> cand_mfl, cand_wcc;
  std::string fail;
  try {
    cand_mfl = mfl_step(model, p, dep, cfg);
  } catch (const Error& e) {
    fail = e.what();
  }
  try {
    cand_wcc = wcc_step(p, dep, w, cfg);
  } catch (const Error& e) {
    fail = e.what();
  }
  if (!cand_mfl && !cand_wcc) throw NumericError("both hybrid branches failed: " + fail);

  auto value_of = [&](const Deployment& d) {
    return flow::max_flow(channel::adjacency(p, d), d.source(), d.dest()).value;
  };

  HybridOutcome out;
  if (cand_mfl && cand_wcc) {
    const double v_mfl = value_of(*cand_mfl);
    const double v_wcc = value_of(*cand_wcc);
    if (v_mfl >= v_wcc) {
      out = {*cand_mfl, "mfl", v_mfl};
    } else {
      out = {*cand_wcc, "wcc", v_wcc};
    }
  } else if (cand_mfl) {
    out = {*cand_mfl, "mfl", value_of(*cand_mfl)};
  } else {
    out = {*cand_wcc, "wcc", value_of(*cand_wcc)};
  }
  return out;
}

Trajectory run_trajectory(Method method, const ModelSet& m, const channel::ChannelParams& p,
                          const Deployment& dep0, const StepConfig& cfg, int steps) {
  if ((method == Method::kMfl || method == Method::kHybrid) && !m.mfl)
    throw InputError("method needs a trained max-flow regressor");
  if (method == Method::kGl && !m.gl) throw InputError("method needs a trained direction model");
  if (method == Method::kRl && !m.actor) throw InputError("method needs a trained actor");
  std::vector<double> w = m.wcc_weights;
  if (w.empty()) w = spectral::endpoint_weights(dep0.n());

  auto value_of = [&](const Deployment& d) {
    return flow::max_flow(channel::adjacency(p, d), d.source(), d.dest()).value;
  };

  Trajectory out;
  out.deployments.push_back(dep0);
  out.max_flows.push_back(value_of(dep0));
  out.tags.push_back("-");

  Deployment cur = dep0;
  for (int t = 0; t < steps; ++t) {
    std::string tag = "-";
    double value = 0.0;
    switch (method) {
      case Method::kMfl:
        cur = mfl_step(*m.mfl, p, cur, cfg);
        value = value_of(cur);
        break;
      case Method::kGl:
        cur = gl_step(*m.gl, p, cur, cfg);
        value = value_of(cur);
        break;
      case Method::kWcc:
        cur = wcc_step(p, cur, w, cfg);
        value = value_of(cur);
        break;
      case Method::kRl:
        cur = rl_step(*m.actor, p, cur, cfg);
        value = value_of(cur);
        break;
      case Method::kHybrid: {
        HybridOutcome h = hybrid_step(*m.mfl, p, cur, w, cfg);
        cur = h.dep;
        value = h.max_flow;
        tag = h.branch;
        break;
      }
    }
    for (const auto& pos : cur.positions)
      if (!std::isfinite(pos.x) || !std::isfinite(pos.y))
        throw NumericError("non-finite position at step " + std::to_string(t));
    out.deployments.push_back(cur);
    out.max_flows.push_back(value);
    out.tags.push_back(tag);
  }
  return out;
}

}  // namespace relayopt::optimize
