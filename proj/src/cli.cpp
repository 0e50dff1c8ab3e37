#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>

#include "relayopt/flow.hpp"
#include "relayopt/harness.hpp"

namespace relayopt::harness {

namespace {

// Exit codes: 0 ok, 2 usage, 3 bad input or parse failure, 4 numeric failure,
// 5 internal error.
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitInternal = 5;

struct CliState {
  ExperimentConfig exp;
  datagen::PpoConfig ppo;
  TrainHyper train;
  std::uint64_t seed = 1;

  void finalize() {
    exp.seed = seed;
    ppo.seed = seed;
    train.seed = seed;
    ppo.zeta = exp.zeta;
    ppo.arena_halfwidth = exp.arena_halfwidth;
    exp.validate();
  }
};

void add_shared_options(CLI::App& app, CliState& st) {
  app.add_option("--seed", st.seed, "master seed; every substream derives from it")
      ->capture_default_str();
  app.add_option("--alpha", st.exp.channel.alpha, "path-loss exponent")->capture_default_str();
  app.add_option("--eta", st.exp.channel.eta, "jammer-to-node power ratio")->capture_default_str();
  app.add_option("--bandwidth", st.exp.channel.bandwidth, "per-link bandwidth")
      ->capture_default_str();
  app.add_option("--r-int", st.exp.channel.r_int, "interference radius")->capture_default_str();
  app.add_option("--nu-rho", st.exp.channel.rho, "smoothed-step height")->capture_default_str();
  app.add_option("--nu-kappa", st.exp.channel.kappa, "smoothed-step steepness")
      ->capture_default_str();
  app.add_option("--nu-z0", st.exp.channel.z0, "smoothed-step offset")->capture_default_str();
  app.add_option("--arena", st.exp.arena_halfwidth, "arena half-width")->capture_default_str();
  app.add_option("--guard-radius", st.exp.guard_radius, "jammer exclusion radius around endpoints")
      ->capture_default_str();
  app.add_option("--zeta", st.exp.zeta, "update stepsize")->capture_default_str();
  app.add_option("--steps", st.exp.steps, "update steps per deployment")->capture_default_str();
  app.add_option("--interval", st.exp.snapshot_interval, "snapshot every k steps")
      ->capture_default_str();
  app.add_option("--gamma", st.ppo.gamma, "reward discount")->capture_default_str();
  app.add_option("--tau", st.ppo.tau, "surrogate clip range")->capture_default_str();
  app.add_option("--ppo-segment-steps", st.ppo.segment_steps, "steps between state resets")
      ->capture_default_str();
  app.add_option("--phi", st.ppo.phi, "segments per epoch")->capture_default_str();
  app.add_option("--ppo-epochs", st.ppo.epochs, "epoch cap for policy training")
      ->capture_default_str();
  app.add_option("--ppo-inner-epochs", st.ppo.inner_epochs, "update sweeps per epoch")
      ->capture_default_str();
  app.add_option("--actor-lr", st.ppo.actor_lr, "actor learning rate")->capture_default_str();
  app.add_option("--critic-lr", st.ppo.critic_lr, "critic learning rate")->capture_default_str();
  app.add_option("--lr", st.train.learning_rate, "supervised learning rate")
      ->capture_default_str();
  app.add_option("--epochs", st.train.epochs, "supervised training epochs")
      ->capture_default_str();
  app.add_option("--batch", st.train.batch, "minibatch size")->capture_default_str();
}

datagen::DatagenConfig datagen_config(const CliState& st) {
  datagen::DatagenConfig cfg;
  cfg.params = st.exp.channel;
  cfg.zeta = st.exp.zeta;
  cfg.steps = st.exp.steps;
  cfg.snapshot_interval = st.exp.snapshot_interval;
  cfg.arena_halfwidth = st.exp.arena_halfwidth;
  cfg.seed = mix_seed(st.seed, 0x64617461ULL);
  return cfg;
}

models::ActorModel train_rlgp_actor(const CliState& st, const std::vector<Deployment>& deps,
                                    const std::string& actor_out, const std::string& critic_out) {
  models::ActorModel actor(mix_seed(st.seed, 1));
  models::CriticModel critic(mix_seed(st.seed, 2));
  datagen::PpoEnv env(deps, st.exp.channel, st.exp.zeta, st.exp.arena_halfwidth);
  const auto result = datagen::train_ppo(actor, critic, env, st.ppo);
  std::cerr << "policy training: " << result.epoch_rewards.size() << " epochs, "
            << (result.converged ? "converged" : "epoch cap reached") << "\n";
  if (!actor_out.empty()) models::save_checkpoint(actor_out, actor.arch(), actor.parameters());
  if (!critic_out.empty()) models::save_checkpoint(critic_out, critic.arch(), critic.parameters());
  return actor;
}

int count_complete_deployments(const std::string& path, int snapshots_per_dep) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) return 0;
  const auto samples = io::read_dataset(path);
  std::map<int, int> counts;
  for (const auto& s : samples) ++counts[s.deployment_id];
  int complete = 0;
  while (counts.count(complete) && counts.at(complete) == snapshots_per_dep) ++complete;
  return complete;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"relay placement optimizer for jammed wireless networks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "flat key=value configuration file");

  CliState st;
  add_shared_options(app, st);

  // gen-testset
  auto* gen = app.add_subcommand("gen-testset", "sample initial deployments with guard zones");
  int gen_count = 50;
  std::string gen_out = "testset.txt";
  gen->add_option("--count", gen_count, "deployments to draw")->capture_default_str();
  gen->add_option("--out", gen_out, "output file")->capture_default_str();

  // datagen
  auto* dg = app.add_subcommand("datagen", "generate a labeled training dataset");
  std::string dg_strategy;
  int dg_count = 100;
  std::string dg_out = "dataset.txt";
  std::string dg_actor_in, dg_actor_out, dg_critic_out;
  bool dg_resume = false;
  dg->add_option("strategy", dg_strategy, "rlgp | rw | wcc")->required();
  dg->add_option("--count", dg_count, "training deployments")->capture_default_str();
  dg->add_option("--out", dg_out, "dataset file")->capture_default_str();
  dg->add_option("--actor", dg_actor_in, "pre-trained actor checkpoint (rlgp)");
  dg->add_option("--save-actor", dg_actor_out, "where to store the trained actor (rlgp)");
  dg->add_option("--save-critic", dg_critic_out, "where to store the trained critic (rlgp)");
  dg->add_flag("--resume", dg_resume, "skip deployments already complete in the output file");

  // train
  auto* tr = app.add_subcommand("train", "fit a model to a dataset");
  std::string tr_what, tr_dataset, tr_out = "model.ckpt", tr_loss_log, tr_conv = "graphconv";
  tr->add_option("target", tr_what, "mfl | gl")->required();
  tr->add_option("--dataset", tr_dataset, "dataset file")->required();
  tr->add_option("--out", tr_out, "checkpoint file")->capture_default_str();
  tr->add_option("--loss-log", tr_loss_log, "CSV loss curve output");
  tr->add_option("--conv", tr_conv, "graphconv | firstorder (mfl only)")->capture_default_str();

  // ppo-train
  auto* pt = app.add_subcommand("ppo-train", "train the exploration policy on deployments");
  std::string pt_deps, pt_actor_out = "actor.ckpt", pt_critic_out = "critic.ckpt", pt_reward_log;
  pt->add_option("--deployments", pt_deps, "deployment file")->required();
  pt->add_option("--actor-out", pt_actor_out, "actor checkpoint")->capture_default_str();
  pt->add_option("--critic-out", pt_critic_out, "critic checkpoint")->capture_default_str();
  pt->add_option("--reward-log", pt_reward_log, "CSV epoch reward output");

  // optimize
  auto* op = app.add_subcommand("optimize", "run relay-update trajectories on deployments");
  std::string op_method, op_deps, op_out = "trajectories.txt";
  std::string op_mfl, op_gl, op_actor;
  bool op_scalar_sign = false;
  op->add_option("method", op_method, "mfl | gl | wcc | hybrid | rl")->required();
  op->add_option("--deployments", op_deps, "deployment file")->required();
  op->add_option("--out", op_out, "trajectory file")->capture_default_str();
  op->add_option("--mfl", op_mfl, "max-flow regressor checkpoint");
  op->add_option("--gl", op_gl, "direction model checkpoint");
  op->add_option("--actor", op_actor, "actor checkpoint");
  op->add_flag("--per-scalar-sign", op_scalar_sign,
               "normalize each coordinate derivative separately (sign update)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "compare trajectory files against a baseline");
  std::vector<std::string> ev_files;
  std::string ev_baseline = "wcc", ev_out = "report", ev_mfl, ev_fidelity_method;
  ev->add_option("--traj", ev_files, "trajectory files (method read from header)")->required();
  ev->add_option("--baseline", ev_baseline, "baseline method")->capture_default_str();
  ev->add_option("--out-dir", ev_out, "report directory")->capture_default_str();
  ev->add_option("--mfl", ev_mfl, "regressor checkpoint for fidelity scoring");
  ev->add_option("--fidelity-method", ev_fidelity_method,
                 "method whose final deployments are scored");

  // synthcheck
  auto* sy = app.add_subcommand("synthcheck", "fit the small regressor to a known function");
  std::string sy_fn = "f1", sy_out = "synth";
  int sy_samples = 5000, sy_epochs = 200, sy_test = 500;
  double sy_lr = 0.002;
  sy->add_option("--function", sy_fn, "f1 | f2")->capture_default_str();
  sy->add_option("--samples", sy_samples, "training samples")->capture_default_str();
  sy->add_option("--synth-epochs", sy_epochs, "training epochs")->capture_default_str();
  sy->add_option("--test-samples", sy_test, "test samples")->capture_default_str();
  sy->add_option("--synth-lr", sy_lr, "learning rate")->capture_default_str();
  sy->add_option("--out-dir", sy_out, "report directory")->capture_default_str();

  // maxflow
  auto* mf = app.add_subcommand("maxflow", "print the exact max-flow of each deployment");
  std::string mf_deps;
  mf->add_option("--deployments", mf_deps, "deployment file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    st.finalize();

    if (gen->parsed()) {
      io::write_deployments(gen_out, gen_testset(st.exp, gen_count));
      std::cout << "wrote " << gen_count << " deployments to " << gen_out << "\n";
    } else if (dg->parsed()) {
      const auto strategy = datagen::strategy_from_name(dg_strategy);
      const auto deps = gen_trainset(st.exp, dg_count);
      const auto cfg = datagen_config(st);

      std::unique_ptr<models::ActorModel> actor;
      if (strategy == datagen::Strategy::kRlgp) {
        if (!dg_actor_in.empty()) {
          actor = std::make_unique<models::ActorModel>(
              models::load_model<models::ActorModel>(dg_actor_in));
        } else {
          actor = std::make_unique<models::ActorModel>(
              train_rlgp_actor(st, deps, dg_actor_out, dg_critic_out));
        }
      }

      int first = 0;
      if (dg_resume)
        first = count_complete_deployments(dg_out, st.exp.steps / st.exp.snapshot_interval + 1);
      if (first > dg_count) first = dg_count;
      if (first > 0) {
        // Keep the completed prefix byte-for-byte; regenerate the rest.
        const auto existing = io::read_dataset(dg_out);
        io::DatasetWriter rewrite(dg_out);
        for (const auto& s : existing)
          if (s.deployment_id < first) rewrite.append(s);
      }
      const std::vector<Deployment> rest(deps.begin() + first, deps.end());
      datagen::generate_dataset(strategy, rest, cfg, actor.get(), dg_out, first, first > 0);
      std::cout << "wrote dataset " << dg_out << " (" << dg_count << " deployments, resumed at "
                << first << ")\n";
    } else if (tr->parsed()) {
      const auto samples = io::read_dataset(tr_dataset);
      TrainResult result;
      if (tr_what == "mfl") {
        std::unique_ptr<models::GraphScalarModel> model;
        if (tr_conv == "graphconv")
          model = std::make_unique<models::MflModel>(st.seed);
        else if (tr_conv == "firstorder")
          model = std::make_unique<FirstOrderMflModel>(st.seed);
        else
          throw InputError("unknown convolution variant: " + tr_conv);
        result = train_mfl(samples, *model, st.exp.channel, st.train);
        models::save_checkpoint(tr_out, model->arch(), model->parameters());
      } else if (tr_what == "gl") {
        models::GlModel model(st.seed);
        result = train_gl(samples, model, st.exp.channel, st.train);
        models::save_checkpoint(tr_out, model.arch(), model.parameters());
      } else {
        throw InputError("unknown training target: " + tr_what);
      }
      if (!tr_loss_log.empty()) write_loss_log(tr_loss_log, result);
      std::cout << "trained " << tr_what << " for " << result.epoch_losses.size()
                << " epochs, final loss " << io::fmt6(result.epoch_losses.back()) << ", saved "
                << tr_out << "\n";
    } else if (pt->parsed()) {
      const auto deps = io::read_deployments(pt_deps);
      models::ActorModel actor(mix_seed(st.seed, 1));
      models::CriticModel critic(mix_seed(st.seed, 2));
      datagen::PpoEnv env(deps, st.exp.channel, st.exp.zeta, st.exp.arena_halfwidth);
      const auto result = datagen::train_ppo(actor, critic, env, st.ppo);
      models::save_checkpoint(pt_actor_out, actor.arch(), actor.parameters());
      models::save_checkpoint(pt_critic_out, critic.arch(), critic.parameters());
      if (!pt_reward_log.empty()) {
        std::ofstream out(pt_reward_log);
        out << "epoch,mean_reward\n";
        for (size_t e = 0; e < result.epoch_rewards.size(); ++e)
          out << e << "," << io::fmt6(result.epoch_rewards[e]) << "\n";
      }
      std::cout << "policy trained for " << result.epoch_rewards.size() << " epochs ("
                << (result.converged ? "converged" : "epoch cap") << "), saved " << pt_actor_out
                << " and " << pt_critic_out << "\n";
    } else if (op->parsed()) {
      const auto method = optimize::method_from_name(op_method);
      const auto deps = io::read_deployments(op_deps);

      std::unique_ptr<models::GraphScalarModel> mfl;
      std::unique_ptr<models::GlModel> gl;
      std::unique_ptr<models::ActorModel> actor;
      if (method == optimize::Method::kMfl || method == optimize::Method::kHybrid) {
        if (op_mfl.empty()) throw InputError("--mfl checkpoint required for this method");
        const auto ck = models::load_checkpoint(op_mfl);
        if (ck.arch == "mfl") {
          auto m = std::make_unique<models::MflModel>();
          models::restore(ck, m->arch(), m->parameters());
          mfl = std::move(m);
        } else if (ck.arch == "mfl-fo") {
          auto m = std::make_unique<FirstOrderMflModel>();
          models::restore(ck, m->arch(), m->parameters());
          mfl = std::move(m);
        } else {
          throw ShapeError("checkpoint is not a max-flow regressor: " + ck.arch);
        }
      }
      if (method == optimize::Method::kGl) {
        if (op_gl.empty()) throw InputError("--gl checkpoint required for this method");
        gl = std::make_unique<models::GlModel>(models::load_model<models::GlModel>(op_gl));
      }
      if (method == optimize::Method::kRl) {
        if (op_actor.empty()) throw InputError("--actor checkpoint required for this method");
        actor =
            std::make_unique<models::ActorModel>(models::load_model<models::ActorModel>(op_actor));
      }

      optimize::ModelSet set;
      set.mfl = mfl.get();
      set.gl = gl.get();
      set.actor = actor.get();
      optimize::StepConfig step{.zeta = st.exp.zeta,
                                .arena_halfwidth = st.exp.arena_halfwidth,
                                .per_scalar_sign = op_scalar_sign};
      std::vector<io::TrajectoryRecord> records;
      for (size_t i = 0; i < deps.size(); ++i)
        records.push_back({static_cast<int>(i),
                           optimize::run_trajectory(method, set, st.exp.channel, deps[i], step,
                                                    st.exp.steps)});
      io::write_trajectories(op_out, op_method, records);
      std::cout << "wrote " << records.size() << " trajectories to " << op_out << "\n";
    } else if (ev->parsed()) {
      std::vector<io::TrajectoryFile> files;
      for (const auto& f : ev_files) files.push_back(io::read_trajectories(f));
      std::unique_ptr<models::GraphScalarModel> regressor;
      if (!ev_mfl.empty()) {
        const auto ck = models::load_checkpoint(ev_mfl);
        if (ck.arch == "mfl") {
          auto m = std::make_unique<models::MflModel>();
          models::restore(ck, m->arch(), m->parameters());
          regressor = std::move(m);
        } else {
          auto m = std::make_unique<FirstOrderMflModel>();
          models::restore(ck, m->arch(), m->parameters());
          regressor = std::move(m);
        }
      }
      const auto report = evaluate(files, ev_baseline, regressor.get(),
                                   regressor ? &st.exp.channel : nullptr, ev_fidelity_method);
      write_report(report, ev_out);
      std::cout << "report written to " << ev_out << "\n";
    } else if (sy->parsed()) {
      const auto report = synth_check(synth_fn_from_name(sy_fn), sy_samples, sy_epochs,
                                      mix_seed(st.seed, 0x7379ULL), sy_test, sy_lr, st.train.batch);
      write_synth_report(report, sy_out, sy_fn);
      std::cout << sy_fn << ": mean value rel err " << io::fmt6(report.mean_value_rel_err)
                << ", derivative frac within 15% " << io::fmt6(report.deriv_frac_within(0.15))
                << ", report in " << sy_out << "\n";
    } else if (mf->parsed()) {
      const auto deps = io::read_deployments(mf_deps);
      for (size_t i = 0; i < deps.size(); ++i) {
        const auto result = flow::max_flow(channel::adjacency(st.exp.channel, deps[i]),
                                           deps[i].source(), deps[i].dest());
        std::cout << i << " " << io::fmt17(result.value) << "\n";
      }
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return 0;
}

}  // namespace relayopt::harness
