#include "relayopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "relayopt/flow.hpp"

namespace relayopt::harness {

using datagen::TrajectorySample;
using models::Tensor;
using nn::Tape;

void ExperimentConfig::validate() const {
  channel.validate();
  if (!(arena_halfwidth > 0) || !(guard_radius > 0)) throw InputError("bad arena geometry");
  if (std::abs(source.x) > arena_halfwidth || std::abs(source.y) > arena_halfwidth ||
      std::abs(dest.x) > arena_halfwidth || std::abs(dest.y) > arena_halfwidth)
    throw InputError("endpoints outside the arena");
  if (relay_init.empty()) throw InputError("at least one relay required");
  if (!(zeta > 0) || steps <= 0 || snapshot_interval <= 0) throw InputError("bad update schedule");
}

Deployment initial_deployment(const ExperimentConfig& cfg, Vec2 jammer) {
  Deployment d;
  d.positions.push_back(cfg.source);
  for (const auto& r : cfg.relay_init) d.positions.push_back(r);
  d.positions.push_back(cfg.dest);
  d.jammer = jammer;
  return d;
}

bool jammer_admissible(const ExperimentConfig& cfg, Vec2 jammer) {
  return dist(jammer, cfg.source) > cfg.guard_radius && dist(jammer, cfg.dest) > cfg.guard_radius;
}

std::vector<Deployment> sample_deployments(const ExperimentConfig& cfg, int count,
                                           std::uint64_t purpose_tag) {
  cfg.validate();
  if (count < 1) throw InputError("deployment count must be positive");
  std::mt19937_64 rng(mix_seed(cfg.seed, purpose_tag));
  std::uniform_real_distribution<double> coord(-cfg.arena_halfwidth, cfg.arena_halfwidth);
  std::vector<Deployment> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    const Vec2 jammer{coord(rng), coord(rng)};
    if (!jammer_admissible(cfg, jammer)) continue;
    out.push_back(initial_deployment(cfg, jammer));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Supervised training

namespace {

struct Prepared {
  Tensor x, a;
  double label;
  Tensor directions;
  bool valid;
};

std::vector<Prepared> prepare(const std::vector<TrajectorySample>& samples,
                              const channel::ChannelParams& params) {
  if (samples.empty()) throw InputError("empty dataset");
  std::vector<Prepared> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Prepared p;
    p.x = models::build_features(s.dep);
    p.a = models::adjacency_tensor(params, s.dep);
    p.label = s.label;
    p.directions = Tensor::from_mat(s.directions);
    p.valid = s.valid_direction;
    out.push_back(std::move(p));
  }
  return out;
}

// Shared minibatch loop: per-sample tapes, averaged gradients, Adam.
template <typename LossFn>
TrainResult run_training(const std::vector<Prepared>& data, std::vector<nn::Tensor*> params,
                         const TrainHyper& hyper, LossFn&& sample_loss) {
  nn::Adam opt({.learning_rate = hyper.learning_rate});
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed(hyper.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < order.size(); start += hyper.batch) {
      const size_t end = std::min(order.size(), start + hyper.batch);
      nn::GradAccumulator acc;
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        Tape tape;
        auto [loss, ids] = sample_loss(tape, data[order[i]]);
        const double v = tape.value(loss).value();
        if (!std::isfinite(v)) throw NumericError("non-finite training loss");
        batch_loss += v;
        tape.backward(loss);
        acc.add(params, tape, ids);
      }
      opt.step(params, acc.mean());
      epoch_loss += batch_loss;
      seen += end - start;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
  }
  return result;
}

std::vector<nn::Tensor*> tensor_ptrs(std::vector<models::NamedParam> named) {
  std::vector<nn::Tensor*> out;
  for (const auto& p : named) out.push_back(p.tensor);
  return out;
}

}  // namespace

TrainResult train_mfl(const std::vector<TrajectorySample>& samples,
                      models::GraphScalarModel& model, const channel::ChannelParams& params,
                      const TrainHyper& hyper) {
  const auto data = prepare(samples, params);
  return run_training(data, tensor_ptrs(model.parameters()), hyper,
                      [&](Tape& tape, const Prepared& p) {
                        const auto ids = model.forward(tape, p.x, p.a);
                        const int loss = nn::mse(tape, ids.output, tape.constant(p.label));
                        return std::make_pair(loss, ids.param_ids);
                      });
}

TrainResult train_gl(const std::vector<TrajectorySample>& samples, models::GlModel& model,
                     const channel::ChannelParams& params, const TrainHyper& hyper) {
  auto data = prepare(samples, params);
  std::erase_if(data, [](const Prepared& p) { return !p.valid; });
  if (data.empty()) throw InputError("no usable direction labels in dataset");
  return run_training(data, tensor_ptrs(model.parameters()), hyper,
                      [&](Tape& tape, const Prepared& p) {
                        const auto ids = model.forward(tape, p.x, p.a);
                        const int normalized = tape.row_normalize(ids.output);
                        const int loss =
                            nn::frobenius_mse(tape, normalized, tape.leaf(p.directions));
                        return std::make_pair(loss, ids.param_ids);
                      });
}

void write_loss_log(const std::string& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open loss log: " + path);
  out << "epoch,loss\n";
  for (size_t e = 0; e < result.epoch_losses.size(); ++e)
    out << e << "," << io::fmt6(result.epoch_losses[e]) << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic function-fitting check

SynthFn synth_fn_from_name(const std::string& name) {
  if (name == "f1") return SynthFn::kF1;
  if (name == "f2") return SynthFn::kF2;
  throw InputError("unknown synthetic function: " + name);
}

double synth_value(SynthFn fn, const Tensor& x) {
  if (x.rows != 3 || x.cols != 2) throw ShapeError("synthetic input must be 3 x 2");
  double v = 0.0;
  if (fn == SynthFn::kF1) {
    for (double e : x.data) v += e * e;
  } else {
    for (int k = 0; k < 3; ++k) v += x.at(k, 0) * x.at(k, 1);
  }
  return v;
}

Tensor synth_gradient(SynthFn fn, const Tensor& x) {
  if (x.rows != 3 || x.cols != 2) throw ShapeError("synthetic input must be 3 x 2");
  Tensor g(3, 2);
  if (fn == SynthFn::kF1) {
    for (size_t i = 0; i < x.data.size(); ++i) g.data[i] = 2.0 * x.data[i];
  } else {
    for (int k = 0; k < 3; ++k) {
      g.at(k, 0) = x.at(k, 1);
      g.at(k, 1) = x.at(k, 0);
    }
  }
  return g;
}

double SynthReport::deriv_frac_within(double tol) const {
  if (deriv_rel_errs.empty()) return 0.0;
  const auto within = std::count_if(deriv_rel_errs.begin(), deriv_rel_errs.end(),
                                    [&](double e) { return e <= tol; });
  return static_cast<double>(within) / static_cast<double>(deriv_rel_errs.size());
}

SynthReport synth_check(SynthFn fn, int train_samples, int epochs, std::uint64_t seed,
                        int test_samples, double learning_rate, int batch) {
  if (train_samples < 1 || test_samples < 1 || epochs < 1) throw InputError("bad synth sizes");
  // Fully connected 3-node graph with unit edge weights.
  Tensor a(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.at(i, j) = (i == j) ? 0.0 : 1.0;

  std::mt19937_64 rng(mix_seed(seed, 0x73796e74ULL));
  std::uniform_real_distribution<double> dist(1.0, 4.0);
  auto draw = [&]() {
    Tensor x(3, 2);
    for (auto& v : x.data) v = dist(rng);
    return x;
  };

  std::vector<Tensor> train_x(train_samples), test_x(test_samples);
  for (auto& x : train_x) x = draw();
  for (auto& x : test_x) x = draw();

  models::SynthModel model(mix_seed(seed, 0x6d6f64ULL));
  const auto named = model.parameters();
  std::vector<nn::Tensor*> params;
  for (const auto& p : named) params.push_back(p.tensor);
  nn::Adam opt({.learning_rate = learning_rate});

  std::vector<size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);

  SynthReport rep;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed(seed, 0x2000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += batch) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
      nn::GradAccumulator acc;
      for (size_t i = start; i < end; ++i) {
        Tape tape;
        const auto ids = model.forward(tape, train_x[order[i]], a);
        const int loss =
            nn::mse(tape, ids.output, tape.constant(synth_value(fn, train_x[order[i]])));
        epoch_loss += tape.value(loss).value();
        tape.backward(loss);
        acc.add(params, tape, ids.param_ids);
      }
      opt.step(params, acc.mean());
    }
    rep.epoch_losses.push_back(epoch_loss / static_cast<double>(train_x.size()));
  }

  for (const Tensor& x : test_x) {
    Tape tape;
    const auto ids = model.forward(tape, x, a);
    const double predicted = tape.value(ids.output).value();
    const double truth = synth_value(fn, x);
    rep.value_rel_errs.push_back(std::abs(predicted - truth) / std::abs(truth));

    const auto [dx, da] = nn::grad_wrt_inputs(tape, ids.output, ids.x, ids.a);
    (void)da;
    const Tensor g = synth_gradient(fn, x);
    for (size_t i = 0; i < g.data.size(); ++i)
      rep.deriv_rel_errs.push_back(std::abs(dx.data[i] - g.data[i]) / std::abs(g.data[i]));
  }
  rep.mean_value_rel_err =
      std::accumulate(rep.value_rel_errs.begin(), rep.value_rel_errs.end(), 0.0) /
      rep.value_rel_errs.size();
  rep.max_value_rel_err = *std::max_element(rep.value_rel_errs.begin(), rep.value_rel_errs.end());
  rep.max_deriv_rel_err = *std::max_element(rep.deriv_rel_errs.begin(), rep.deriv_rel_errs.end());
  return rep;
}

void write_synth_report(const SynthReport& rep, const std::string& out_dir,
                        const std::string& fn_name) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / ("synth_" + fn_name + "_errors.csv"));
    out << "kind,rel_err\n";
    for (double e : rep.value_rel_errs) out << "value," << io::fmt6(e) << "\n";
    for (double e : rep.deriv_rel_errs) out << "derivative," << io::fmt6(e) << "\n";
  }
  std::ofstream out(fs::path(out_dir) / ("synth_" + fn_name + "_summary.txt"));
  out << "function: " << fn_name << "\n";
  out << "mean value rel err: " << io::fmt6(rep.mean_value_rel_err) << "\n";
  out << "max value rel err: " << io::fmt6(rep.max_value_rel_err) << "\n";
  out << "max derivative rel err: " << io::fmt6(rep.max_deriv_rel_err) << "\n";
  out << "derivative frac within 15%: " << io::fmt6(rep.deriv_frac_within(0.15)) << "\n";
  out << "final training loss: "
      << io::fmt6(rep.epoch_losses.empty() ? 0.0 : rep.epoch_losses.back()) << "\n";
}

// ---------------------------------------------------------------------------
// Evaluation

double truncated_mean(std::vector<double> values, double tail_frac) {
  if (values.empty()) throw InputError("truncated mean of empty list");
  std::sort(values.begin(), values.end());
  const size_t drop = static_cast<size_t>(std::floor(tail_frac * values.size()));
  if (2 * drop >= values.size()) throw InputError("truncation drops every value");
  double sum = 0.0;
  for (size_t i = drop; i < values.size() - drop; ++i) sum += values[i];
  return sum / static_cast<double>(values.size() - 2 * drop);
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
  if (values.empty() || bins < 1) throw InputError("bad histogram input");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (lo == hi) hi = lo + 1.0;  // degenerate range: everything lands in bin 0
  Histogram h;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  h.counts.assign(bins, 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

EvalReport evaluate(const std::vector<io::TrajectoryFile>& files, const std::string& baseline,
                    const models::GraphScalarModel* regressor,
                    const channel::ChannelParams* params, std::string fidelity_method) {
  if (files.empty()) throw InputError("no trajectory files");

  EvalReport rep;
  rep.baseline = baseline;
  std::map<std::string, const io::TrajectoryFile*> by_method;
  for (const auto& f : files) {
    if (!by_method.emplace(f.method, &f).second)
      throw InputError("duplicate method in evaluation: " + f.method);
  }
  if (!by_method.count(baseline)) throw InputError("baseline method missing: " + baseline);

  for (const auto& rec : by_method.at(baseline)->records)
    rep.deployment_ids.push_back(rec.deployment_id);

  for (const auto& [method, file] : by_method) {
    std::vector<int> ids;
    std::vector<double> finals;
    for (const auto& rec : file->records) {
      ids.push_back(rec.deployment_id);
      finals.push_back(rec.traj.max_flows.back());
    }
    if (ids != rep.deployment_ids)
      throw InputError("trajectory files cover different deployments: " + method);
    rep.final_max_flows[method] = std::move(finals);
  }

  const auto& base = rep.final_max_flows.at(baseline);
  for (const auto& [method, finals] : rep.final_max_flows) {
    MethodStats st;
    st.method = method;
    std::vector<double> diffs(finals.size()), rel_diffs(finals.size());
    for (size_t i = 0; i < finals.size(); ++i) {
      diffs[i] = finals[i] - base[i];
      rel_diffs[i] = diffs[i] / std::max(std::abs(base[i]), 1e-12);
      if (diffs[i] > 0) ++st.wins;
    }
    st.avg_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / diffs.size();
    st.avg_rel_diff = std::accumulate(rel_diffs.begin(), rel_diffs.end(), 0.0) / rel_diffs.size();
    st.trunc_avg_diff = truncated_mean(diffs, 0.10);
    st.trunc_avg_rel_diff = truncated_mean(rel_diffs, 0.10);
    st.diff_hist = make_histogram(diffs);
    st.rel_diff_hist = make_histogram(rel_diffs);
    rep.stats.push_back(std::move(st));
  }

  if (regressor && params) {
    if (fidelity_method.empty())
      fidelity_method = by_method.count("hybrid") ? "hybrid" : baseline;
    if (!by_method.count(fidelity_method))
      throw InputError("fidelity method missing: " + fidelity_method);
    MflFidelity fid;
    fid.scored_method = fidelity_method;
    for (const auto& rec : by_method.at(fidelity_method)->records) {
      const Deployment& final_dep = rec.traj.deployments.back();
      const double truth = rec.traj.max_flows.back();
      const double predicted = models::mfl_value(*regressor, models::build_features(final_dep),
                                                 models::adjacency_tensor(*params, final_dep));
      fid.rel_errs.push_back(std::abs(predicted - truth) / std::max(std::abs(truth), 1e-12));
    }
    fid.avg_rel_err =
        std::accumulate(fid.rel_errs.begin(), fid.rel_errs.end(), 0.0) / fid.rel_errs.size();
    fid.trunc_avg_rel_err = truncated_mean(fid.rel_errs, 0.01);
    rep.fidelity = std::move(fid);
  }
  return rep;
}

void write_report(const EvalReport& rep, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "comparison.csv");
    out << "method,wins,avg_diff,avg_rel_diff,trunc_avg_diff,trunc_avg_rel_diff\n";
    for (const auto& st : rep.stats)
      out << st.method << "," << st.wins << "," << io::fmt6(st.avg_diff) << ","
          << io::fmt6(st.avg_rel_diff) << "," << io::fmt6(st.trunc_avg_diff) << ","
          << io::fmt6(st.trunc_avg_rel_diff) << "\n";
  }
  for (const auto& st : rep.stats) {
    const std::vector<std::pair<const char*, const Histogram*>> hists{
        {"diff", &st.diff_hist}, {"rel_diff", &st.rel_diff_hist}};
    for (const auto& [kind, hist] : hists) {
      std::ofstream out(fs::path(out_dir) / ("hist_" + st.method + "_" + kind + ".csv"));
      out << "bin_lo,bin_hi,count\n";
      for (size_t b = 0; b < hist->counts.size(); ++b)
        out << io::fmt6(hist->edges[b]) << "," << io::fmt6(hist->edges[b + 1]) << ","
            << hist->counts[b] << "\n";
    }
  }
  if (rep.fidelity) {
    std::ofstream out(fs::path(out_dir) / "regressor_fidelity.csv");
    out << "scored_method,avg_rel_err,trunc_avg_rel_err\n";
    out << rep.fidelity->scored_method << "," << io::fmt6(rep.fidelity->avg_rel_err) << ","
        << io::fmt6(rep.fidelity->trunc_avg_rel_err) << "\n";
  }
  std::ofstream out(fs::path(out_dir) / "summary.txt");
  out << "baseline: " << rep.baseline << "\n";
  out << "deployments: " << rep.deployment_ids.size() << "\n";
  out << "relative differences use the baseline final max-flow as denominator\n";
  for (const auto& st : rep.stats) {
    out << st.method << ": wins=" << st.wins << " avg_diff=" << io::fmt6(st.avg_diff)
        << " avg_rel_diff=" << io::fmt6(st.avg_rel_diff)
        << " trunc_avg_diff=" << io::fmt6(st.trunc_avg_diff)
        << " trunc_avg_rel_diff=" << io::fmt6(st.trunc_avg_rel_diff) << "\n";
  }
  if (rep.fidelity) {
    out << "regressor fidelity on " << rep.fidelity->scored_method
        << " finals: avg_rel_err=" << io::fmt6(rep.fidelity->avg_rel_err)
        << " trunc_avg_rel_err=" << io::fmt6(rep.fidelity->trunc_avg_rel_err) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Convolution-layer ablation

FirstOrderMflModel::FirstOrderMflModel(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x666fULL));
  conv1_w = nn::init_weight(3, 32, rng);
  conv2_w = nn::init_weight(32, 32, rng);
  conv3_w = nn::init_weight(32, 32, rng);
  lin1_w = nn::init_weight(32, 32, rng);
  lin1_b = nn::init_bias(32, 32, rng);
  lin2_w = nn::init_weight(32, 1, rng);
  lin2_b = nn::init_bias(32, 1, rng);
}

models::ForwardIds FirstOrderMflModel::forward(nn::Tape& tape, const nn::Tensor& x,
                                               const nn::Tensor& a) const {
  models::ForwardIds ids;
  ids.x = tape.leaf(x);
  ids.a = tape.leaf(a);
  for (const auto& p : parameters()) ids.param_ids.push_back(tape.leaf(*p.tensor));
  const auto& pid = ids.param_ids;
  int h = tape.gelu(nn::graph_conv_first_order(tape, ids.x, ids.a, pid[0]));
  h = tape.gelu(nn::graph_conv_first_order(tape, h, ids.a, pid[1]));
  h = tape.gelu(nn::graph_conv_first_order(tape, h, ids.a, pid[2]));
  h = tape.global_add_pool(h);
  h = tape.gelu(nn::linear(tape, h, pid[3], pid[4]));
  ids.output = nn::linear(tape, h, pid[5], pid[6]);
  return ids;
}

std::vector<models::NamedParam> FirstOrderMflModel::parameters() {
  return {{"conv1_w", &conv1_w}, {"conv2_w", &conv2_w}, {"conv3_w", &conv3_w},
          {"lin1_w", &lin1_w},   {"lin1_b", &lin1_b},   {"lin2_w", &lin2_w},
          {"lin2_b", &lin2_b}};
}
std::vector<models::NamedParam> FirstOrderMflModel::parameters() const {
  return const_cast<FirstOrderMflModel*>(this)->parameters();
}

EvalReport ablation_layer(const std::vector<TrajectorySample>& dataset,
                          const std::vector<Deployment>& testset, const ExperimentConfig& cfg,
                          const TrainHyper& hyper) {
  models::MflModel full(cfg.seed);
  FirstOrderMflModel first_order(cfg.seed);
  train_mfl(dataset, full, cfg.channel, hyper);
  train_mfl(dataset, first_order, cfg.channel, hyper);

  optimize::StepConfig step{.zeta = cfg.zeta, .arena_halfwidth = cfg.arena_halfwidth};
  auto run_all = [&](const models::GraphScalarModel& m, const std::string& name) {
    io::TrajectoryFile file;
    file.method = name;
    optimize::ModelSet set;
    set.mfl = &m;
    for (size_t i = 0; i < testset.size(); ++i) {
      file.records.push_back({static_cast<int>(i),
                              optimize::run_trajectory(optimize::Method::kMfl, set, cfg.channel,
                                                       testset[i], step, cfg.steps)});
    }
    return file;
  };

  std::vector<io::TrajectoryFile> files;
  files.push_back(run_all(full, "mfl"));
  files.push_back(run_all(first_order, "mfl-fo"));
  return evaluate(files, "mfl-fo");
}

}  // namespace relayopt::harness
