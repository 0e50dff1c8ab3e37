#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relayopt/datagen.hpp"
#include "relayopt/io.hpp"
#include "relayopt/models.hpp"
#include "relayopt/optimize.hpp"

namespace relayopt::harness {

// Evaluation scenario: a 12 x 12 unit arena (1 unit = 50 m), fixed endpoints
// and relay initialization, and jammer positions sampled outside the guard
// zones around the endpoints.
struct ExperimentConfig {
  channel::ChannelParams channel;
  double arena_halfwidth = 6.0;
  double guard_radius = 3.0;
  Vec2 source{-4.5, 0.0};
  Vec2 dest{4.5, 0.0};
  std::vector<Vec2> relay_init{{-2.7, 0.0}, {-0.9, 0.0}, {0.9, 0.0}, {2.7, 0.0}};
  double zeta = 0.02;
  int steps = 400;
  int snapshot_interval = 5;
  std::uint64_t seed = 1;

  void validate() const;
  int n() const { return static_cast<int>(relay_init.size()) + 2; }
};

Deployment initial_deployment(const ExperimentConfig& cfg, Vec2 jammer);
bool jammer_admissible(const ExperimentConfig& cfg, Vec2 jammer);

// Test and training deployments draw from disjoint seed streams.
inline constexpr std::uint64_t kTestSeedTag = 0x74657374ULL;
inline constexpr std::uint64_t kTrainSeedTag = 0x747261696eULL;

std::vector<Deployment> sample_deployments(const ExperimentConfig& cfg, int count,
                                           std::uint64_t purpose_tag);
inline std::vector<Deployment> gen_testset(const ExperimentConfig& cfg, int count) {
  return sample_deployments(cfg, count, kTestSeedTag);
}
inline std::vector<Deployment> gen_trainset(const ExperimentConfig& cfg, int count) {
  return sample_deployments(cfg, count, kTrainSeedTag);
}

// ---------------------------------------------------------------------------
// Supervised training

struct TrainHyper {
  double learning_rate = 2e-4;
  int epochs = 80;
  int batch = 100;
  std::uint64_t seed = 1;
};

struct TrainResult {
  std::vector<double> epoch_losses;
};

// Fits the scalar regressor to the max-flow labels (squared error, Adam).
TrainResult train_mfl(const std::vector<datagen::TrajectorySample>& samples,
                      models::GraphScalarModel& model, const channel::ChannelParams& params,
                      const TrainHyper& hyper);

// Fits the direction model to the unit-direction labels (Frobenius squared
// error); snapshots flagged without an outgoing direction are skipped.
TrainResult train_gl(const std::vector<datagen::TrajectorySample>& samples, models::GlModel& model,
                     const channel::ChannelParams& params, const TrainHyper& hyper);

void write_loss_log(const std::string& path, const TrainResult& result);

// ---------------------------------------------------------------------------
// Synthetic function-fitting check

enum class SynthFn { kF1, kF2 };
SynthFn synth_fn_from_name(const std::string& name);

double synth_value(SynthFn fn, const nn::Tensor& x);          // x is 3 x 2
nn::Tensor synth_gradient(SynthFn fn, const nn::Tensor& x);   // analytic, 3 x 2

struct SynthReport {
  std::vector<double> value_rel_errs;  // one per test sample
  std::vector<double> deriv_rel_errs;  // six per test sample
  std::vector<double> epoch_losses;
  double mean_value_rel_err = 0.0;
  double max_value_rel_err = 0.0;
  double max_deriv_rel_err = 0.0;
  double deriv_frac_within(double tol) const;
};

SynthReport synth_check(SynthFn fn, int train_samples, int epochs, std::uint64_t seed,
                        int test_samples = 500, double learning_rate = 0.002, int batch = 100);
void write_synth_report(const SynthReport& rep, const std::string& out_dir,
                        const std::string& fn_name);

// ---------------------------------------------------------------------------
// Evaluation

// Mean after dropping floor(frac * N) values from each tail of the sorted list.
double truncated_mean(std::vector<double> values, double tail_frac);

struct Histogram {
  std::vector<double> edges;  // bin count + 1
  std::vector<int> counts;
};
Histogram make_histogram(const std::vector<double>& values, int bins = 20);

struct MethodStats {
  std::string method;
  int wins = 0;  // deployments where this method's final max-flow beats the baseline's
  double avg_diff = 0.0;
  double avg_rel_diff = 0.0;
  double trunc_avg_diff = 0.0;
  double trunc_avg_rel_diff = 0.0;
  Histogram diff_hist;
  Histogram rel_diff_hist;
};

struct MflFidelity {
  std::string scored_method;  // whose final deployments were scored
  double avg_rel_err = 0.0;
  double trunc_avg_rel_err = 0.0;  // 1% tails
  std::vector<double> rel_errs;
};

struct EvalReport {
  std::string baseline;
  std::vector<int> deployment_ids;
  std::map<std::string, std::vector<double>> final_max_flows;  // per method, id-aligned
  std::vector<MethodStats> stats;
  std::optional<MflFidelity> fidelity;
};

// Statistics over final max-flows versus the named baseline; every method
// must cover the same deployment ids. When a regressor and channel parameters
// are supplied, its output is scored against the true max-flow at the final
// deployments of `fidelity_method` (default: "hybrid" when present, else the
// baseline).
EvalReport evaluate(const std::vector<io::TrajectoryFile>& files, const std::string& baseline,
                    const models::GraphScalarModel* regressor = nullptr,
                    const channel::ChannelParams* params = nullptr,
                    std::string fidelity_method = "");

void write_report(const EvalReport& rep, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Convolution-layer ablation

// First-order message passing with one shared weight per layer, otherwise the
// same stack as the max-flow regressor.
class FirstOrderMflModel : public models::GraphScalarModel {
 public:
  explicit FirstOrderMflModel(std::uint64_t seed = 0);
  models::ForwardIds forward(nn::Tape& tape, const nn::Tensor& x,
                             const nn::Tensor& a) const override;
  std::vector<models::NamedParam> parameters() override;
  std::vector<models::NamedParam> parameters() const override;
  std::string arch() const override { return "mfl-fo"; }

  nn::Tensor conv1_w, conv2_w, conv3_w, lin1_w, lin1_b, lin2_w, lin2_b;
};

// Trains both convolution variants on the dataset, optimizes the test set
// with each, and reports the comparison with the first-order variant as
// baseline.
EvalReport ablation_layer(const std::vector<datagen::TrajectorySample>& dataset,
                          const std::vector<Deployment>& testset, const ExperimentConfig& cfg,
                          const TrainHyper& hyper);

// ---------------------------------------------------------------------------
// Command line

int run_cli(int argc, const char* const* argv);

}  // namespace relayopt::harness
