#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oracle.hpp"
#include "relayopt/flow.hpp"
#include "relayopt/harness.hpp"

using namespace relayopt;
using harness::ExperimentConfig;
using models::Tensor;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

io::TrajectoryFile tiny_trajectories(const std::string& method, std::vector<double> finals) {
  io::TrajectoryFile file;
  file.method = method;
  for (size_t i = 0; i < finals.size(); ++i) {
    optimize::Trajectory t;
    Deployment d;
    d.positions = {{-4.5, 0}, {0, 0}, {4.5, 0}};
    d.jammer = {0, 4};
    t.deployments = {d, d};
    t.max_flows = {0.0, finals[i]};
    t.tags = {"-", "-"};
    file.records.push_back({static_cast<int>(i), std::move(t)});
  }
  return file;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("test-set sampling respects the guard zones and the seed") {
    ExperimentConfig cfg;
    cfg.seed = 7;
    const auto deps = harness::gen_testset(cfg, 200);
    REQUIRE(deps.size() == 200);
    for (const auto& d : deps) {
      CHECK(dist(d.jammer, cfg.source) > cfg.guard_radius);
      CHECK(dist(d.jammer, cfg.dest) > cfg.guard_radius);
      CHECK(std::abs(d.jammer.x) <= cfg.arena_halfwidth);
      CHECK(std::abs(d.jammer.y) <= cfg.arena_halfwidth);
      // fixed endpoints and relay initialization
      CHECK(d.positions[0].x == cfg.source.x);
      CHECK(d.positions[5].x == cfg.dest.x);
      CHECK(d.positions[1].x == -2.7);
    }
    const auto again = harness::gen_testset(cfg, 200);
    for (size_t i = 0; i < deps.size(); ++i) {
      CHECK(deps[i].jammer.x == again[i].jammer.x);
      CHECK(deps[i].jammer.y == again[i].jammer.y);
    }
    // train stream is disjoint from the test stream
    const auto train = harness::gen_trainset(cfg, 200);
    bool identical = true;
    for (size_t i = 0; i < deps.size(); ++i)
      identical = identical && deps[i].jammer.x == train[i].jammer.x;
    CHECK(!identical);
  }

  TEST_CASE("rejection-sampling acceptance rate matches the geometry") {
    ExperimentConfig cfg;
    // Guard disks of radius 3 at (+-4.5, 0), clipped by the arena edge.
    const double r = cfg.guard_radius;
    const double cut = cfg.arena_halfwidth - 4.5;  // distance from disk center to the edge
    const double segment = r * r * std::acos(cut / r) - cut * std::sqrt(r * r - cut * cut);
    const double disk_inside = std::numbers::pi * r * r - segment;
    const double arena = 4.0 * cfg.arena_halfwidth * cfg.arena_halfwidth;
    const double p_accept = (arena - 2.0 * disk_inside) / arena;

    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> coord(-cfg.arena_halfwidth, cfg.arena_halfwidth);
    const int draws = 100000;
    int accepted = 0;
    for (int i = 0; i < draws; ++i)
      if (harness::jammer_admissible(cfg, {coord(rng), coord(rng)})) ++accepted;
    const double p_hat = static_cast<double>(accepted) / draws;
    const double sigma = std::sqrt(p_accept * (1.0 - p_accept) / draws);
    CHECK(std::abs(p_hat - p_accept) <= 3.0 * sigma);
  }

  TEST_CASE("truncated mean") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(harness::truncated_mean(v, 0.10) == doctest::Approx(5.5));  // drops 1 and 10
    CHECK(harness::truncated_mean(v, 0.0) == doctest::Approx(5.5));
    CHECK(harness::truncated_mean({2.0}, 0.10) == doctest::Approx(2.0));
    CHECK_THROWS_AS(harness::truncated_mean({}, 0.1), InputError);
    CHECK_THROWS_AS(harness::truncated_mean({1.0, 2.0}, 0.5), InputError);
  }

  TEST_CASE("histograms cover the observed range") {
    const auto h = harness::make_histogram({0.0, 0.5, 1.0, 1.0, 2.0}, 4);
    REQUIRE(h.edges.size() == 5);
    CHECK(h.edges.front() == 0.0);
    CHECK(h.edges.back() == 2.0);
    int total = 0;
    for (int c : h.counts) total += c;
    CHECK(total == 5);
    // degenerate range still counts everything once
    const auto d = harness::make_histogram({3.0, 3.0, 3.0}, 4);
    CHECK(d.counts[0] == 3);
  }

  TEST_CASE("evaluation against a baseline") {
    std::vector<io::TrajectoryFile> files;
    files.push_back(tiny_trajectories("wcc", {1.0, 2.0, 4.0}));
    files.push_back(tiny_trajectories("hybrid", {2.0, 1.0, 8.0}));
    const auto rep = harness::evaluate(files, "wcc");
    REQUIRE(rep.stats.size() == 2);

    for (const auto& st : rep.stats) {
      if (st.method == "wcc") {
        CHECK(st.wins == 0);
        CHECK(st.avg_diff == 0.0);
        CHECK(st.avg_rel_diff == 0.0);
        CHECK(st.trunc_avg_diff == 0.0);
      } else {
        CHECK(st.method == "hybrid");
        CHECK(st.wins == 2);
        CHECK(st.avg_diff == doctest::Approx((1.0 - 1.0 + 4.0) / 3.0));
        CHECK(st.avg_rel_diff == doctest::Approx((1.0 - 0.5 + 1.0) / 3.0));
      }
      int total = 0;
      for (int c : st.diff_hist.counts) total += c;
      CHECK(total == 3);
    }
  }

  TEST_CASE("evaluation rejects mismatched deployment sets") {
    std::vector<io::TrajectoryFile> files;
    files.push_back(tiny_trajectories("wcc", {1.0, 2.0}));
    files.push_back(tiny_trajectories("mfl", {1.0, 2.0, 3.0}));
    CHECK_THROWS_AS(harness::evaluate(files, "wcc"), InputError);
    std::vector<io::TrajectoryFile> missing;
    missing.push_back(tiny_trajectories("mfl", {1.0}));
    CHECK_THROWS_AS(harness::evaluate(missing, "wcc"), InputError);
  }

  TEST_CASE("synthetic functions and their analytic gradients") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1.0, 4.0);
    Tensor x(3, 2);
    for (auto& v : x.data) v = u(rng);

    CHECK(harness::synth_gradient(harness::SynthFn::kF1, x).at(0, 0) ==
          doctest::Approx(2.0 * x.at(0, 0)));

    for (auto fn : {harness::SynthFn::kF1, harness::SynthFn::kF2}) {
      auto f = [&](const std::vector<double>& flat) {
        Tensor moved = x;
        moved.data = flat;
        return harness::synth_value(fn, moved);
      };
      const auto fd = oracle::finite_diff(f, x.data, 1e-5);
      const auto analytic = harness::synth_gradient(fn, x);
      for (size_t i = 0; i < fd.size(); ++i)
        CHECK(analytic.data[i] == doctest::Approx(fd[i]).epsilon(1e-8));
    }
  }

  TEST_CASE("training memorizes a dataset of identical samples") {
    ExperimentConfig cfg;
    datagen::TrajectorySample s;
    s.dep.positions = {{-4.5, 0}, {-1.0, 0.5}, {1.0, -0.5}, {4.5, 0}};
    s.dep.jammer = {0, 3};
    s.label = flow::max_flow(channel::adjacency(cfg.channel, s.dep), 0, 3).value;
    s.directions = Mat(2, 2);
    s.directions.at(0, 0) = 1.0;
    s.directions.at(1, 1) = 1.0;
    s.valid_direction = true;
    const std::vector<datagen::TrajectorySample> dataset(50, s);

    harness::TrainHyper hyper;
    hyper.learning_rate = 2e-3;
    hyper.epochs = 120;
    hyper.batch = 50;
    models::MflModel mfl(3);
    const auto result = harness::train_mfl(dataset, mfl, cfg.channel, hyper);
    CHECK(result.epoch_losses.back() < 1e-6);

    models::GlModel gl(4);
    const auto gl_result = harness::train_gl(dataset, gl, cfg.channel, hyper);
    CHECK(gl_result.epoch_losses.back() < 1e-4);
  }

  TEST_CASE("direction training skips flagged samples") {
    ExperimentConfig cfg;
    datagen::TrajectorySample s;
    s.dep.positions = {{-4.5, 0}, {-1.0, 0.5}, {1.0, -0.5}, {4.5, 0}};
    s.dep.jammer = {0, 3};
    s.label = 1.0;
    s.directions = Mat(2, 2);
    s.valid_direction = false;
    CHECK_THROWS_AS(
        harness::train_gl({s}, *std::make_unique<models::GlModel>(1), cfg.channel,
                          harness::TrainHyper{}),
        InputError);
  }

  TEST_CASE("first-order convolution variant is permutation invariant") {
    harness::FirstOrderMflModel model(9);
    ExperimentConfig cfg;
    Deployment d;
    d.positions = {{-4.5, 0}, {-2.0, 1.0}, {0.5, -1.0}, {2.0, 0.5}, {3.0, -0.5}, {4.5, 0}};
    d.jammer = {0, 3};
    const Tensor x = models::build_features(d);
    const Tensor a = models::adjacency_tensor(cfg.channel, d);
    const double base = models::mfl_value(model, x, a);

    std::mt19937_64 rng(11);
    std::vector<int> relays{1, 2, 3, 4};
    for (int trial = 0; trial < 20; ++trial) {
      std::shuffle(relays.begin(), relays.end(), rng);
      std::vector<int> perm{0};
      perm.insert(perm.end(), relays.begin(), relays.end());
      perm.push_back(5);
      Tensor px(6, 3), pa(6, 6);
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 3; ++c) px.at(r, c) = x.at(perm[r], c);
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) pa.at(r, c) = a.at(perm[r], perm[c]);
      CHECK(std::abs(models::mfl_value(model, px, pa) - base) <= 1e-10);
    }
  }

  TEST_CASE("deployment files round trip") {
    ExperimentConfig cfg;
    cfg.seed = 21;
    const auto deps = harness::gen_testset(cfg, 10);
    const std::string path = temp_path("relayopt_testset_roundtrip.txt");
    io::write_deployments(path, deps);
    const auto back = io::read_deployments(path);
    REQUIRE(back.size() == deps.size());
    for (size_t i = 0; i < deps.size(); ++i) {
      CHECK(back[i].jammer.x == deps[i].jammer.x);
      for (int k = 0; k < 6; ++k) {
        CHECK(back[i].positions[k].x == deps[i].positions[k].x);
        CHECK(back[i].positions[k].y == deps[i].positions[k].y);
      }
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("command line flows") {
    namespace fs = std::filesystem;
    const std::string dir = temp_path("relayopt_cli_test");
    fs::create_directories(dir);
    const std::string testset = dir + "/testset.txt";

    auto run = [](std::initializer_list<const char*> args) {
      std::vector<const char*> argv{"relayopt"};
      argv.insert(argv.end(), args.begin(), args.end());
      return harness::run_cli(static_cast<int>(argv.size()), argv.data());
    };

    // deterministic test-set generation
    CHECK(run({"gen-testset", "--count", "12", "--seed", "7", "--out", testset.c_str()}) == 0);
    const std::string first = slurp(testset);
    CHECK(run({"gen-testset", "--count", "12", "--seed", "7", "--out", testset.c_str()}) == 0);
    CHECK(slurp(testset) == first);

    // the max-flow utility agrees with the enumeration oracle
    CHECK(run({"maxflow", "--deployments", testset.c_str()}) == 0);
    const auto deps = io::read_deployments(testset);
    channel::ChannelParams p;
    for (const auto& d : deps) {
      const auto a = channel::adjacency(p, d);
      CHECK(flow::max_flow(a, 0, 5).value ==
            doctest::Approx(flow::brute_force_min_cut(a, 0, 5).value).epsilon(1e-9));
    }

    // trajectories + self-comparison report: all statistics zero
    const std::string traj = dir + "/wcc.traj";
    CHECK(run({"optimize", "wcc", "--deployments", testset.c_str(), "--out", traj.c_str(),
               "--steps", "5"}) == 0);
    const std::string report_dir = dir + "/report";
    CHECK(run({"evaluate", "--traj", traj.c_str(), "--baseline", "wcc", "--out-dir",
               report_dir.c_str()}) == 0);
    {
      std::ifstream in(report_dir + "/comparison.csv");
      std::string header, line;
      std::getline(in, header);
      std::getline(in, line);
      CHECK(line == "wcc,0,0,0,0,0");
    }

    // usage errors
    CHECK(run({"unknown-subcommand"}) == 2);
    CHECK(run({"maxflow", "--deployments", "/nonexistent/file.txt"}) == 3);
    CHECK(run({"optimize", "mfl", "--deployments", testset.c_str()}) == 3);  // missing checkpoint

    fs::remove_all(dir);
  }
}
