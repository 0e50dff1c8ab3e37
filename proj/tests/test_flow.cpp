#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "relayopt/flow.hpp"

using namespace relayopt;

namespace {

Mat random_symmetric(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> cap(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) a.at(i, j) = a.at(j, i) = cap(rng);
  return a;
}

double cut_sum(const Mat& a, const std::vector<int>& s_side) {
  std::vector<bool> in_s(a.rows, false);
  for (int i : s_side) in_s[i] = true;
  double c = 0.0;
  for (int i = 0; i < a.rows; ++i)
    if (in_s[i])
      for (int j = 0; j < a.cols; ++j)
        if (!in_s[j]) c += a.at(i, j);
  return c;
}

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("single edge") {
    Mat a(2, 2);
    a.at(0, 1) = a.at(1, 0) = 0.73;
    const auto r = flow::max_flow(a, 0, 1);
    CHECK(r.value == doctest::Approx(0.73).epsilon(1e-12));
    CHECK(r.cut_partition == std::vector<int>{0});
    CHECK(flow::brute_force_min_cut(a, 0, 1).value == doctest::Approx(0.73));
  }

  TEST_CASE("path bottleneck") {
    Mat a(3, 3);
    a.at(0, 1) = a.at(1, 0) = 3.0;
    a.at(1, 2) = a.at(2, 1) = 5.0;
    CHECK(flow::max_flow(a, 0, 2).value == doctest::Approx(3.0).epsilon(1e-12));
  }

  TEST_CASE("complete unit triangle has min cut 2") {
    Mat a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) a.at(i, j) = 1.0;
    CHECK(flow::brute_force_min_cut(a, 0, 2).value == doctest::Approx(2.0));
    CHECK(flow::max_flow(a, 0, 2).value == doctest::Approx(2.0));
  }

  TEST_CASE("max flow equals brute-force min cut on random graphs") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
      const Mat a = random_symmetric(rng, 6);
      const auto mf = flow::max_flow(a, 0, 5);
      const auto bf = flow::brute_force_min_cut(a, 0, 5);
      CHECK(std::abs(mf.value - bf.value) <= 1e-9);
    }
  }

  TEST_CASE("agreement also holds at n = 10") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 50; ++trial) {
      const Mat a = random_symmetric(rng, 10);
      CHECK(std::abs(flow::max_flow(a, 0, 9).value -
                     flow::brute_force_min_cut(a, 0, 9).value) <= 1e-9);
    }
  }

  TEST_CASE("returned cut is a certificate") {
    std::mt19937_64 rng(107);
    for (int trial = 0; trial < 200; ++trial) {
      const Mat a = random_symmetric(rng, 6);
      const auto r = flow::max_flow(a, 0, 5);
      // source in S, destination out
      CHECK(std::find(r.cut_partition.begin(), r.cut_partition.end(), 0) != r.cut_partition.end());
      CHECK(std::find(r.cut_partition.begin(), r.cut_partition.end(), 5) == r.cut_partition.end());
      CHECK(std::abs(cut_sum(a, r.cut_partition) - r.value) <= 1e-9);
    }
  }

  TEST_CASE("increasing a capacity never decreases the max flow") {
    std::mt19937_64 rng(109);
    std::uniform_int_distribution<int> pick(0, 5);
    std::uniform_real_distribution<double> bump(0.0, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
      const Mat a = random_symmetric(rng, 6);
      const double before = flow::max_flow(a, 0, 5).value;
      Mat b = a;
      int i = pick(rng), j = pick(rng);
      if (i == j) j = (j + 1) % 6;
      const double delta = bump(rng);
      b.at(i, j) += delta;
      b.at(j, i) += delta;
      CHECK(flow::max_flow(b, 0, 5).value >= before - 1e-12);
    }
  }

  TEST_CASE("lipschitz bound under edge perturbations") {
    std::mt19937_64 rng(113);
    std::uniform_int_distribution<int> pick(0, 5);
    std::uniform_real_distribution<double> delta(-0.5, 0.5);
    int checked = 0;
    while (checked < 1000) {
      const Mat a = random_symmetric(rng, 6);
      int i = pick(rng), j = pick(rng);
      if (i == j) continue;
      double d = delta(rng);
      if (a.at(i, j) + d < 0) d = -a.at(i, j);
      CHECK(flow::lipschitz_check(a, 0, 5, i, j, d, true));
      CHECK(flow::lipschitz_check(a, 0, 5, i, j, d, false));
      ++checked;
    }
  }

  TEST_CASE("zero perturbation changes nothing") {
    std::mt19937_64 rng(127);
    const Mat a = random_symmetric(rng, 6);
    CHECK(flow::lipschitz_check(a, 0, 5, 1, 2, 0.0));
  }

  TEST_CASE("input validation") {
    Mat a(4, 4);
    CHECK_THROWS_AS(flow::max_flow(a, 0, 0), InputError);
    a.at(1, 2) = -0.5;
    CHECK_THROWS_AS(flow::max_flow(a, 0, 3), InputError);
    Mat big(21, 21);
    CHECK_THROWS_AS(flow::brute_force_min_cut(big, 0, 20), SizeError);
  }
}
