#include <doctest.h>

#include <functional>
#include <random>

#include "oracle.hpp"
#include "relayopt/nn.hpp"

using namespace relayopt;
using nn::Tape;
using nn::Tensor;

namespace {

Tensor random_tensor(std::mt19937_64& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
  return Tensor::uniform(r, c, lo, hi, rng);
}

// Checks d(weighted sum of op output)/d(each input entry) against central
// finite differences. builder maps leaf ids to the op output id.
void check_gradients(const std::vector<Tensor>& inputs,
                     const std::function<int(Tape&, const std::vector<int>&)>& builder,
                     double tol = 1e-4, double h = 1e-5) {
  Tape probe;
  std::vector<int> probe_ids;
  for (const auto& t : inputs) probe_ids.push_back(probe.leaf(t));
  const Tensor& out_shape = probe.value(builder(probe, probe_ids));

  // Fixed projection weights make the output scalar.
  std::mt19937_64 wrng(991);
  const Tensor w = random_tensor(wrng, out_shape.rows, out_shape.cols, -1.0, 1.0);

  auto scalar_of = [&](const std::vector<Tensor>& points) {
    Tape tape;
    std::vector<int> ids;
    for (const auto& t : points) ids.push_back(tape.leaf(t));
    const int out = builder(tape, ids);
    return tape.value(tape.sum_all(tape.mul(out, tape.leaf(w)))).value();
  };

  // Analytic gradients in one pass.
  Tape tape;
  std::vector<int> ids;
  for (const auto& t : inputs) ids.push_back(tape.leaf(t));
  const int out = builder(tape, ids);
  tape.backward(tape.sum_all(tape.mul(out, tape.leaf(w))));

  for (size_t which = 0; which < inputs.size(); ++which) {
    auto f = [&](const std::vector<double>& x) {
      std::vector<Tensor> moved = inputs;
      moved[which].data = x;
      return scalar_of(moved);
    };
    const auto fd = oracle::finite_diff(f, inputs[which].data, h);
    CHECK(oracle::max_rel_err(tape.grad(ids[which]).data, fd, 1e-3) <= tol);
  }
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("activation values") {
    Tape t;
    CHECK(t.value(t.gelu(t.constant(0.0))).value() == 0.0);
    CHECK(t.value(t.softplus(t.constant(0.0))).value() == doctest::Approx(std::log(2.0)));
    CHECK(t.value(t.relu(t.constant(-1.5))).value() == 0.0);
    CHECK(t.value(t.tanh(t.constant(0.0))).value() == 0.0);
    // gelu approaches identity for large inputs
    CHECK(t.value(t.gelu(t.constant(10.0))).value() == doctest::Approx(10.0).epsilon(1e-9));
  }

  TEST_CASE("loss values") {
    Tape t;
    CHECK(t.value(t.huber_mean(t.constant(0.5))).value() == doctest::Approx(0.125));
    CHECK(t.value(t.huber_mean(t.constant(2.0))).value() == doctest::Approx(1.5));
    std::mt19937_64 rng(5);
    const Tensor x = random_tensor(rng, 3, 4);
    const int a = t.leaf(x);
    const int b = t.leaf(x);
    CHECK(t.value(nn::mse(t, a, b)).value() == 0.0);
    CHECK(t.value(nn::frobenius_mse(t, a, b)).value() == 0.0);
  }

  TEST_CASE("every primitive passes finite-difference gradient checks") {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor a = random_tensor(rng, 3, 4);
      const Tensor b = random_tensor(rng, 3, 4);
      const Tensor row = random_tensor(rng, 1, 4);
      const Tensor scalar = random_tensor(rng, 1, 1, 0.5, 2.0);
      const Tensor m1 = random_tensor(rng, 3, 5);
      const Tensor m2 = random_tensor(rng, 5, 4);
      const Tensor pos = random_tensor(rng, 3, 4, 0.5, 3.0);

      check_gradients({a, b}, [](Tape& t, const std::vector<int>& v) { return t.add(v[0], v[1]); });
      check_gradients({a, row}, [](Tape& t, const std::vector<int>& v) { return t.add(v[0], v[1]); });
      check_gradients({a, scalar}, [](Tape& t, const std::vector<int>& v) { return t.add(v[0], v[1]); });
      check_gradients({a, b}, [](Tape& t, const std::vector<int>& v) { return t.sub(v[0], v[1]); });
      check_gradients({a, b}, [](Tape& t, const std::vector<int>& v) { return t.mul(v[0], v[1]); });
      check_gradients({a, pos}, [](Tape& t, const std::vector<int>& v) { return t.div(v[0], v[1]); });
      check_gradients({a, scalar}, [](Tape& t, const std::vector<int>& v) { return t.div(v[0], v[1]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.neg(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.scalar_mul(v[0], -1.7); });
      check_gradients({m1, m2}, [](Tape& t, const std::vector<int>& v) { return t.matmul(v[0], v[1]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.row_sum(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.sum_all(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.mean_all(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.global_add_pool(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.graph_size_norm(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.slice_rows(v[0], 1, 3); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.gelu(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.tanh(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.softplus(v[0]); });
      check_gradients({pos}, [](Tape& t, const std::vector<int>& v) { return t.exp(v[0]); });
      check_gradients({pos}, [](Tape& t, const std::vector<int>& v) { return t.log(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.square(v[0]); });
      check_gradients({a}, [](Tape& t, const std::vector<int>& v) { return t.row_normalize(v[0]); });

      // Kinked ops away from their kinks.
      Tensor far = a;
      for (auto& v : far.data)
        if (std::abs(v) < 1e-2) v += 0.05;
      check_gradients({far}, [](Tape& t, const std::vector<int>& v) { return t.relu(v[0]); });
      Tensor hub = a;
      for (auto& v : hub.data)
        if (std::abs(std::abs(v) - 1.0) < 1e-2) v += 0.05;
      check_gradients({hub}, [](Tape& t, const std::vector<int>& v) { return t.huber_mean(v[0]); });
      Tensor gap1 = a, gap2 = b;
      for (size_t i = 0; i < gap1.data.size(); ++i)
        if (std::abs(gap1.data[i] - gap2.data[i]) < 1e-2) gap1.data[i] += 0.05;
      check_gradients({gap1, gap2}, [](Tape& t, const std::vector<int>& v) { return t.min2(v[0], v[1]); });
      check_gradients({gap1, gap2}, [](Tape& t, const std::vector<int>& v) { return t.max2(v[0], v[1]); });

      // Sort pool with well-separated keys so the permutation is stable under h.
      Tensor keys = random_tensor(rng, 4, 3);
      for (int r = 0; r < 4; ++r) keys.at(r, 2) += 3.0 * r;
      check_gradients({keys}, [](Tape& t, const std::vector<int>& v) { return t.global_sort_pool(v[0], 2); });
    }
  }

  TEST_CASE("graph conv structure") {
    std::mt19937_64 rng(77);
    const Tensor x = random_tensor(rng, 4, 3);
    const Tensor w1 = random_tensor(rng, 3, 5);
    const Tensor w2 = random_tensor(rng, 3, 5);

    // zero adjacency: no messages, output is the root transform
    Tape t1;
    const int out1 =
        nn::graph_conv(t1, t1.leaf(x), t1.leaf(Tensor(4, 4)), t1.leaf(w1), t1.leaf(w2));
    Tape t2;
    const int out2 = t2.matmul(t2.leaf(x), t2.leaf(w1));
    for (size_t i = 0; i < t1.value(out1).data.size(); ++i)
      CHECK(t1.value(out1).data[i] == doctest::Approx(t2.value(out2).data[i]).epsilon(1e-12));

    // identity root, zero neighbor weight: identity map
    Tape t3;
    Tensor eye(3, 3);
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Tensor a(4, 4);
    a.at(0, 1) = a.at(1, 0) = 0.7;
    const int out3 =
        nn::graph_conv(t3, t3.leaf(x), t3.leaf(a), t3.leaf(eye), t3.leaf(Tensor(3, 3)));
    for (size_t i = 0; i < x.data.size(); ++i)
      CHECK(t3.value(out3).data[i] == doctest::Approx(x.data[i]).epsilon(1e-12));
  }

  TEST_CASE("graph conv gradients w.r.t. every input") {
    std::mt19937_64 rng(79);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor x = random_tensor(rng, 4, 3);
      Tensor a = random_tensor(rng, 4, 4, 0.0, 1.0);
      for (int i = 0; i < 4; ++i) a.at(i, i) = 0.0;
      const Tensor w1 = random_tensor(rng, 3, 5);
      const Tensor w2 = random_tensor(rng, 3, 5);
      check_gradients({x, a, w1, w2}, [](Tape& t, const std::vector<int>& v) {
        return nn::graph_conv(t, v[0], v[1], v[2], v[3]);
      });
    }
  }

  TEST_CASE("pooling values") {
    Tape t;
    Tensor ones(5, 3, 1.0);
    const Tensor pooled = t.value(t.global_add_pool(t.leaf(ones)));
    for (double v : pooled.data) CHECK(v == 5.0);

    // already sorted descending by last channel: k = n flattens the input
    Tensor sorted(3, 2);
    sorted.at(0, 0) = 9;
    sorted.at(0, 1) = 3;
    sorted.at(1, 0) = 8;
    sorted.at(1, 1) = 2;
    sorted.at(2, 0) = 7;
    sorted.at(2, 1) = 1;
    const Tensor flat = t.value(t.global_sort_pool(t.leaf(sorted), 3));
    CHECK(flat.cols == 6);
    for (int i = 0; i < 6; ++i) CHECK(flat.data[i] == sorted.data[i]);

    CHECK_THROWS_AS(t.global_sort_pool(t.leaf(sorted), 4), ShapeError);
  }

  TEST_CASE("pooling is invariant under row permutations") {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor(rng, 6, 4);
      std::vector<int> perm{0, 1, 2, 3, 4, 5};
      std::shuffle(perm.begin(), perm.end(), rng);
      Tensor shuffled(6, 4);
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 4; ++c) shuffled.at(r, c) = x.at(perm[r], c);

      Tape t;
      const Tensor add1 = t.value(t.global_add_pool(t.leaf(x)));
      const Tensor add2 = t.value(t.global_add_pool(t.leaf(shuffled)));
      const Tensor sort1 = t.value(t.global_sort_pool(t.leaf(x), 4));
      const Tensor sort2 = t.value(t.global_sort_pool(t.leaf(shuffled), 4));
      for (size_t i = 0; i < add1.data.size(); ++i)
        CHECK(add1.data[i] == doctest::Approx(add2.data[i]).epsilon(1e-12));
      for (size_t i = 0; i < sort1.data.size(); ++i) CHECK(sort1.data[i] == sort2.data[i]);
    }
  }

  TEST_CASE("graph size norm") {
    Tape t;
    Tensor x(4, 2, 2.0);
    const Tensor out = t.value(t.graph_size_norm(t.leaf(x)));
    for (double v : out.data) CHECK(v == doctest::Approx(1.0));
    Tensor single(1, 2, 3.0);
    const Tensor same = t.value(t.graph_size_norm(t.leaf(single)));
    for (double v : same.data) CHECK(v == 3.0);
  }

  TEST_CASE("fan-out accumulation is exact") {
    // d/dx of x*x + x^3 at 1.7 equals 2x + 3x^2 to machine precision.
    Tape t;
    const int x = t.leaf(Tensor::scalar(1.7));
    const int fx = t.mul(x, x);
    const int gx = t.mul(t.mul(x, x), x);
    t.backward(t.add(fx, gx));
    const double expected = 2.0 * 1.7 + 3.0 * 1.7 * 1.7;
    CHECK(t.grad(x).value() == doctest::Approx(expected).epsilon(1e-15));
  }

  TEST_CASE("gradients accumulate over reuse of a tensor") {
    Tape t;
    std::mt19937_64 rng(89);
    const Tensor x = random_tensor(rng, 2, 2);
    const int id = t.leaf(x);
    const int out = t.sum_all(t.add(id, id));
    t.backward(out);
    for (double g : t.grad(id).data) CHECK(g == 2.0);
  }

  TEST_CASE("grad_wrt_inputs on simple networks") {
    // add-pool of the first feature column: ones in that column, zero elsewhere
    std::mt19937_64 rng(97);
    const Tensor x = random_tensor(rng, 5, 3);
    Tensor a = random_tensor(rng, 5, 5, 0.0, 1.0);
    for (int i = 0; i < 5; ++i) a.at(i, i) = 0.0;
    {
      Tape t;
      const int xid = t.leaf(x);
      const int aid = t.leaf(a);
      Tensor pick(3, 1);
      pick.at(0, 0) = 1.0;
      const int out = t.sum_all(t.matmul(xid, t.leaf(pick)));
      const auto [dx, da] = nn::grad_wrt_inputs(t, out, xid, aid);
      for (int r = 0; r < 5; ++r) {
        CHECK(dx.at(r, 0) == 1.0);
        CHECK(dx.at(r, 1) == 0.0);
        CHECK(dx.at(r, 2) == 0.0);
      }
      for (double v : da.data) CHECK(v == 0.0);
    }
    {
      // sum of off-diagonal entries of A
      Tape t;
      const int xid = t.leaf(x);
      const int aid = t.leaf(a);
      Tensor mask(5, 5, 1.0);
      for (int i = 0; i < 5; ++i) mask.at(i, i) = 0.0;
      const int out = t.sum_all(t.mul(aid, t.leaf(mask)));
      const auto [dx, da] = nn::grad_wrt_inputs(t, out, xid, aid);
      for (double v : dx.data) CHECK(v == 0.0);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(da.at(i, j) == (i == j ? 0.0 : 1.0));
    }
    {
      // non-scalar outputs are rejected
      Tape t;
      const int xid = t.leaf(x);
      const int aid = t.leaf(a);
      CHECK_THROWS_AS(nn::grad_wrt_inputs(t, xid, xid, aid), ShapeError);
    }
  }

  TEST_CASE("adam behavior") {
    // zero gradient leaves parameters untouched
    Tensor p(2, 2, 1.0);
    nn::Adam opt({.learning_rate = 0.1});
    opt.step({&p}, {Tensor(2, 2)});
    for (double v : p.data) CHECK(v == 1.0);

    // first step moves by about the learning rate regardless of magnitude
    Tensor q(1, 1, 0.0);
    nn::Adam opt2({.learning_rate = 0.05});
    Tensor g(1, 1);
    g.data[0] = 1234.5;
    opt2.step({&q}, {g});
    CHECK(q.data[0] == doctest::Approx(-0.05).epsilon(1e-6));

    // quadratic descent is monotone while the step stays well inside the basin
    Tensor w(1, 1);
    w.data[0] = 3.0;
    nn::Adam opt3({.learning_rate = 0.01});
    double prev_loss = w.data[0] * w.data[0];
    for (int i = 0; i < 100; ++i) {
      Tensor grad(1, 1);
      grad.data[0] = 2.0 * w.data[0];
      opt3.step({&w}, {grad});
      const double loss = w.data[0] * w.data[0];
      CHECK(loss < prev_loss);
      prev_loss = loss;
    }

    // and a longer run with a larger rate reaches the minimum
    Tensor w2(1, 1);
    w2.data[0] = 3.0;
    nn::Adam opt4({.learning_rate = 0.1});
    for (int i = 0; i < 500; ++i) {
      Tensor grad(1, 1);
      grad.data[0] = 2.0 * w2.data[0];
      opt4.step({&w2}, {grad});
    }
    CHECK(w2.data[0] * w2.data[0] < 1e-2);
  }

  TEST_CASE("shape errors") {
    Tape t;
    std::mt19937_64 rng(3);
    const int a = t.leaf(random_tensor(rng, 2, 3));
    const int b = t.leaf(random_tensor(rng, 3, 2));
    CHECK_THROWS_AS(t.add(a, b), ShapeError);
    CHECK_THROWS_AS(t.matmul(a, a), ShapeError);
    CHECK_THROWS_AS(t.backward(a), ShapeError);
  }
}
