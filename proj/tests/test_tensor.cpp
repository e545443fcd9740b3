#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "semcom/error.hpp"
#include "semcom/gradcheck.hpp"
#include "semcom/tensor.hpp"
#include "support/test_util.hpp"

using namespace semcom;

TEST_CASE("matmul identity and unit selection") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor c = matmul(eye, a);
  CHECK(c.data() == a.data());

  Tensor row = Tensor::from_data({1, 2}, {1, 0});
  Tensor col = Tensor::from_data({2, 1}, {2, 5});
  CHECK(matmul(row, col).value() == doctest::Approx(2.0));
}

TEST_CASE("matmul rejects mismatched shapes, naming both") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum(A*B) matches finite differences") {
  Rng rng(11);
  std::vector<Tensor> inputs = {testutil::rand_tensor({3, 4}, rng),
                                testutil::rand_tensor({4, 2}, rng)};
  const double err = max_relative_gradient_error(
      inputs, [](const std::vector<Tensor>& in) { return sum_all(matmul(in[0], in[1])); },
      1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax fixtures") {
  Tensor flat = softmax(Tensor::from_data({3}, {0, 0, 0}), 0);
  for (double v : flat.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Tensor big = softmax(Tensor::from_data({2}, {1000.0, 0.0}), 0);
  CHECK(std::isfinite(big.data()[0]));
  CHECK(big.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big.data()[1] == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(5);
  Tensor x = testutil::rand_tensor({4}, rng, -2, 2);
  Tensor y = softmax(x, 0);
  double sum = 0.0;
  for (double v : y.data()) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-12);

  std::vector<Tensor> inputs = {x};
  const double err = max_relative_gradient_error(
      inputs,
      [](const std::vector<Tensor>& in) {
        Tensor proj = Tensor::from_data({4}, {0.3, -0.7, 1.1, 0.4});
        return sum_all(mul(softmax(in[0], 0), proj));
      },
      1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("layer_norm fixtures") {
  Tensor gain = Tensor::full({3}, 1.0);
  Tensor bias = Tensor::zeros({3});

  Tensor constant = layer_norm(Tensor::from_data({1, 3}, {5, 5, 5}), gain, bias, 1e-6);
  for (double v : constant.data()) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));

  Tensor row = layer_norm(Tensor::from_data({1, 3}, {1, 2, 3}), gain, bias, 1e-12);
  const double r = std::sqrt(1.5);
  CHECK(row.data()[0] == doctest::Approx(-r).epsilon(1e-6));
  CHECK(row.data()[1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(row.data()[2] == doctest::Approx(r).epsilon(1e-6));

  Rng rng(7);
  std::vector<Tensor> inputs = {testutil::rand_tensor({4, 5}, rng),
                                testutil::rand_tensor({5}, rng, 0.5, 1.5),
                                testutil::rand_tensor({5}, rng, -0.5, 0.5)};
  Tensor proj = testutil::rand_tensor({4, 5}, rng);
  const double err = max_relative_gradient_error(
      inputs,
      [proj](const std::vector<Tensor>& in) {
        return sum_all(mul(layer_norm(in[0], in[1], in[2]), proj));
      },
      1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("conv1d fixtures") {
  // k=1 identity kernel
  Tensor x = Tensor::from_data({1, 3}, {1, 2, 3});
  Tensor k1 = Tensor::from_data({1, 1, 1}, {1});
  Tensor b0 = Tensor::zeros({1});
  CHECK(conv1d(x, k1, b0).data() == x.data());

  // hand cross-correlation with zero pads
  Tensor k3 = Tensor::from_data({1, 1, 3}, {1, 0, -1});
  Tensor y = conv1d(x, k3, b0, PadMode::kSame);
  CHECK(y.data()[0] == doctest::Approx(-2.0));
  CHECK(y.data()[1] == doctest::Approx(-2.0));
  CHECK(y.data()[2] == doctest::Approx(2.0));

  CHECK_THROWS_AS(conv1d(x, Tensor::zeros({1, 1, 2}), b0, PadMode::kSame), ConfigError);

  Rng rng(13);
  std::vector<Tensor> inputs = {testutil::rand_tensor({2, 3, 5}, rng),
                                testutil::rand_tensor({2, 3, 3}, rng),
                                testutil::rand_tensor({2}, rng)};
  Tensor proj = testutil::rand_tensor({2, 2, 5}, rng);
  const double err = max_relative_gradient_error(
      inputs,
      [proj](const std::vector<Tensor>& in) {
        return sum_all(mul(conv1d(in[0], in[1], in[2], PadMode::kSame), proj));
      },
      1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("causal conv reads nothing from the future") {
  Rng rng(17);
  Tensor x = testutil::rand_tensor({1, 2, 6}, rng);
  Tensor k = testutil::rand_tensor({2, 2, 3}, rng);
  Tensor b = testutil::rand_tensor({2}, rng);
  Tensor y = conv1d(x, k, b, PadMode::kCausalLeft);

  // Perturb the last position; outputs before it must not move.
  std::vector<double> bumped = x.data();
  bumped[5] += 0.5;
  bumped[11] += 0.5;
  Tensor y2 = conv1d(Tensor::from_data({1, 2, 6}, std::move(bumped)), k, b,
                     PadMode::kCausalLeft);
  for (int c = 0; c < 2; ++c) {
    for (int t = 0; t < 5; ++t) {
      CHECK(y.at({0, c, t}) == y2.at({0, c, t}));
    }
  }
}

TEST_CASE("assorted elementwise fixtures") {
  CHECK(sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));
  CHECK(global_maxpool(Tensor::from_data({3}, {3, 1, 2})).value() == doctest::Approx(3.0));

  // confident one-hot prediction has ~zero loss
  IdMatrix targets;
  targets.rows = 1;
  targets.cols = 1;
  targets.ids = {2};
  Tensor logits = Tensor::from_data({1, 1, 3}, {-100, -100, 100});
  Tensor loss = cross_entropy_with_logits(logits, targets, {1});
  CHECK(loss.value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("diamond-shaped graph accumulates both contributions") {
  Rng rng(23);
  std::vector<Tensor> inputs = {testutil::rand_tensor({3, 3}, rng, 0.5, 1.5)};
  const double err = max_relative_gradient_error(
      inputs,
      [](const std::vector<Tensor>& in) {
        Tensor y = sigmoid(in[0]);
        return sum_all(mul(y, y));  // y consumed twice
      },
      1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("forward is bitwise deterministic for a fixed seed") {
  auto run = []() {
    Rng rng(99);
    Tensor a = Tensor::randn({4, 4}, rng);
    Tensor b = Tensor::randn({4, 4}, rng);
    return sum_all(matmul(sigmoid(a), softmax(b, 1))).value();
  };
  const double v1 = run();
  const double v2 = run();
  CHECK(v1 == v2);
}

TEST_CASE("full randomized gradient suite passes at 1e-4") {
  GradCheckOptions opts;
  const auto results = run_gradient_suite(opts);
  CHECK(results.size() > 50);
  for (const auto& r : results) {
    INFO(r.name, " err=", r.max_rel_err);
    CHECK(r.pass);
  }
}

TEST_CASE("straight_through passes gradients unchanged") {
  Rng rng(31);
  Tensor x = testutil::rand_tensor({2, 3}, rng);
  Tensor replacement = testutil::rand_tensor({2, 3}, rng);
  Tape tape;
  Tensor xt = tape.watch(x);
  Tensor proj = testutil::rand_tensor({2, 3}, rng);
  Tensor out = sum_all(mul(straight_through(xt, replacement), proj));
  tape.backward(out);
  const auto gx = tape.grad(xt);
  for (std::size_t i = 0; i < proj.data().size(); ++i) {
    CHECK(gx.data()[i] == doctest::Approx(proj.data()[i]));
  }
}

TEST_CASE("immutability: ops leave inputs untouched and tensors share buffers") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  const auto before = a.data();
  Tensor b = add(a, a);
  CHECK(a.data() == before);
  Tensor view = reshape(a, {2, 1});
  CHECK(view.shares_data(a));
}
