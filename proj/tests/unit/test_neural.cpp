#include "support.hpp"

#include "vigor/error.hpp"
#include "vigor/nn/adam.hpp"
#include "vigor/nn/layers.hpp"
#include "vigor/nn/matrix.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

using namespace vigor;
using nn::Matrix;

namespace {

// sum(out * weights): a scalar loss whose upstream gradient is `weights`
double weighted_sum(const Matrix& out, const Matrix& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * weights.data()[i];
  return s;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// central difference of f with respect to value[i]
double central_difference(std::span<double> value, std::size_t i, const std::function<double()>& f, double h = 1e-5) {
  const double saved = value[i];
  value[i] = saved + h;
  const double up = f();
  value[i] = saved - h;
  const double down = f();
  value[i] = saved;
  return (up - down) / (2.0 * h);
}

} // namespace

TEST_SUITE("neural") {

TEST_CASE("matmul variants agree with a triple-loop oracle") {
  Rng rng(1);
  const Matrix a = testing::random_matrix(rng, 7, 5);
  const Matrix b = testing::random_matrix(rng, 5, 4);
  const Matrix c = testing::random_matrix(rng, 3, 5);
  const Matrix d = testing::random_matrix(rng, 7, 3);
  CHECK(testing::max_abs_diff(nn::matmul(a, b), testing::naive_matmul(a, b)) < 1e-12);
  CHECK(testing::max_abs_diff(nn::matmul_bt(a, c), testing::naive_matmul(a, testing::transpose(c))) < 1e-12);
  CHECK(testing::max_abs_diff(nn::matmul_at(a, d), testing::naive_matmul(testing::transpose(a), d)) < 1e-12);
  CHECK_THROWS_AS(nn::matmul(a, c), ShapeError);
}

TEST_CASE("hconcat and column_slice") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5}, {6}};
  const Matrix ab = nn::hconcat({&a, &b});
  CHECK(ab == Matrix{{1, 2, 5}, {3, 4, 6}});
  CHECK(nn::column_slice(ab, 1, 2) == Matrix{{2, 5}, {4, 6}});
  const Matrix tall(3, 1);
  CHECK_THROWS_AS(nn::hconcat({&a, &tall}), ShapeError);
}

TEST_CASE("linear forward: identity and analytic cases") {
  nn::LinearLayer identity(2, 2);
  identity.weight() = Matrix{{1, 0}, {0, 1}};
  CHECK(identity.forward(Matrix{{1, 2}, {3, 4}}) == Matrix{{1, 2}, {3, 4}});

  nn::LinearLayer layer(2, 2);
  layer.weight() = Matrix{{2, 0}, {0, 3}};
  layer.bias() = {1, 1};
  CHECK(layer.forward(Matrix{{1, 1}}) == Matrix{{3, 4}});
}

TEST_CASE("linear forward matches the matrix-multiply oracle") {
  Rng rng(2);
  nn::LinearLayer layer(5, 3);
  layer.init_glorot(rng);
  for (auto& b : layer.bias()) b = rng.normal();
  const Matrix input = testing::random_matrix(rng, 4, 5);
  Matrix expected = testing::naive_matmul(input, testing::transpose(layer.weight()));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) expected(i, j) += layer.bias()[j];
  CHECK(testing::max_abs_diff(layer.forward(input), expected) < 1e-12);
}

TEST_CASE("linear forward names both shapes on mismatch") {
  nn::LinearLayer layer(3, 2);
  try {
    layer.forward(Matrix(4, 5));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("4x5") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("linear backward") {
  SUBCASE("before forward is a state error") {
    nn::LinearLayer layer(2, 2);
    CHECK_THROWS_AS(layer.backward(Matrix(1, 2)), StateError);
  }
  SUBCASE("zero upstream gradient gives zero gradients") {
    Rng rng(3);
    nn::LinearLayer layer(3, 2);
    layer.init_glorot(rng);
    layer.forward(testing::random_matrix(rng, 4, 3));
    const Matrix grad_in = layer.backward(Matrix(4, 2));
    CHECK(grad_in == Matrix(4, 3));
    CHECK(layer.grad_weight() == Matrix(2, 3));
    CHECK(layer.grad_bias() == std::vector<double>{0, 0});
  }
  SUBCASE("scalar chain rule") {
    nn::LinearLayer layer(1, 1);
    layer.weight() = Matrix{{0.7}};
    layer.forward(Matrix{{2.5}});
    const Matrix grad_in = layer.backward(Matrix{{-1.5}});
    CHECK(layer.grad_weight()(0, 0) == doctest::Approx(-1.5 * 2.5).epsilon(1e-15));
    CHECK(layer.grad_bias()[0] == doctest::Approx(-1.5));
    CHECK(grad_in(0, 0) == doctest::Approx(-1.5 * 0.7));
  }
  SUBCASE("central differences") {
    Rng rng(4);
    nn::LinearLayer layer(4, 3);
    layer.init_glorot(rng);
    for (auto& b : layer.bias()) b = rng.normal();
    Matrix input = testing::random_matrix(rng, 5, 4);
    const Matrix upstream = testing::random_matrix(rng, 5, 3);
    layer.forward(input);
    const Matrix grad_in = layer.backward(upstream);
    auto loss = [&] { return weighted_sum(layer.forward(input), upstream); };
    for (std::size_t i = 0; i < layer.weight().size(); ++i)
      CHECK(relative_error(layer.grad_weight().data()[i], central_difference(layer.weight().data(), i, loss)) < 1e-4);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(relative_error(layer.grad_bias()[i], central_difference(layer.bias(), i, loss)) < 1e-4);
    for (std::size_t i = 0; i < input.size(); ++i)
      CHECK(relative_error(grad_in.data()[i], central_difference(input.data(), i, loss)) < 1e-4);
  }
}

TEST_CASE("widen_input appends zero columns and keeps outputs") {
  Rng rng(5);
  nn::LinearLayer layer(3, 2);
  layer.init_glorot(rng);
  const Matrix input = testing::random_matrix(rng, 4, 3);
  const Matrix before = layer.forward(input);
  layer.widen_input(1);
  CHECK(layer.in_dim() == 4);
  Matrix wide(4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) wide(i, j) = input(i, j);
    wide(i, 3) = rng.normal();
  }
  CHECK(testing::max_abs_diff(layer.forward(wide), before) < 1e-14);
}

TEST_CASE("relu and sigmoid") {
  nn::ReluLayer relu;
  CHECK(relu.forward(Matrix{{-1, 0, 2}}) == Matrix{{0, 0, 2}});
  CHECK(relu.backward(Matrix{{5, 5, 5}}) == Matrix{{0, 0, 5}});

  CHECK(nn::sigmoid(0.0) == 0.5);
  nn::SigmoidLayer sig;
  CHECK(sig.forward(Matrix{{0.0}})(0, 0) == 0.5);
  CHECK(sig.backward(Matrix{{2.0}})(0, 0) == doctest::Approx(0.25 * 2.0).epsilon(1e-15));

  const Matrix extreme = sig.forward(Matrix{{-800.0, 800.0}});
  CHECK(extreme(0, 0) == nn::kProbabilityClamp);
  CHECK(extreme(0, 1) == 1.0 - nn::kProbabilityClamp);
  CHECK(sig.backward(Matrix{{1.0, 1.0}}) == Matrix{{0.0, 0.0}});
  CHECK(nn::sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(nn::sigmoid(800.0)));
}

TEST_CASE("sigmoid backward matches central differences") {
  Rng rng(6);
  Matrix input = testing::random_matrix(rng, 3, 4, 2.0);
  const Matrix upstream = testing::random_matrix(rng, 3, 4);
  nn::SigmoidLayer sig;
  sig.forward(input);
  const Matrix grad = sig.backward(upstream);
  auto loss = [&] {
    nn::SigmoidLayer s;
    return weighted_sum(s.forward(input), upstream);
  };
  for (std::size_t i = 0; i < input.size(); ++i)
    CHECK(relative_error(grad.data()[i], central_difference(input.data(), i, loss)) < 1e-4);
}

TEST_CASE("batch norm forward") {
  SUBCASE("standardised batch passes through") {
    // columns already have mean 0 and population variance 1
    const Matrix input{{1, -1}, {-1, 1}, {1, 1}, {-1, -1}};
    nn::BatchNormLayer bn(2);
    const Matrix out = bn.forward(input, true);
    CHECK(testing::max_abs_diff(out, input) < 1e-5);
  }
  SUBCASE("eval mode with unit running stats is the identity up to epsilon") {
    nn::BatchNormLayer bn(3);
    const Matrix input{{0.5, -2.0, 3.0}};
    const Matrix out = bn.forward(input, false);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(out(0, j) == doctest::Approx(input(0, j) / std::sqrt(1.0 + nn::BatchNormOptions{}.epsilon)).epsilon(1e-14));
  }
  SUBCASE("training on a single row is refused") {
    nn::BatchNormLayer bn(2);
    CHECK_THROWS_AS(bn.forward(Matrix{{1, 2}}, true), ValidationError);
  }
  SUBCASE("running statistics: momentum 0.1, unbiased variance") {
    nn::BatchNormLayer bn(1);
    bn.forward(Matrix{{1}, {2}, {3}, {6}}, true);
    // batch mean 3, unbiased variance (4 + 1 + 0 + 9) / 3
    CHECK(bn.running_mean()[0] == doctest::Approx(0.1 * 3.0).epsilon(1e-14));
    CHECK(bn.running_var()[0] == doctest::Approx(0.9 + 0.1 * 14.0 / 3.0).epsilon(1e-14));
  }
  SUBCASE("eval output of a row does not depend on its batch") {
    Rng rng(7);
    nn::BatchNormLayer bn(4);
    bn.forward(testing::random_matrix(rng, 16, 4), true);
    const Matrix batch = testing::random_matrix(rng, 6, 4);
    const Matrix full = bn.forward(batch, false);
    for (std::size_t r = 0; r < 6; ++r) {
      Matrix single(1, 4);
      for (std::size_t c = 0; c < 4; ++c) single(0, c) = batch(r, c);
      const Matrix one = bn.forward(single, false);
      for (std::size_t c = 0; c < 4; ++c) CHECK(one(0, c) == full(r, c));
    }
  }
}

TEST_CASE("batch norm backward matches central differences on an 8x4 batch") {
  Rng rng(8);
  nn::BatchNormLayer bn(4);
  for (auto& g : bn.gamma()) g = 1.0 + 0.3 * rng.normal();
  for (auto& b : bn.beta()) b = 0.3 * rng.normal();
  Matrix input = testing::random_matrix(rng, 8, 4);
  const Matrix upstream = testing::random_matrix(rng, 8, 4);
  bn.zero_grad();
  bn.forward(input, true);
  const Matrix grad_in = bn.backward(upstream);
  std::vector<nn::ParamRef> params;
  bn.collect(params, "bn");
  auto loss = [&] {
    nn::BatchNormLayer copy = bn;
    return weighted_sum(copy.forward(input, true), upstream);
  };
  for (std::size_t i = 0; i < input.size(); ++i)
    CHECK(relative_error(grad_in.data()[i], central_difference(input.data(), i, loss)) < 1e-3);
  for (auto& p : params)
    for (std::size_t i = 0; i < p.value.size(); ++i)
      CHECK(relative_error(p.grad[i], central_difference(p.value, i, loss)) < 1e-3);
}

TEST_CASE("adam") {
  SUBCASE("zero gradients leave parameters unchanged") {
    std::vector<double> w{1.0, -2.0}, g{0.0, 0.0};
    nn::AdamState adam;
    const std::vector<nn::ParamRef> refs{{"w", w, g}};
    adam.step(refs);
    CHECK(w == std::vector<double>{1.0, -2.0});
    CHECK(adam.steps() == 1);
  }
  SUBCASE("lr = 0 leaves parameters unchanged") {
    std::vector<double> w{1.0, -2.0}, g{3.0, -0.5};
    nn::AdamState adam({0.0, 0.9, 0.999, 1e-8});
    const std::vector<nn::ParamRef> refs{{"w", w, g}};
    for (int i = 0; i < 5; ++i) adam.step(refs);
    CHECK(w == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("scalar recurrence with a constant gradient") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, grad = 0.37;
    std::vector<double> w{0.5}, g{grad};
    nn::AdamState adam({lr, b1, b2, eps});
    const std::vector<nn::ParamRef> refs{{"w", w, g}};
    double expected = 0.5, m = 0.0, v = 0.0;
    for (int t = 1; t <= 25; ++t) {
      adam.step(refs);
      m = b1 * m + (1 - b1) * grad;
      v = b2 * v + (1 - b2) * grad * grad;
      const double m_hat = m / (1 - std::pow(b1, t));
      const double v_hat = v / (1 - std::pow(b2, t));
      expected -= lr * m_hat / (std::sqrt(v_hat) + eps);
      CHECK(w[0] == doctest::Approx(expected).epsilon(1e-13));
    }
    CHECK(adam.steps() == 25);
  }
  SUBCASE("non-finite gradient names the block and changes nothing") {
    std::vector<double> a{1.0}, ga{0.1}, b{2.0}, gb{std::numeric_limits<double>::quiet_NaN()};
    nn::AdamState adam;
    const std::vector<nn::ParamRef> refs{{"encoder.fc1.weight", a, ga}, {"decoder.out.bias", b, gb}};
    try {
      adam.step(refs);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("decoder.out.bias") != std::string::npos);
    }
    CHECK(a[0] == 1.0);
    CHECK(adam.steps() == 0);
  }
  SUBCASE("identical state and gradients give bitwise identical steps") {
    std::vector<double> w1{0.3, -0.2}, w2{0.3, -0.2}, g{0.11, 0.7};
    nn::AdamState a1, a2;
    const std::vector<nn::ParamRef> r1{{"w", w1, g}}, r2{{"w", w2, g}};
    for (int i = 0; i < 10; ++i) {
      a1.step(r1);
      a2.step(r2);
    }
    CHECK(w1 == w2);
  }
}

} // TEST_SUITE
