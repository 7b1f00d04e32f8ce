// Numeric-vs-analytic gradient agreement for every differentiable op and
// every training loss, via central finite differences.
#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "doctest.h"
#include "pldp/gradcheck.hpp"
#include "pldp/losses.hpp"

using namespace pldp;

namespace {

constexpr double kTolerance = 1e-4;

}  // namespace

TEST_CASE("finite_difference_check matches a hand-computed quadratic gradient") {
  // f(x) = sum(x*x) has gradient 2x; both sides are exact enough that the
  // relative error must land far below the acceptance tolerance.
  Tensor x = Tensor::leaf({3}, {0.5, -1.25, 2.0}, true);
  const double err = finite_difference_check(
      [](Graph& g, const Tensor& v) { return g.sum(g.mul(v, v)); }, x, 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("finite_difference_check flags a wrong analytic gradient") {
  // exp is differentiable but pairing its value with the gradient of 2*exp
  // (via a doubled output read through replay) is impossible to fake here;
  // instead probe a genuinely kinked function at its kink, where the
  // two-sided numeric slope (~0.5) disagrees with the analytic branch.
  Tensor x = Tensor::leaf({1}, {0.0}, true);
  const double err = finite_difference_check(
      [](Graph& g, const Tensor& v) { return g.sum(g.relu(v)); }, x, 1e-5);
  CHECK(err > 0.1);
}

TEST_CASE("finite_difference_check validates its step size") {
  Tensor x = Tensor::leaf({2}, {1.0, 2.0}, true);
  const auto f = [](Graph& g, const Tensor& v) { return g.sum(v); };
  CHECK_THROWS_AS(finite_difference_check(f, x, 0.0), ConfigError);
  CHECK_THROWS_AS(finite_difference_check(f, x, -1e-5), ConfigError);
  CHECK_THROWS_AS(finite_difference_check(f, x, 0.5), ConfigError);
}

TEST_CASE("suite construction rejects a non-positive trial count") {
  CHECK_THROWS_AS(build_gradcheck_suite(0, 1), ConfigError);
  CHECK_THROWS_AS(build_gradcheck_suite(-3, 1), ConfigError);
}

TEST_CASE("suite covers every graph op and every loss, each through all differentiable inputs") {
  const auto cases = build_gradcheck_suite(1, 7);
  std::set<std::string> names;
  for (const auto& c : cases) names.insert(c.name);
  CHECK(names.size() == cases.size());  // no duplicate case names

  const std::set<std::string> expected = {
      "add/lhs", "add/rhs", "sub/lhs", "sub/rhs", "mul/lhs", "mul/rhs",
      "div/numerator", "div/denominator", "add_scalar", "mul_scalar",
      "clamp_min", "exp", "log", "relu", "sigmoid", "sum", "mean",
      "dot/lhs", "dot/rhs", "softmax", "l2_normalize",
      "cosine_similarity/lhs", "cosine_similarity/rhs", "pick", "concat",
      "reshape", "matmul/lhs", "matmul/rhs", "conv2d/input", "conv2d/kernel",
      "max_pool2d", "avg_pool2d", "global_avg_pool", "global_max_pool",
      "add_channel_bias/input", "add_channel_bias/bias",
      "scale_channels/input", "scale_channels/scales",
      "scale_spatial/input", "scale_spatial/map", "channel_mean_map",
      "channel_max_map", "concat_channels/first", "concat_channels/second",
      "similarity_h/lhs", "similarity_h/rhs", "nce_loss/image",
      "nce_loss/patch", "nce_loss/negatives", "nce_loss/no_negatives",
      "pld_loss/image", "pld_loss/patch", "total_loss/combined"};
  CHECK(names == expected);
}

TEST_CASE("every case passes the tolerance over multiple random trials") {
  // The acceptance harness runs 100+ trials; a smaller count here keeps the
  // unit suite fast while still exercising several random shapes per op.
  const auto cases = build_gradcheck_suite(5, 20260819);
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const double err = c.run();
    CHECK(err < kTolerance);
  }
}

TEST_CASE("case errors are reproducible for a fixed seed and differ across seeds") {
  const auto a = build_gradcheck_suite(2, 99);
  const auto b = build_gradcheck_suite(2, 99);
  const auto c = build_gradcheck_suite(2, 100);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  bool any_differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    const double ea = a[i].run();
    const double eb = b[i].run();
    CHECK(ea == eb);
    if (ea != c[i].run()) any_differs = true;
  }
  CHECK(any_differs);
}
