#include <cmath>
#include <limits>

#include "doctest.h"
#include "ordemo/adamw.hpp"
#include "ordemo/error.hpp"

using namespace ordemo;

namespace {

std::vector<Parameter<double>> scalar(double v) { return {{"w", Tensor<double>({1}, {v})}}; }

}  // namespace

TEST_CASE("first step from zero state moves by lr times sign") {
  for (const double g : {0.3, -2.0, 1e-3}) {
    auto p = scalar(1.0);
    AdamWOptions opt;
    opt.weight_decay = 0.0;
    auto state = AdamWState<double>::zeros(p, opt);
    adamw_step(p, {Tensor<double>({1}, {g})}, state);
    const double expected = 1.0 - opt.learning_rate * g / (std::abs(g) + opt.epsilon);
    CHECK(p[0].value[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(state.step == 1);
  }
}

TEST_CASE("two steps match the update formula") {
  AdamWOptions opt;
  opt.learning_rate = 0.1;
  opt.weight_decay = 0.05;
  auto p = scalar(0.5);
  auto state = AdamWState<double>::zeros(p, opt);
  double w = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 0.4 : -0.1;
    adamw_step(p, {Tensor<double>({1}, {g})}, state);
    m = opt.beta1 * m + (1 - opt.beta1) * g;
    v = opt.beta2 * v + (1 - opt.beta2) * g * g;
    const double mh = m / (1 - std::pow(opt.beta1, t));
    const double vh = v / (1 - std::pow(opt.beta2, t));
    w -= opt.learning_rate * (mh / (std::sqrt(vh) + opt.epsilon) + opt.weight_decay * w);
    CHECK(p[0].value[0] == doctest::Approx(w).epsilon(1e-12));
  }
}

TEST_CASE("weight decay alone shrinks toward zero") {
  AdamWOptions opt;
  opt.learning_rate = 0.1;
  opt.weight_decay = 0.5;
  auto p = scalar(2.0);
  auto state = AdamWState<double>::zeros(p, opt);
  adamw_step(p, {Tensor<double>({1}, {0.0})}, state);
  CHECK(p[0].value[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
}

TEST_CASE("non-finite gradients fail before any parameter changes") {
  std::vector<Parameter<double>> p = {{"a", Tensor<double>({2}, {1.0, 2.0})},
                                      {"b", Tensor<double>({1}, {3.0})}};
  auto state = AdamWState<double>::zeros(p, {});
  const auto before = p;
  Gradients<double> g = {Tensor<double>({2}, {0.1, 0.2}),
                         Tensor<double>({1}, {std::numeric_limits<double>::quiet_NaN()})};
  CHECK_THROWS_AS(adamw_step(p, g, state), RuntimeFailure);
  CHECK(p == before);
  CHECK(state.step == 0);
  Gradients<double> wrong = {Tensor<double>({3}), Tensor<double>({1})};
  CHECK_THROWS(adamw_step(p, wrong, state));
}

TEST_CASE("options validation") {
  AdamWOptions opt;
  opt.learning_rate = -1.0;
  CHECK_THROWS_AS(opt.validate(), ValidationError);
  opt = {};
  opt.beta1 = 1.0;
  CHECK_THROWS_AS(opt.validate(), ValidationError);
}
