#include "doctest.h"
#include "ordemo/gradcheck.hpp"

using namespace ordemo;

TEST_CASE("reverse-mode gradients match finite differences for every head") {
  for (const auto mode : {HeadMode::Softmax, HeadMode::Ordinal1D, HeadMode::Ordinal2D}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto report = check_gradients(tiny_config(mode), seed);
      CAPTURE(report.to_text());
      CHECK(report.passed());
      CHECK(report.layers.size() == kParamCount);
    }
  }
}

TEST_CASE("a corrupted gradient is caught") {
  GradcheckOptions opt;
  opt.corrupt = true;
  const auto report = check_gradients(tiny_config(HeadMode::Softmax), 1, opt);
  CHECK_FALSE(report.passed());
  CHECK(report.to_text().find("FAIL") != std::string::npos);
}

TEST_CASE("reports are reproducible") {
  const auto a = check_gradients(tiny_config(HeadMode::Ordinal2D), 42).to_text();
  const auto b = check_gradients(tiny_config(HeadMode::Ordinal2D), 42).to_text();
  CHECK(a == b);
}
