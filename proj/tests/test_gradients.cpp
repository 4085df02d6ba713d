#include <gtest/gtest.h>

#include <chrono>

#include "semeda/gradcheck.hpp"

using namespace semeda;

TEST(GradientSuite, EveryOperationAndLossAgreesWithFiniteDifferences) {
  const auto start = std::chrono::steady_clock::now();
  const auto cases = run_gradient_suite(20, 1);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_GE(cases.size(), 20u);
  for (const auto& c : cases) {
    EXPECT_EQ(c.instances, 20u) << c.name;
    EXPECT_LT(c.worst.max_relative_error, kGradTolerance) << c.name;
  }
  EXPECT_LT(seconds, 60.0);
}
