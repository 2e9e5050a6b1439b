#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "silicon_entropy/errors.hpp"
#include "silicon_entropy/randtest/special_functions.hpp"
#include "support/checkpoints.hpp"

namespace se = silicon_entropy;
namespace rt = se::randtest;

namespace {

double relative_error(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(SpecialFunctions, ErfcCheckpoints) {
  for (const auto& c : checkpoints::kErfc) {
    EXPECT_LT(relative_error(rt::erfc(c.x), c.value), 1e-10) << "erfc(" << c.x << ")";
  }
}

TEST(SpecialFunctions, IgamcCheckpoints) {
  for (const auto& c : checkpoints::kIgamc) {
    EXPECT_LT(relative_error(rt::igamc(c.a, c.x), c.value), 1e-10) << "igamc(" << c.a << ", " << c.x << ")";
  }
}

TEST(SpecialFunctions, IgamcEdges) {
  EXPECT_EQ(rt::igamc(3.0, 0.0), 1.0);
  EXPECT_EQ(rt::igamc(3.0, std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_THROW(rt::igamc(0.0, 1.0), se::ArgumentError);
  EXPECT_THROW(rt::igamc(-1.0, 1.0), se::ArgumentError);
  EXPECT_THROW(rt::igamc(1.0, -0.5), se::ArgumentError);
  EXPECT_THROW(rt::igamc(std::nan(""), 1.0), se::ArgumentError);
}

TEST(SpecialFunctions, IgamcExponentialCase) {
  // Q(1, x) = exp(-x).
  for (double x = 0.01; x < 50.0; x *= 1.7) EXPECT_LT(relative_error(rt::igamc(1.0, x), std::exp(-x)), 1e-12) << x;
}

TEST(SpecialFunctions, NormalCdf) {
  EXPECT_EQ(rt::normal_cdf(0.0), 0.5);
  for (double x = -6.0; x <= 6.0; x += 0.25) EXPECT_NEAR(rt::normal_cdf(x) + rt::normal_cdf(-x), 1.0, 1e-15);
  EXPECT_NEAR(rt::normal_cdf(1.959963984540054), 0.975, 1e-12);
}
