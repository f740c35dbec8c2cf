// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/special.hpp"

#include <array>
#include <cmath>
#include <string>

#include "topicdistill/error.hpp"

namespace topicdistill {

namespace {

// Positive root of psi, split into high and low parts.
constexpr double kRootHi = 1.4616321449683622;
constexpr double kRootLo = 9.549995429965697e-17;

// Taylor coefficients psi^(k)(root) / k! for k = 1..12.
constexpr std::array<double, 12> kRootSeries = {
    0.9676722454476211704274448,   -0.4427631689835921060928653,
    0.2584997609556510106244014,   -0.1639427054424065275042513,
    0.1078240506912623657571829,   -0.07219956125645471092612178,
    0.04880428816414310722509253,  -0.0331611264748473592922584,
    0.02259764823221810465962483,  -0.01542476590494895913880032,
    0.01053879161661217538812405,  -0.007204534386356868240970474,
};

// B_2k / (2k) for the asymptotic expansion.
constexpr std::array<double, 7> kAsymptotic = {
    1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0, 1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0,
};

}  // namespace

double digamma(double x) {
  if (!(x > 0.0)) throw domain_error("digamma undefined for x = " + std::to_string(x));

  // Near the root the recurrence cancels to nothing; expand around it instead.
  const double delta = (x - kRootHi) - kRootLo;
  if (std::abs(delta) < 0.05) {
    double sum = 0.0;
    for (std::size_t k = kRootSeries.size(); k-- > 0;) sum = (sum + kRootSeries[k]) * delta;
    return sum;
  }

  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  double series = 0.0;
  for (std::size_t k = kAsymptotic.size(); k-- > 0;) series = (series + kAsymptotic[k]) * inv2;
  return shift + std::log(x) - 0.5 / x - series;
}

}  // namespace topicdistill
