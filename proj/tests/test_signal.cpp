// SPDX-License-Identifier: Apache-2.0

#include "legodom/signal.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace legodom;

TEST_CASE("low-pass filter response") {
  SUBCASE("first call initializes to the input") {
    LowPassFilter lpf(40.0);
    Eigen::VectorXd x(2);
    x << 3.0, -1.5;
    CHECK((lpf.step(x, 1e-3) - x).norm() == 0.0);
  }
  SUBCASE("constant input converges, step hits 63.2% at tau") {
    const double fc = 10.0;
    const double tau = 1.0 / (2.0 * M_PI * fc);
    LowPassFilter lpf(fc);
    const double dt = 1e-3;
    Eigen::VectorXd zero(1), one(1);
    zero << 0.0;
    one << 1.0;
    lpf.step(zero, dt);
    double value_at_tau = 0.0;
    const int n_tau = static_cast<int>(std::round(tau / dt));
    for (int i = 1; i <= 6 * n_tau; ++i) {
      const double y = lpf.step(one, dt)(0);
      if (i == n_tau) value_at_tau = y;
    }
    CHECK(value_at_tau == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.02));
    CHECK(lpf.step(one, dt)(0) == doctest::Approx(1.0).epsilon(0.01));  // after 6 tau
  }
  SUBCASE("output is a convex combination of inputs") {
    LowPassFilter lpf(25.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 1000; ++i) {
      Eigen::VectorXd x(1);
      x << u(rng);
      lo = std::min(lo, x(0));
      hi = std::max(hi, x(0));
      const double y = lpf.step(x, 1e-3)(0);
      CHECK(y >= lo - 1e-12);
      CHECK(y <= hi + 1e-12);
    }
  }
  CHECK_THROWS_AS(LowPassFilter(0.0), std::invalid_argument);
}

TEST_CASE("contact thresholding conventions") {
  CHECK_FALSE(nmn_contact({0.49, 0.49, 0.49, 0.49})[0]);
  CHECK(nmn_contact({0.5, 0.5, 0.5, 0.5})[1]);  // boundary included
  CHECK(nmn_contact({1.0, 1.0, 1.0, 1.0})[3]);
}

TEST_CASE("grf contact detector") {
  const double dt = 2e-3;
  SUBCASE("constant below and above the threshold") {
    GrfContactDetector low;
    GrfContactDetector high;
    bool low_state = false, high_state = false;
    for (int i = 0; i < 2000; ++i) {
      low_state = low.step(39.0, dt);
      high_state = high.step(41.0, dt);
    }
    CHECK_FALSE(low_state);
    CHECK(high_state);
  }
  SUBCASE("80 N step crosses after roughly tau ln 2") {
    GrfContactDetector det;
    det.step(0.0, dt);  // initialize at zero force
    const double tau = 1.0 / (2.0 * M_PI * kGrfLpfHz);
    double first_true = -1.0;
    for (int i = 1; i <= 1000; ++i) {
      if (det.step(80.0, dt) && first_true < 0.0) first_true = i * dt;
    }
    CHECK(first_true > 0.0);
    CHECK(first_true == doctest::Approx(tau * std::log(2.0)).epsilon(0.25));
  }
}

TEST_CASE("velocity gate is a strict threshold on the norm") {
  CHECK_FALSE(velocity_gate({0.09, 0, 0}));
  CHECK(velocity_gate({0.11, 0, 0}));
  CHECK_FALSE(velocity_gate({0, 0, 0}));
}

TEST_CASE("slip rejection inflates and never decreases") {
  const double base = 1e-4;
  CHECK(slip_reject({0.39, 0, 0}, base) == base);
  CHECK(slip_reject({0.5, 0, 0}, base) == 10.0 * base);
  CHECK(slip_reject({0, 0, 0}, base) == base);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d v(u(rng), u(rng), u(rng));
    CHECK(slip_reject(v, base) >= base);
  }
}
