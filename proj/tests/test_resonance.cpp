#include <catch2/catch_amalgamated.hpp>

#include "pouring/resonance.hpp"
#include "pouring/rng.hpp"

using namespace pouring;

namespace {
ContainerSpec cylinder(double height, double diameter) {
  return {"test", height, diameter, 0.95, 0.3};
}
}  // namespace

TEST_CASE("closed-pipe formula at known points", "[resonance]") {
  const ContainerSpec c = cylinder(150.0, 70.0);
  // 343 / (4 * 0.121) and 343 / (4 * 0.071), hand-checked.
  REQUIRE(resonance_frequency(100.0, c) == Catch::Approx(708.7).margin(0.05));
  REQUIRE(resonance_frequency(50.0, c) == Catch::Approx(1207.7).margin(0.05));
}

TEST_CASE("frequency strictly decreases with air-column length", "[resonance]") {
  const ContainerSpec c = cylinder(200.0, 70.0);
  REQUIRE(resonance_frequency(40.0, c) > resonance_frequency(80.0, c));

  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const ContainerSpec r =
        cylinder(rng.uniform(80.0, 250.0), rng.uniform(40.0, 100.0));
    double prev = resonance_frequency(r.total_height_mm, r);
    for (int i = 99; i >= 1; --i) {
      const double air = r.total_height_mm * i / 100.0;
      const double f = resonance_frequency(air, r);
      REQUIRE(f > prev);
      prev = f;
    }
  }
}

TEST_CASE("air column outside (0, total_height] is a domain error", "[resonance]") {
  const ContainerSpec c = cylinder(120.0, 60.0);
  REQUIRE_THROWS_AS(resonance_frequency(0.0, c), std::domain_error);
  REQUIRE_THROWS_AS(resonance_frequency(-5.0, c), std::domain_error);
  REQUIRE_THROWS_AS(resonance_frequency(120.5, c), std::domain_error);
  REQUIRE_NOTHROW(resonance_frequency(120.0, c));
}

TEST_CASE("observed band bookkeeping", "[resonance]") {
  REQUIRE(in_observed_band(256.0));
  REQUIRE(in_observed_band(2048.0));
  REQUIRE_FALSE(in_observed_band(255.9));
  REQUIRE_FALSE(in_observed_band(2048.1));
}

TEST_CASE("container validation", "[resonance]") {
  REQUIRE_THROWS_AS(validate(ContainerSpec{"bad", 0.0, 60.0, 0.9, 0.3}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(ContainerSpec{"bad", 100.0, -1.0, 0.9, 0.3}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(ContainerSpec{"bad", 100.0, 60.0, 0.0, 0.3}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(ContainerSpec{"bad", 100.0, 60.0, 1.5, 0.3}),
                    std::invalid_argument);
  for (const auto& c : default_containers()) REQUIRE_NOTHROW(validate(c));
}

TEST_CASE("cylinder geometry helpers", "[resonance]") {
  const ContainerSpec c = cylinder(100.0, 70.0);
  REQUIRE(cross_section_area_mm2(c) == Catch::Approx(kPi * 35.0 * 35.0));
  REQUIRE(capacity_ml(c) == Catch::Approx(kPi * 35.0 * 35.0 * 100.0 / 1000.0));
}
