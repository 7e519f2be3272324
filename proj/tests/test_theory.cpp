#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ropo/harness.hpp"
#include "ropo/theory.hpp"
#include "ropo/trainer.hpp"
#include "ropo/verify.hpp"

using namespace ropo;
using Catch::Matchers::WithinAbs;

namespace {
const Hyper kHyper(0.5, 0.1, 1.0, 0.1, 0.0, 5.0);
}

TEST_CASE("noisy_fixed_point closed forms") {
  SECTION("dpo at eta 0.1 sits at log 9") {
    const FixedPoint fp = noisy_fixed_point(LossKind::dpo, kHyper, 0.1);
    REQUIRE_THAT(fp.location, WithinAbs(2.1972245773362196, 1e-12));
    REQUIRE_FALSE(fp.is_boundary);
  }
  SECTION("dpo at eta 0.2 sits at log 4") {
    REQUIRE_THAT(noisy_fixed_point(LossKind::dpo, kHyper, 0.2).location,
                 WithinAbs(1.3862943611198906, 1e-12));
  }
  SECTION("clean dpo pushes to the boundary") {
    const FixedPoint fp = noisy_fixed_point(LossKind::dpo, kHyper, 0.0);
    REQUIRE(fp.is_boundary);
    REQUIRE(fp.location == 5.0);
  }
  SECTION("ipo at beta 0.5, eta 0.2") {
    REQUIRE_THAT(noisy_fixed_point(LossKind::ipo, kHyper, 0.2).location,
                 WithinAbs(0.6, 1e-12));
  }
  SECTION("ropo sits at +M for every eta") {
    for (double eta : {0.0, 0.1, 0.3, 0.45}) {
      const FixedPoint fp = noisy_fixed_point(LossKind::ropo, kHyper, eta);
      REQUIRE(fp.is_boundary);
      REQUIRE(fp.location == 5.0);
    }
  }
  SECTION("clean-case consistency of the closed forms") {
    // cdpo -> log(eps/(1-eps)); cipo -> -(1-2 eps)/(2 beta); ipo -> 1/(2 beta)
    REQUIRE_THAT(noisy_fixed_point(LossKind::cdpo, kHyper, 0.0).location,
                 WithinAbs(std::log(0.1 / 0.9), 1e-12));
    REQUIRE_THAT(noisy_fixed_point(LossKind::cipo, kHyper, 0.0).location,
                 WithinAbs(-0.8, 1e-12));
    REQUIRE_THAT(noisy_fixed_point(LossKind::ipo, kHyper, 0.0).location,
                 WithinAbs(1.0, 1e-12));
  }
  SECTION("noisy cdpo and cipo values used by the acceptance gate") {
    REQUIRE_THAT(noisy_fixed_point(LossKind::cdpo, kHyper, 0.2).location,
                 WithinAbs(std::log(0.26 / 0.74), 1e-12));
    REQUIRE_THAT(noisy_fixed_point(LossKind::cipo, kHyper, 0.2).location,
                 WithinAbs(-0.48, 1e-12));
  }
  SECTION("domain errors") {
    REQUIRE_THROWS_AS(noisy_fixed_point(LossKind::dpo, kHyper, 0.5),
                      std::domain_error);
    REQUIRE_THROWS_AS(noisy_fixed_point(LossKind::dpo, kHyper, 0.7),
                      std::domain_error);
    REQUIRE_THROWS_AS(noisy_fixed_point(LossKind::combined, kHyper, 0.1),
                      std::invalid_argument);
  }
}

TEST_CASE("closed forms agree with the golden-section oracle on the full grid") {
  const auto records = verify::check_fixed_points(kHyper);
  for (const auto& r : records) {
    INFO(r.check << " " << r.kind << " eta=" << r.eta << " expected="
                 << r.expected << " observed=" << r.observed);
    REQUIRE(r.pass);
  }
}

TEST_CASE("tolerance_verdict") {
  SECTION("ropo is tolerant at every eta below 1/2") {
    for (int i = 1; i <= 9; ++i) {
      REQUIRE(tolerance_verdict(LossKind::ropo, kHyper, 0.05 * i));
    }
  }
  SECTION("dpo at eta 0.2: boundary M against log 4") {
    REQUIRE_FALSE(tolerance_verdict(LossKind::dpo, kHyper, 0.2));
  }
  SECTION("ipo at eta 0.3: 1.0 against 0.4") {
    REQUIRE_FALSE(tolerance_verdict(LossKind::ipo, kHyper, 0.3));
  }
  SECTION("dpo is momentarily tolerant below 1/(1+e^M)") {
    // log((1-eta)/eta) >= M for eta <= 1/(1+e^5) ~ 0.00669: both optima sit
    // at the boundary and the verdict flips to tolerant.
    REQUIRE(tolerance_verdict(LossKind::dpo, kHyper, 0.005));
    REQUIRE_FALSE(tolerance_verdict(LossKind::dpo, kHyper, 0.0068));
  }
  SECTION("eta range enforced") {
    REQUIRE_THROWS_AS(tolerance_verdict(LossKind::dpo, kHyper, 0.0),
                      std::domain_error);
    REQUIRE_THROWS_AS(tolerance_verdict(LossKind::dpo, kHyper, 0.5),
                      std::domain_error);
  }
  SECTION("full verdict grid") {
    REQUIRE(verify::all_pass(verify::check_verdict_grid(kHyper)));
  }
}

TEST_CASE("bt_consistency") {
  SECTION("all-tie world excludes every pair") {
    const World world = generate_world({6, 3, 0.0, 1});
    const Policy ref = Policy::uniform_like(world);
    const auto pairs = all_pairs(world);
    const auto report = bt_consistency(world, ref, ref, kHyper, pairs);
    REQUIRE(report.checked == 0);
    REQUIRE(report.ties_excluded == pairs.size());
    REQUIRE(report.ties.size() == pairs.size());
  }
  SECTION("random policies agree about half the time") {
    double total = 0.0;
    int n_seeds = 50;
    for (int seed = 0; seed < n_seeds; ++seed) {
      const World world = generate_world(
          {50, 4, 1.0, static_cast<std::uint64_t>(seed) + 1000});
      const Policy ref = Policy::uniform_like(world);
      Policy p = ref;
      Rng rng(static_cast<std::uint64_t>(seed));
      auto z = p.logits_flat();
      for (auto& v : z) {
        v = rng.normal();
      }
      const auto report = bt_consistency(world, p, ref, kHyper, all_pairs(world));
      REQUIRE(report.checked > 0);
      total += report.agreement;
    }
    REQUIRE_THAT(total / n_seeds, WithinAbs(0.5, 0.1));
  }
  SECTION("converged population minimizer agrees on every non-tie pair") {
    const auto records = verify::check_bt_consistency(kHyper, 2024);
    REQUIRE(verify::all_pass(records));
    REQUIRE(records[0].observed == 1.0);
  }
}
