#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ropo/losses.hpp"
#include "ropo/rng.hpp"
#include "ropo/verify.hpp"

using namespace ropo;
using Catch::Matchers::WithinAbs;

namespace {
const Hyper kHyper(0.5, 0.1, 1.0, 0.1, 0.0, 5.0);
}

TEST_CASE("dpo loss") {
  SECTION("zero margin") {
    const LossEval e = loss_dpo(0.0, 0.5);
    REQUIRE_THAT(e.value, WithinAbs(0.6931471805599453, 1e-15));
    REQUIRE_THAT(e.weight, WithinAbs(0.25, 1e-15));  // beta/2
    REQUIRE_THAT(e.grad_margin, WithinAbs(-0.5, 1e-15));
  }
  SECTION("margin 2 with beta 0.5") {
    const LossEval e = loss_dpo(2.0, 0.5);
    REQUIRE_THAT(e.value, WithinAbs(0.12692801104297249, 1e-12));
    REQUIRE_THAT(e.weight, WithinAbs(0.059601461011058776, 1e-12));
  }
  SECTION("stable far into the tails") {
    REQUIRE(std::isfinite(loss_dpo(700.0, 0.5).value));
    REQUIRE(std::isfinite(loss_dpo(-700.0, 0.5).value));
    REQUIRE_THAT(loss_dpo(-700.0, 0.5).value, WithinAbs(700.0, 1e-9));
    REQUIRE(loss_dpo(700.0, 0.5).value >= 0.0);
  }
}

TEST_CASE("ropo loss") {
  SECTION("zero margin") {
    const LossEval e = loss_ropo(0.0, 0.5);
    REQUIRE(e.value == 0.5);
    REQUIRE_THAT(e.weight, WithinAbs(0.125, 1e-15));  // beta/4
  }
  SECTION("saturation") {
    REQUIRE_THAT(loss_ropo(50.0, 0.5).value, WithinAbs(0.0, 1e-20));
    REQUIRE_THAT(loss_ropo(50.0, 0.5).weight, WithinAbs(0.0, 1e-20));
    REQUIRE_THAT(loss_ropo(-50.0, 0.5).value, WithinAbs(1.0, 1e-15));
  }
  SECTION("margin 1.5") {
    REQUIRE_THAT(loss_ropo(1.5, 0.5).value,
                 WithinAbs(0.18242552380635635, 1e-12));
  }
  SECTION("value stays inside (0, 1)") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
      const double v = loss_ropo(rng.uniform(-30, 30), 0.5).value;
      REQUIRE(v > 0.0);
      REQUIRE(v < 1.0);
    }
  }
}

TEST_CASE("ipo loss") {
  SECTION("vertex at 1/(2 beta)") {
    REQUIRE(loss_ipo(1.0, 0.5).value == 0.0);
  }
  SECTION("zero margin") {
    REQUIRE_THAT(loss_ipo(0.0, 0.5).value, WithinAbs(1.0, 1e-15));
  }
  SECTION("margin 2 with beta 0.5") {
    const LossEval e = loss_ipo(2.0, 0.5);
    REQUIRE_THAT(e.value, WithinAbs(1.0, 1e-15));
    REQUIRE_THAT(e.grad_margin, WithinAbs(2.0, 1e-15));
    REQUIRE_THAT(e.weight, WithinAbs(2.0, 1e-15));
  }
}

TEST_CASE("cdpo loss") {
  SECTION("zero margin sums to log 2") {
    REQUIRE_THAT(loss_cdpo(0.0, 0.5, 0.1).value,
                 WithinAbs(0.6931471805599453, 1e-15));
  }
  SECTION("weight at zero margin, beta 0.5, eps 0.1") {
    REQUIRE_THAT(loss_cdpo(0.0, 0.5, 0.1).weight, WithinAbs(0.2, 1e-15));
  }
  SECTION("eps to zero recovers the flipped-label dpo loss") {
    for (double m : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
      const double flipped_dpo = loss_dpo(-m, 0.5).value;
      REQUIRE_THAT(loss_cdpo(m, 0.5, 1e-9).value,
                   WithinAbs(flipped_dpo, 1e-7));
    }
  }
  SECTION("eps range enforced") {
    REQUIRE_THROWS_AS(loss_cdpo(0.0, 0.5, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(loss_cdpo(0.0, 0.5, 0.0), std::invalid_argument);
  }
}

TEST_CASE("cipo loss") {
  SECTION("zero margin gives 1/(4 beta^2) for any eps") {
    for (double eps : {0.05, 0.1, 0.3, 0.45}) {
      REQUIRE_THAT(loss_cipo(0.0, 0.5, eps).value, WithinAbs(1.0, 1e-15));
    }
  }
  SECTION("beta 0.5, eps 0.1, margin 1") {
    REQUIRE_THAT(loss_cipo(1.0, 0.5, 0.1).value, WithinAbs(3.6, 1e-14));
  }
  SECTION("eps toward 1/2 approaches m^2 + 1/(4 beta^2)") {
    for (double m : {-2.0, 0.3, 1.7}) {
      REQUIRE_THAT(loss_cipo(m, 0.5, 0.5 - 1e-10).value,
                   WithinAbs(m * m + 1.0, 1e-8));
    }
  }
}

TEST_CASE("combined loss") {
  SECTION("alpha 1, gamma 0 is exactly ropo") {
    const Hyper h(0.5, 0.1, 1.0, 0.0, 0.0, 5.0);
    for (double m : {-4.0, 0.0, 2.5}) {
      const LossEval c = loss_combined(m, m / 0.5, h);
      const LossEval r = loss_ropo(m, 0.5);
      REQUIRE(c.value == r.value);
      REQUIRE(c.grad_margin == r.grad_margin);
      REQUIRE(c.weight == r.weight);
    }
  }
  SECTION("alpha 0, gamma 1 is exactly dpo") {
    const Hyper h(0.5, 0.1, 0.0, 1.0, 0.0, 5.0);
    for (double m : {-4.0, 0.0, 2.5}) {
      const LossEval c = loss_combined(m, m / 0.5, h);
      const LossEval d = loss_dpo(m, 0.5);
      REQUIRE(c.value == d.value);
      REQUIRE(c.grad_margin == d.grad_margin);
    }
  }
  SECTION("alpha 2, gamma 0.1 at zero margin") {
    const Hyper h(0.5, 0.1, 2.0, 0.1, 0.0, 5.0);
    REQUIRE_THAT(loss_combined(0.0, 0.0, h).value,
                 WithinAbs(1.0693147180559945, 1e-14));
  }
}

TEST_CASE("evaluate dispatch") {
  const Policy ref({0}, {{0, 1}}, {0.0, 0.0});
  SECTION("ropo at zero margin is 0.5 for any sample") {
    REQUIRE(evaluate(LossKind::ropo, ref, ref, {0, 0, 1, 0}, kHyper).value == 0.5);
    REQUIRE(evaluate(LossKind::ropo, ref, ref, {0, 1, 0, 1}, kHyper).value == 0.5);
  }
  SECTION("label flip negates the oriented margin") {
    // beta-scaled margin 2: logit gap 4 with beta 0.5
    const Policy p({0}, {{0, 1}}, {4.0, 0.0});
    const double v0 = evaluate(LossKind::dpo, p, ref, {0, 0, 1, 0}, kHyper).value;
    const double v1 = evaluate(LossKind::dpo, p, ref, {0, 0, 1, 1}, kHyper).value;
    REQUIRE_THAT(v0, WithinAbs(0.12692801104297249, 1e-12));
    REQUIRE_THAT(v1, WithinAbs(2.1269280110429725, 1e-12));
  }
  SECTION("margin clipping applies before the loss") {
    const Policy p({0}, {{0, 1}}, {40.0, 0.0});  // raw margin 20 > M = 5
    const double v = evaluate(LossKind::dpo, p, ref, {0, 0, 1, 0}, kHyper).value;
    REQUIRE_THAT(v, WithinAbs(loss_dpo(5.0, 0.5).value, 1e-15));
  }
  SECTION("squared losses see the unscaled margin") {
    const Policy p({0}, {{0, 1}}, {2.0, 0.0});  // unscaled log-ratio gap 2
    const double v = evaluate(LossKind::ipo, p, ref, {0, 0, 1, 0}, kHyper).value;
    REQUIRE_THAT(v, WithinAbs(1.0, 1e-12));  // (2 - 1)^2
  }
  SECTION("bad samples are rejected") {
    REQUIRE_THROWS_AS(evaluate(LossKind::dpo, ref, ref, {0, 0, 0, 0}, kHyper),
                      std::invalid_argument);
  }
}

TEST_CASE("symmetric condition: ropo values over both labels sum to 1") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const double m = rng.uniform(-25.0, 25.0);
    const double sum = loss_ropo(m, 0.5).value + loss_ropo(-m, 0.5).value;
    REQUIRE_THAT(sum, WithinAbs(1.0, 1e-12));
  }
  const auto records = verify::check_symmetric_condition(kHyper, 99);
  REQUIRE(verify::all_pass(records));
}

TEST_CASE("weight structure") {
  SECTION("ropo weight is even with peak beta/4 at zero") {
    Rng rng(21);
    for (int i = 0; i < 500; ++i) {
      const double m = rng.uniform(-20.0, 20.0);
      REQUIRE_THAT(loss_ropo(m, 0.5).weight,
                   WithinAbs(loss_ropo(-m, 0.5).weight, 1e-12));
      REQUIRE(loss_ropo(m, 0.5).weight <= 0.125);
    }
    REQUIRE(loss_ropo(0.0, 0.5).weight == 0.125);
  }
  SECTION("dpo weight keeps growing against the label, ropo weight dies off") {
    REQUIRE(loss_dpo(-6.0, 0.5).weight > loss_dpo(-2.0, 0.5).weight);
    REQUIRE(loss_dpo(-2.0, 0.5).weight > loss_dpo(2.0, 0.5).weight);
    REQUIRE(loss_ropo(-6.0, 0.5).weight < loss_ropo(-2.0, 0.5).weight);
    REQUIRE(loss_ropo(20.0, 0.5).weight < 1e-8);
  }
  SECTION("published smoothing identities") {
    REQUIRE(verify::all_pass(verify::check_weight_identities(kHyper, 4)));
  }
}

TEST_CASE("analytic margin gradients match finite differences") {
  REQUIRE(verify::all_pass(verify::check_margin_gradients(kHyper, 31)));
}
