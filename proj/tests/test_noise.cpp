#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ropo/noise.hpp"
#include "ropo/rng.hpp"
#include "ropo/verify.hpp"

using namespace ropo;
using Catch::Matchers::WithinAbs;

namespace {

const Hyper kHyper(0.5, 0.1, 1.0, 0.1, 0.0, 5.0);

std::vector<PreferenceSample> pair_dataset(std::size_t n) {
  std::vector<PreferenceSample> out;
  Rng rng(123);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({0, 0, 1, static_cast<int>(rng.below(2))});
  }
  return out;
}

std::size_t count_flips(const NoisyDataset& d) {
  std::size_t n = 0;
  for (bool f : d.flip_mask) {
    n += f ? 1 : 0;
  }
  return n;
}

}  // namespace

TEST_CASE("flip_labels") {
  const auto data = pair_dataset(10000);
  SECTION("eta 0 leaves everything untouched") {
    const NoisyDataset d = flip_labels(data, 0.0, 42);
    REQUIRE(count_flips(d) == 0);
    REQUIRE(d.consistent());
    for (std::size_t i = 0; i < data.size(); ++i) {
      REQUIRE(d.samples[i].label == data[i].label);
    }
  }
  SECTION("eta 1 flips every label") {
    const NoisyDataset d = flip_labels(data, 1.0, 42);
    REQUIRE(count_flips(d) == data.size());
    REQUIRE(d.consistent());
    for (std::size_t i = 0; i < data.size(); ++i) {
      REQUIRE(d.samples[i].label == 1 - data[i].label);
    }
  }
  SECTION("eta 0.3 lands within the 3-sigma binomial band") {
    // 3 * sqrt(0.3 * 0.7 / 10000) = 0.01375
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 99ULL}) {
      const NoisyDataset d = flip_labels(data, 0.3, seed);
      const double frac =
          static_cast<double>(count_flips(d)) / static_cast<double>(data.size());
      REQUIRE_THAT(frac, WithinAbs(0.3, 0.015));
    }
  }
  SECTION("deterministic per seed, different across seeds") {
    const NoisyDataset a = flip_labels(data, 0.4, 7);
    const NoisyDataset b = flip_labels(data, 0.4, 7);
    const NoisyDataset c = flip_labels(data, 0.4, 8);
    REQUIRE(a.flip_mask == b.flip_mask);
    REQUIRE(a.flip_mask != c.flip_mask);
  }
  SECTION("eta outside [0, 1] is rejected") {
    REQUIRE_THROWS_AS(flip_labels(data, -0.1, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(flip_labels(data, 1.1, 0), std::invalid_argument);
  }
}

TEST_CASE("flip_exact_fraction") {
  SECTION("flips exactly floor(ratio * n)") {
    for (auto [n, ratio, expect] :
         {std::tuple<std::size_t, double, std::size_t>{10, 0.3, 3},
          {1000, 0.25, 250},
          {7, 0.3, 2},
          {500, 0.0, 0},
          {4, 1.0, 4}}) {
      const auto data = pair_dataset(n);
      const NoisyDataset d = flip_exact_fraction(data, ratio, 5);
      REQUIRE(count_flips(d) == expect);
      REQUIRE(d.consistent());
    }
  }
  SECTION("deterministic per seed") {
    const auto data = pair_dataset(200);
    REQUIRE(flip_exact_fraction(data, 0.4, 3).flip_mask ==
            flip_exact_fraction(data, 0.4, 3).flip_mask);
    REQUIRE(flip_exact_fraction(data, 0.4, 3).flip_mask !=
            flip_exact_fraction(data, 0.4, 4).flip_mask);
  }
}

TEST_CASE("expected_risk") {
  Rng rng(9);
  std::vector<double> zp(8), zr(8);
  for (auto& v : zp) {
    v = rng.uniform(-4, 4);
  }
  for (auto& v : zr) {
    v = rng.uniform(-2, 2);
  }
  const Policy policy({0, 1}, {{0, 1, 2, 3}, {0, 1, 2, 3}}, zp);
  const Policy ref({0, 1}, {{0, 1, 2, 3}, {0, 1, 2, 3}}, zr);
  std::vector<PreferenceSample> data;
  for (int i = 0; i < 40; ++i) {
    const QueryId q = static_cast<QueryId>(rng.below(2));
    const auto a = static_cast<ResponseId>(rng.below(4));
    auto b = static_cast<ResponseId>(rng.below(3));
    if (b >= a) {
      ++b;
    }
    data.push_back({q, a, b, static_cast<int>(rng.below(2))});
  }

  SECTION("eta 0 equals the plain empirical mean") {
    for (LossKind k : {LossKind::dpo, LossKind::ipo, LossKind::cdpo,
                       LossKind::cipo, LossKind::ropo, LossKind::combined}) {
      double mean = 0.0;
      for (const auto& s : data) {
        mean += evaluate(k, policy, ref, s, kHyper).value;
      }
      mean /= static_cast<double>(data.size());
      REQUIRE_THAT(expected_risk(k, policy, ref, data, kHyper, 0.0),
                   WithinAbs(mean, 1e-14));
    }
  }
  SECTION("ropo risk at eta 0.5 is exactly 0.5 for any policy") {
    REQUIRE_THAT(expected_risk(LossKind::ropo, policy, ref, data, kHyper, 0.5),
                 WithinAbs(0.5, 1e-14));
  }
  SECTION("matches the exhaustive per-sample two-term expectation") {
    const double eta = 0.2;
    double manual = 0.0;
    for (auto s : data) {
      const double v_as_is = evaluate(LossKind::ropo, policy, ref, s, kHyper).value;
      s.label ^= 1;
      const double v_flip = evaluate(LossKind::ropo, policy, ref, s, kHyper).value;
      manual += (1.0 - eta) * v_as_is + eta * v_flip;
    }
    manual /= static_cast<double>(data.size());
    REQUIRE_THAT(expected_risk(LossKind::ropo, policy, ref, data, kHyper, eta),
                 WithinAbs(manual, 1e-15));
  }
  SECTION("ropo mixes linearly: (1-2 eta) L + eta") {
    const double clean = expected_risk(LossKind::ropo, policy, ref, data, kHyper, 0.0);
    REQUIRE_THAT(expected_risk(LossKind::ropo, policy, ref, data, kHyper, 0.2),
                 WithinAbs((1.0 - 0.4) * clean + 0.2, 1e-13));
  }
  SECTION("affine in eta for every loss kind") {
    for (LossKind k : {LossKind::dpo, LossKind::ipo, LossKind::cdpo,
                       LossKind::cipo, LossKind::ropo}) {
      const double r1 = expected_risk(k, policy, ref, data, kHyper, 0.1);
      const double r2 = expected_risk(k, policy, ref, data, kHyper, 0.2);
      const double r3 = expected_risk(k, policy, ref, data, kHyper, 0.3);
      REQUIRE_THAT(r2, WithinAbs(0.5 * (r1 + r3), 1e-12));
    }
  }
  SECTION("empty dataset rejected") {
    REQUIRE_THROWS_AS(expected_risk(LossKind::dpo, policy, ref, {}, kHyper, 0.1),
                      std::invalid_argument);
  }

  SECTION("linear risk residual") {
    SECTION("vanishes for ropo") {
      for (double eta : {0.1, 0.25, 0.4}) {
        REQUIRE(linear_risk_residual(LossKind::ropo, policy, ref, data, kHyper,
                                     eta) < 1e-10);
      }
    }
    SECTION("is zero at eta 0 for every kind") {
      for (LossKind k : {LossKind::dpo, LossKind::ropo, LossKind::ipo}) {
        REQUIRE(linear_risk_residual(k, policy, ref, data, kHyper, 0.0) == 0.0);
      }
    }
    SECTION("dpo violates the identity on a policy with nonzero margins") {
      REQUIRE(linear_risk_residual(LossKind::dpo, policy, ref, data, kHyper,
                                   0.2) > 1e-3);
    }
  }
}

TEST_CASE("linear-risk identity over random policies") {
  REQUIRE(verify::all_pass(verify::check_linear_risk(kHyper, 1234)));
}
