#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ropo/harness.hpp"
#include "ropo/io.hpp"
#include "ropo/losses.hpp"
#include "ropo/noise.hpp"
#include "ropo/theory.hpp"
#include "ropo/trainer.hpp"

// Numerical verification of the closed-form theory: every algebraic claim
// about the losses (label symmetry, linear risk, fixed points, weights,
// derivatives, ground-truth consistency) is re-checked against an
// independent numerical route and reported as one structured record per
// check.

namespace ropo::verify {

struct CheckRecord {
  std::string check;
  std::string kind = "-";
  double eta = std::numeric_limits<double>::quiet_NaN();
  double expected = 0.0;
  double observed = 0.0;
  double residual = 0.0;
  bool pass = false;
};

inline bool all_pass(std::span<const CheckRecord> records) {
  for (const auto& r : records) {
    if (!r.pass) {
      return false;
    }
  }
  return true;
}

/// One line per check: check, kind, eta, expected, observed, residual,
/// verdict. The header comment states the hyperparameters, in particular the
/// compact bound M the fixed points depend on.
inline void write_report(std::ostream& os, const Hyper& h,
                         std::span<const CheckRecord> records) {
  os << "# beta=" << io::fmt(h.beta()) << " eps=" << io::fmt(h.eps())
     << " alpha=" << io::fmt(h.alpha()) << " gamma=" << io::fmt(h.gamma())
     << " margin_clip=" << io::fmt(h.margin_clip()) << '\n';
  os << "check,kind,eta,expected,observed,residual,verdict\n";
  for (const auto& r : records) {
    os << r.check << ',' << r.kind << ','
       << (std::isnan(r.eta) ? std::string("-") : io::fmt(r.eta)) << ','
       << io::fmt(r.expected) << ',' << io::fmt(r.observed) << ','
       << io::fmt(r.residual) << ',' << (r.pass ? "pass" : "FAIL") << '\n';
  }
}

namespace detail {

/// Small fixture support for randomized checks.
struct Fixture {
  std::vector<QueryId> queries;
  std::vector<std::vector<ResponseId>> responses;
  std::size_t total = 0;
};

inline Fixture make_fixture(int n_queries, int n_responses) {
  Fixture f;
  for (int q = 0; q < n_queries; ++q) {
    f.queries.push_back(q);
    std::vector<ResponseId> rs;
    for (int y = 0; y < n_responses; ++y) {
      rs.push_back(y);
    }
    f.responses.push_back(std::move(rs));
    f.total += static_cast<std::size_t>(n_responses);
  }
  return f;
}

inline Policy random_policy(const Fixture& f, Rng& rng, double scale) {
  std::vector<double> z(f.total);
  for (auto& v : z) {
    v = scale * rng.normal();
  }
  return Policy(f.queries, f.responses, std::move(z));
}

inline PreferenceSample random_sample(const Fixture& f, Rng& rng) {
  const auto qi = rng.below(f.queries.size());
  const auto& rs = f.responses[qi];
  const std::size_t a = rng.below(rs.size());
  std::size_t b = rng.below(rs.size() - 1);
  if (b >= a) {
    ++b;
  }
  return {f.queries[qi], rs[a], rs[b],
          static_cast<int>(rng.below(2))};
}

inline std::vector<PreferenceSample> random_dataset(const Fixture& f,
                                                    std::size_t n, Rng& rng) {
  std::vector<PreferenceSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(random_sample(f, rng));
  }
  return out;
}

/// Loss value as a function of the loss's own margin variable.
inline double loss_value_at(LossKind kind, double t, const Hyper& h) {
  if (uses_unscaled_margin(kind)) {
    return eval_loss(kind, t * h.beta(), t, h).value;
  }
  return eval_loss(kind, t, t / h.beta(), h).value;
}

inline double loss_grad_at(LossKind kind, double t, const Hyper& h) {
  if (uses_unscaled_margin(kind)) {
    return eval_loss(kind, t * h.beta(), t, h).grad_margin;
  }
  return eval_loss(kind, t, t / h.beta(), h).grad_margin;
}

constexpr LossKind kBaseKinds[5] = {LossKind::dpo, LossKind::ipo,
                                    LossKind::cdpo, LossKind::cipo,
                                    LossKind::ropo};

}  // namespace detail

/// Label symmetry: ropo(m) + ropo(-m) = 1 exactly, over random policies and
/// samples. This is the one-line mechanism behind the noise tolerance.
inline std::vector<CheckRecord> check_symmetric_condition(
    const Hyper& h, std::uint64_t seed, int n_pairs = 1000) {
  Rng rng(seed);
  const auto fixture = detail::make_fixture(8, 4);
  double max_resid = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const Policy policy = detail::random_policy(fixture, rng, 3.0);
    const Policy reference = detail::random_policy(fixture, rng, 1.0);
    PreferenceSample s = detail::random_sample(fixture, rng);
    s.label = 0;
    const double v0 = evaluate(LossKind::ropo, policy, reference, s, h).value;
    s.label = 1;
    const double v1 = evaluate(LossKind::ropo, policy, reference, s, h).value;
    max_resid = std::max(max_resid, std::abs(v0 + v1 - 1.0));
  }
  return {{"symmetric_condition", "ropo",
           std::numeric_limits<double>::quiet_NaN(), 1.0, 1.0 + max_resid,
           max_resid, max_resid < 1e-12}};
}

/// Linear-risk identity risk(eta) = (1-2 eta) risk(0) + eta: exact for ropo,
/// violated by dpo on essentially every random policy.
inline std::vector<CheckRecord> check_linear_risk(const Hyper& h,
                                                  std::uint64_t seed,
                                                  int n_policies = 100,
                                                  std::size_t n_samples = 50) {
  Rng rng(seed);
  const auto fixture = detail::make_fixture(6, 4);
  const double etas[4] = {0.1, 0.2, 0.3, 0.4};
  double ropo_max = 0.0;
  int dpo_violations = 0;
  for (int i = 0; i < n_policies; ++i) {
    const Policy policy = detail::random_policy(fixture, rng, 3.0);
    const Policy reference = detail::random_policy(fixture, rng, 1.0);
    const auto data = detail::random_dataset(fixture, n_samples, rng);
    double dpo_min = std::numeric_limits<double>::infinity();
    for (double eta : etas) {
      ropo_max = std::max(
          ropo_max,
          linear_risk_residual(LossKind::ropo, policy, reference, data, h, eta));
      dpo_min = std::min(
          dpo_min,
          linear_risk_residual(LossKind::dpo, policy, reference, data, h, eta));
    }
    if (dpo_min > 1e-3) {
      ++dpo_violations;
    }
  }
  return {
      {"linear_risk_residual", "ropo", std::numeric_limits<double>::quiet_NaN(),
       0.0, ropo_max, ropo_max, ropo_max < 1e-10},
      {"linear_risk_violated", "dpo", std::numeric_limits<double>::quiet_NaN(),
       static_cast<double>(n_policies), static_cast<double>(dpo_violations),
       static_cast<double>(n_policies - dpo_violations),
       dpo_violations >= (n_policies * 95) / 100},
  };
}

/// Every closed-form fixed point against an independent golden-section
/// minimization of the same population risk.
inline std::vector<CheckRecord> check_fixed_points(const Hyper& h) {
  std::vector<CheckRecord> out;
  for (LossKind kind : detail::kBaseKinds) {
    for (int i = 0; i <= 9; ++i) {
      const double eta = 0.05 * i;
      const FixedPoint fp = noisy_fixed_point(kind, h, eta);
      const double bound = margin_bound(kind, h);
      const auto [x_raw, fx] = minimize_scalar(
          [&](double t) {
            return (1.0 - eta) * detail::loss_value_at(kind, t, h) +
                   eta * detail::loss_value_at(kind, -t, h);
          },
          -bound - 1.0, bound + 1.0, 1e-8);
      const double x = std::clamp(x_raw, -bound, bound);
      const double resid = std::abs(x - fp.location);
      CheckRecord rec{"fixed_point", to_string(kind), eta,
                      fp.location, x, resid, resid < 1e-6};
      // boundary detection must agree as well
      const bool oracle_boundary = bound - std::abs(x) < 1e-6;
      rec.pass = rec.pass && (oracle_boundary == fp.is_boundary);
      out.push_back(rec);
    }
  }
  return out;
}

/// Noise-tolerance verdict grid: ropo tolerant at every eta, the four
/// baselines not (the grid starts above 1/(1+e^M), where the dpo clean and
/// noisy optima separate).
inline std::vector<CheckRecord> check_verdict_grid(const Hyper& h) {
  std::vector<CheckRecord> out;
  for (LossKind kind : detail::kBaseKinds) {
    for (int i = 1; i <= 9; ++i) {
      const double eta = 0.05 * i;
      const bool expected = kind == LossKind::ropo;
      const bool observed = tolerance_verdict(kind, h, eta);
      out.push_back({"tolerance_verdict", to_string(kind), eta,
                     expected ? 1.0 : 0.0, observed ? 1.0 : 0.0,
                     expected == observed ? 0.0 : 1.0, expected == observed});
    }
  }
  return out;
}

/// Analytic margin derivatives against central finite differences.
inline std::vector<CheckRecord> check_margin_gradients(const Hyper& h,
                                                       std::uint64_t seed,
                                                       int n_margins = 1000) {
  std::vector<CheckRecord> out;
  const double step = 1e-5;
  for (LossKind kind : {LossKind::dpo, LossKind::ipo, LossKind::cdpo,
                        LossKind::cipo, LossKind::ropo, LossKind::combined}) {
    Rng rng(seed);
    double max_rel = 0.0;
    for (int i = 0; i < n_margins; ++i) {
      const double t = rng.uniform(-10.0, 10.0);
      const double g = detail::loss_grad_at(kind, t, h);
      const double fd = (detail::loss_value_at(kind, t + step, h) -
                         detail::loss_value_at(kind, t - step, h)) /
                        (2.0 * step);
      const double denom = std::max({std::abs(g), std::abs(fd), 1e-8});
      max_rel = std::max(max_rel, std::abs(g - fd) / denom);
    }
    out.push_back({"margin_gradient_fd", to_string(kind),
                   std::numeric_limits<double>::quiet_NaN(), 0.0, max_rel,
                   max_rel, max_rel < 1e-6});
  }
  return out;
}

/// End-to-end logit gradients against central finite differences of the
/// empirical risk.
inline std::vector<CheckRecord> check_logit_gradients(const Hyper& h,
                                                      std::uint64_t seed,
                                                      int n_policies = 100) {
  std::vector<CheckRecord> out;
  for (LossKind kind : detail::kBaseKinds) {
    Rng rng(seed);
    const auto fixture = detail::make_fixture(5, 4);
    double max_rel = 0.0;
    for (int i = 0; i < n_policies; ++i) {
      const Policy policy = detail::random_policy(fixture, rng, 2.0);
      const Policy reference = detail::random_policy(fixture, rng, 1.0);
      const auto data = detail::random_dataset(fixture, 30, rng);
      max_rel = std::max(
          max_rel, numeric_gradient_check(kind, policy, reference, data, h, 10,
                                          1e-5, rng.next_u64()));
    }
    out.push_back({"logit_gradient_fd", to_string(kind),
                   std::numeric_limits<double>::quiet_NaN(), 0.0, max_rel,
                   max_rel, max_rel < 1e-6});
  }
  return out;
}

/// The label-smoothed weights differ from the base weights by exactly the
/// published constants; the ropo weight is even, peaks at beta/4, decays.
inline std::vector<CheckRecord> check_weight_identities(const Hyper& h,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  double cdpo_resid = 0.0, cipo_resid = 0.0, even_resid = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double m = rng.uniform(-20.0, 20.0);
    const double u = m / h.beta();
    cdpo_resid = std::max(
        cdpo_resid,
        std::abs(loss_cdpo(m, h.beta(), h.eps()).weight -
                 (loss_dpo(m, h.beta()).weight - h.beta() * h.eps())));
    cipo_resid = std::max(
        cipo_resid,
        std::abs(loss_cipo(u, h.beta(), h.eps()).weight -
                 (loss_ipo(u, h.beta()).weight + 2.0 * h.eps() / h.beta())));
    even_resid = std::max(even_resid,
                          std::abs(loss_ropo(m, h.beta()).weight -
                                   loss_ropo(-m, h.beta()).weight));
  }
  // peak at zero margin, strict decay in |m|, and the dpo/ropo contrast:
  // w_dpo grows without bound toward negative margins, w_ropo vanishes.
  const double peak = loss_ropo(0.0, h.beta()).weight;
  double decay_violation = 0.0;
  double prev = peak;
  for (double m = 0.25; m <= 20.0; m += 0.25) {
    const double w = loss_ropo(m, h.beta()).weight;
    decay_violation = std::max(decay_violation, w - prev);
    prev = w;
  }
  double dpo_monotone_violation = 0.0;
  double prev_dpo = loss_dpo(-20.0, h.beta()).weight;
  for (double m = -19.75; m <= 20.0; m += 0.25) {
    const double w = loss_dpo(m, h.beta()).weight;
    dpo_monotone_violation = std::max(dpo_monotone_violation, w - prev_dpo);
    prev_dpo = w;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {
      {"weight_identity_cdpo", "cdpo", nan, 0.0, cdpo_resid, cdpo_resid,
       cdpo_resid < 1e-12},
      {"weight_identity_cipo", "cipo", nan, 0.0, cipo_resid, cipo_resid,
       cipo_resid < 1e-12},
      {"weight_even", "ropo", nan, 0.0, even_resid, even_resid,
       even_resid < 1e-12},
      {"weight_peak_quarter_beta", "ropo", nan, h.beta() / 4.0, peak,
       std::abs(peak - h.beta() / 4.0), std::abs(peak - h.beta() / 4.0) < 1e-15},
      {"weight_decay", "ropo", nan, 0.0, decay_violation, decay_violation,
       decay_violation <= 0.0},
      {"weight_dpo_decreasing_in_margin", "dpo", nan, 0.0,
       dpo_monotone_violation, dpo_monotone_violation,
       dpo_monotone_violation <= 0.0},
      {"weight_ropo_tail", "ropo", nan, 0.0,
       loss_ropo(20.0, h.beta()).weight, loss_ropo(20.0, h.beta()).weight,
       loss_ropo(20.0, h.beta()).weight < 1e-8},
  };
}

/// Trains the exact Bradley-Terry population risk of ropo on a two-response
/// world (each pair's label mixture carries its ground-truth probability) and
/// checks the converged judgments match I(P* > 1/2) on all non-tie pairs.
inline std::vector<CheckRecord> check_bt_consistency(const Hyper& h,
                                                     std::uint64_t seed) {
  const World world = generate_world({20, 2, 1.0, seed});
  const Policy reference = Policy::uniform_like(world);
  const auto pairs = all_pairs(world);
  std::vector<PreferenceSample> samples;
  std::vector<double> flip_prob;
  for (const auto& p : pairs) {
    samples.push_back({p.query, p.y1, p.y2, 0});
    flip_prob.push_back(1.0 - true_preference_prob(world, p.query, p.y1, p.y2));
  }
  TrainConfig cfg;
  cfg.learning_rate = 50.0;
  cfg.max_steps = 60000;
  cfg.grad_tol = 1e-12;
  cfg.record_every = 10000;
  const TrainTrace trace = train_with_flip_probs(
      LossKind::ropo, samples, flip_prob, reference, reference, h, cfg);
  const auto report =
      bt_consistency(world, trace.final_policy, reference, h, pairs);
  const bool pass = trace.converged && !trace.aborted &&
                    report.checked > 0 && report.agreement == 1.0;
  return {{"bt_consistency", "ropo", std::numeric_limits<double>::quiet_NaN(),
           1.0, report.agreement, 1.0 - report.agreement, pass}};
}

/// The win-rate formula on its exact unit cases.
inline std::vector<CheckRecord> check_win_rate_formula() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  struct Case {
    std::int64_t w, t, n;
    double expect;
  };
  const Case cases[] = {{3, 2, 5, 0.8}, {0, 7, 7, 0.5}, {9, 0, 9, 1.0}};
  std::vector<CheckRecord> out;
  for (const auto& c : cases) {
    const double got = win_rate(c.w, c.t, c.n);
    out.push_back({"win_rate", "-", nan, c.expect, got,
                   std::abs(got - c.expect), got == c.expect});
  }
  return out;
}

/// The full theory report.
inline std::vector<CheckRecord> run_all(const Hyper& h, std::uint64_t seed) {
  std::vector<CheckRecord> records;
  auto append = [&](std::vector<CheckRecord> more) {
    records.insert(records.end(), std::make_move_iterator(more.begin()),
                   std::make_move_iterator(more.end()));
  };
  append(check_symmetric_condition(h, derive_seed(seed, 11)));
  append(check_linear_risk(h, derive_seed(seed, 12)));
  append(check_fixed_points(h));
  append(check_verdict_grid(h));
  append(check_margin_gradients(h, derive_seed(seed, 13)));
  append(check_logit_gradients(h, derive_seed(seed, 14)));
  append(check_weight_identities(h, derive_seed(seed, 15)));
  append(check_bt_consistency(h, derive_seed(seed, 16)));
  append(check_win_rate_formula());
  return records;
}

}  // namespace ropo::verify
