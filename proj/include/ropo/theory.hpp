#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ropo/losses.hpp"
#include "ropo/prefmodel.hpp"

namespace ropo {

/// Optimal margin of the single-pair population risk for one loss under flip
/// rate eta. `location` is in the loss's own margin units: beta-scaled for
/// the sigmoid losses, unscaled for the squared losses. Boundary optima are
/// first-class: is_boundary marks a minimizer sitting at +/- the compact
/// bound rather than at an interior stationary point.
struct FixedPoint {
  LossKind kind = LossKind::dpo;
  double eta = 0.0;
  double location = 0.0;
  bool is_boundary = false;
};

/// The compact-region bound in the loss's own margin units.
inline double margin_bound(LossKind kind, const Hyper& h) {
  return uses_unscaled_margin(kind) ? h.margin_clip() / h.beta()
                                    : h.margin_clip();
}

namespace detail {

inline FixedPoint clamp_to_bound(LossKind kind, double eta, double t,
                                 double bound) {
  FixedPoint fp{kind, eta, t, false};
  if (t >= bound) {
    fp.location = bound;
    fp.is_boundary = true;
  } else if (t <= -bound) {
    fp.location = -bound;
    fp.is_boundary = true;
  }
  return fp;
}

}  // namespace detail

/// Closed-form minimizer of the population risk
///   (1-eta) * loss(+t) + eta * loss(-t)
/// over t in [-bound, bound], for a single fixed pair labeled c = 0.
///
///   dpo  : log((1-eta)/eta), clean case at the +bound
///   ipo  : (1-2 eta)/(2 beta)
///   cdpo : log((eps+eta-2 eps eta)/(1-eps-eta+2 eps eta))
///   cipo : (2(eps+eta-2 eps eta)-1)/(2 beta)
///   ropo : +bound for every eta < 1/2 (risk strictly decreasing in t)
inline FixedPoint noisy_fixed_point(LossKind kind, const Hyper& h, double eta) {
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw std::domain_error("noisy_fixed_point: eta must be in [0, 0.5)");
  }
  const double bound = margin_bound(kind, h);
  switch (kind) {
    case LossKind::ropo:
      return FixedPoint{kind, eta, bound, true};
    case LossKind::dpo: {
      if (eta == 0.0) {
        return FixedPoint{kind, eta, bound, true};
      }
      return detail::clamp_to_bound(kind, eta, std::log((1.0 - eta) / eta),
                                    bound);
    }
    case LossKind::ipo:
      return detail::clamp_to_bound(kind, eta,
                                    (1.0 - 2.0 * eta) / (2.0 * h.beta()),
                                    bound);
    case LossKind::cdpo: {
      const double a = h.eps() + eta - 2.0 * h.eps() * eta;
      return detail::clamp_to_bound(kind, eta, std::log(a / (1.0 - a)), bound);
    }
    case LossKind::cipo: {
      const double a = h.eps() + eta - 2.0 * h.eps() * eta;
      return detail::clamp_to_bound(kind, eta,
                                    (2.0 * a - 1.0) / (2.0 * h.beta()), bound);
    }
    case LossKind::combined:
      break;
  }
  throw std::invalid_argument("noisy_fixed_point: kind must be one of the five base losses");
}

/// True iff the noisy minimizer coincides with the clean one (the definition
/// of noise tolerance). Boundary optima on the same side compare equal.
inline bool tolerance_verdict(LossKind kind, const Hyper& h, double eta) {
  if (!(eta > 0.0 && eta < 0.5)) {
    throw std::domain_error("tolerance_verdict: eta must be in (0, 0.5)");
  }
  const FixedPoint clean = noisy_fixed_point(kind, h, 0.0);
  const FixedPoint noisy = noisy_fixed_point(kind, h, eta);
  if (clean.is_boundary != noisy.is_boundary) {
    return false;
  }
  if (clean.is_boundary) {
    return (clean.location > 0.0) == (noisy.location > 0.0);
  }
  return std::abs(clean.location - noisy.location) <= 1e-9;
}

/// Result of checking a policy's pairwise judgments against the ground-truth
/// preference indicator I(P* > 1/2).
struct BtConsistencyReport {
  std::size_t checked = 0;        // non-tie pairs examined
  std::size_t ties_excluded = 0;  // pairs with |P* - 1/2| < 1e-9
  double agreement = 0.0;         // fraction of checked pairs that agree
  std::vector<PairRef> disagreements;
  std::vector<PairRef> ties;
};

/// For each pair, compares sign(margin) with the Bradley-Terry indicator.
/// Pairs whose ground-truth preference is a tie are excluded and reported
/// separately; a zero policy margin on a non-tie pair counts as disagreement.
inline BtConsistencyReport bt_consistency(const World& world,
                                          const Policy& policy,
                                          const Policy& reference,
                                          const Hyper& h,
                                          std::span<const PairRef> pairs) {
  BtConsistencyReport report;
  std::size_t agree = 0;
  for (const auto& p : pairs) {
    const double pstar = true_preference_prob(world, p.query, p.y1, p.y2);
    if (std::abs(pstar - 0.5) < 1e-9) {
      report.ties_excluded++;
      report.ties.push_back(p);
      continue;
    }
    const double m = margin(policy, reference,
                            PreferenceSample{p.query, p.y1, p.y2, 0}, h.beta());
    report.checked++;
    const bool model_prefers_y1 = m > 0.0;
    const bool truth_prefers_y1 = pstar > 0.5;
    if (m != 0.0 && model_prefers_y1 == truth_prefers_y1) {
      agree++;
    } else {
      report.disagreements.push_back(p);
    }
  }
  report.agreement = report.checked == 0
                         ? 0.0
                         : static_cast<double>(agree) /
                               static_cast<double>(report.checked);
  return report;
}

}  // namespace ropo
