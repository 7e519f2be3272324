#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ropo/math.hpp"
#include "ropo/prefmodel.hpp"

namespace ropo {

enum class LossKind { dpo, ipo, cdpo, cipo, ropo, combined };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::dpo:      return "dpo";
    case LossKind::ipo:      return "ipo";
    case LossKind::cdpo:     return "cdpo";
    case LossKind::cipo:     return "cipo";
    case LossKind::ropo:     return "ropo";
    case LossKind::combined: return "combined";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "dpo")      return LossKind::dpo;
  if (s == "ipo")      return LossKind::ipo;
  if (s == "cdpo")     return LossKind::cdpo;
  if (s == "cipo")     return LossKind::cipo;
  if (s == "ropo")     return LossKind::ropo;
  if (s == "combined") return LossKind::combined;
  throw std::invalid_argument("unknown loss kind: " + s);
}

/// The squared-error losses take the unscaled log-ratio margin; the sigmoid
/// losses take the beta-scaled one.
inline bool uses_unscaled_margin(LossKind k) {
  return k == LossKind::ipo || k == LossKind::cipo;
}

/// One loss evaluation at an oriented margin.
///
/// value       loss value
/// grad_margin true derivative of `value` w.r.t. the loss's own margin
///             argument; this is what the trainer chains through the logits
/// weight      the gradient weight w multiplying grad log(pi(y1)/pi(y2)) in
///             each method's published gradient factorization. For the
///             label-smoothed losses this is w_dpo - beta*eps resp.
///             w_ipo + 2*eps/beta, which corresponds to the opposite
///             smoothing convention from the loss value (see loss_cdpo);
///             weight is therefore a reported quantity, not -beta*grad_margin.
struct LossEval {
  double value = 0.0;
  double grad_margin = 0.0;
  double weight = 0.0;
};

/// -log sigma(m). Weight beta*sigma(-m): grows the further the margin moves
/// against the label, which is what makes the loss noise-sensitive.
inline LossEval loss_dpo(double m, double beta) {
  const double s_neg = sigmoid(-m);
  return {softplus(-m), -s_neg, beta * s_neg};
}

/// sigma(-m): the noise-tolerant loss. Weight beta*sigma(m)*sigma(-m) is even
/// in the margin, peaks at m = 0 (beta/4), and vanishes in both tails.
inline LossEval loss_ropo(double m, double beta) {
  const double sd = sigmoid_deriv(m);
  return {sigmoid(-m), -sd, beta * sd};
}

/// (m_unscaled - 1/(2 beta))^2 on the unscaled log-ratio margin.
inline LossEval loss_ipo(double m_unscaled, double beta) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("loss_ipo: beta must be > 0");
  }
  const double d = m_unscaled - 1.0 / (2.0 * beta);
  return {d * d, 2.0 * d, 2.0 * d};
}

/// Label-smoothed DPO with eps on the label-consistent term:
///   -eps log sigma(m) - (1-eps) log sigma(-m).
/// The reported weight follows the published identity w_dpo - beta*eps, which
/// places eps on the flipped term instead; the two conventions differ by
/// eps <-> 1-eps and are deliberately kept as stated.
inline LossEval loss_cdpo(double m, double beta, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw std::invalid_argument("loss_cdpo: eps must be in (0, 0.5)");
  }
  const double value = eps * softplus(-m) + (1.0 - eps) * softplus(m);
  const double grad = -eps * sigmoid(-m) + (1.0 - eps) * sigmoid(m);
  const double weight = beta * (sigmoid(-m) - eps);
  return {value, grad, weight};
}

/// Label-smoothed IPO, eps on the label-consistent term:
///   eps (m - 1/(2 beta))^2 + (1-eps) (-m - 1/(2 beta))^2.
/// Reported weight is the published w_ipo + 2 eps / beta.
inline LossEval loss_cipo(double m_unscaled, double beta, double eps) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("loss_cipo: beta must be > 0");
  }
  if (!(eps > 0.0 && eps < 0.5)) {
    throw std::invalid_argument("loss_cipo: eps must be in (0, 0.5)");
  }
  const double c = 1.0 / (2.0 * beta);
  const double d1 = m_unscaled - c;
  const double d2 = m_unscaled + c;  // (-m - c)^2 == (m + c)^2
  const double value = eps * d1 * d1 + (1.0 - eps) * d2 * d2;
  const double grad = 2.0 * eps * d1 + 2.0 * (1.0 - eps) * d2;
  const double weight = 2.0 * d1 + 2.0 * eps / beta;
  return {value, grad, weight};
}

/// alpha * ropo + gamma * dpo, both on the beta-scaled margin. Value, gradient
/// and weight all combine linearly. m_unscaled is accepted for interface
/// uniformity with the dispatcher but does not enter the formula.
inline LossEval loss_combined(double m, double m_unscaled, const Hyper& h) {
  (void)m_unscaled;
  const LossEval r = loss_ropo(m, h.beta());
  const LossEval d = loss_dpo(m, h.beta());
  return {h.alpha() * r.value + h.gamma() * d.value,
          h.alpha() * r.grad_margin + h.gamma() * d.grad_margin,
          h.alpha() * r.weight + h.gamma() * d.weight};
}

/// Pure-margin dispatch: evaluates `kind` at an oriented beta-scaled margin m
/// and its unscaled counterpart m_unscaled = m / beta. This is the function
/// the population-risk oracles minimize.
inline LossEval eval_loss(LossKind kind, double m, double m_unscaled,
                          const Hyper& h) {
  switch (kind) {
    case LossKind::dpo:      return loss_dpo(m, h.beta());
    case LossKind::ropo:     return loss_ropo(m, h.beta());
    case LossKind::ipo:      return loss_ipo(m_unscaled, h.beta());
    case LossKind::cdpo:     return loss_cdpo(m, h.beta(), h.eps());
    case LossKind::cipo:     return loss_cipo(m_unscaled, h.beta(), h.eps());
    case LossKind::combined: return loss_combined(m, m_unscaled, h);
  }
  throw std::invalid_argument("eval_loss: bad kind");
}

/// Margins of one response pair in the label-0 frame (y1 minus y2).
/// `at_clip` records whether the raw margin left the compact region; the
/// trainer zeroes the chain-rule factor there (clip with stop-gradient).
struct PairMargins {
  double raw = 0.0;      // beta-scaled, unclipped
  double clipped = 0.0;  // beta-scaled, in [-M, M]
  bool at_clip = false;
};

inline PairMargins pair_margins(const Policy& policy, const Policy& reference,
                                QueryId q, ResponseId y1, ResponseId y2,
                                const Hyper& h) {
  PairMargins pm;
  pm.raw = implicit_reward(policy, reference, q, y1, h.beta()) -
           implicit_reward(policy, reference, q, y2, h.beta());
  const double bound = h.margin_clip();
  pm.at_clip = std::abs(pm.raw) >= bound;
  pm.clipped = std::clamp(pm.raw, -bound, bound);
  return pm;
}

/// Applies the label orientation (m = +margin for label 0, -margin for
/// label 1) and dispatches.
inline LossEval eval_oriented(LossKind kind, const PairMargins& pm, int label,
                              const Hyper& h) {
  const double sign = (label == 0) ? 1.0 : -1.0;
  const double m = sign * pm.clipped;
  return eval_loss(kind, m, m / h.beta(), h);
}

/// Full evaluation of one preference sample.
inline LossEval evaluate(LossKind kind, const Policy& policy,
                         const Policy& reference,
                         const PreferenceSample& sample, const Hyper& h) {
  validate_sample(policy, sample);
  const PairMargins pm =
      pair_margins(policy, reference, sample.query, sample.y1, sample.y2, h);
  return eval_oriented(kind, pm, sample.label, h);
}

}  // namespace ropo
