#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ropo/losses.hpp"
#include "ropo/noise.hpp"
#include "ropo/prefmodel.hpp"
#include "ropo/rng.hpp"

namespace ropo {

enum class RiskMode { empirical, population };

/// Configuration for full-batch gradient descent on the policy logits.
///
/// Plain constant-rate descent, optionally with a linear learning-rate
/// warmup. The descent property (recorded risk non-increasing) holds for
/// learning rates below roughly 1 / (c * beta^2 * k), where c is the largest
/// margin-curvature of the loss (1/4 for the sigmoid losses, 2 for the
/// squared ones, rescaled by 1/beta^2 for the unscaled-margin losses) and k
/// is the maximum number of samples touching one logit.
struct TrainConfig {
  double learning_rate = 0.5;
  int max_steps = 2000;
  double grad_tol = 1e-7;  // stop when the gradient infinity-norm drops below
  RiskMode risk_mode = RiskMode::empirical;
  double population_eta = 0.0;  // flip rate when risk_mode == population
  std::uint64_t seed = 0;       // reserved for stochastic variants
  int record_every = 100;
  int warmup_steps = 0;           // 0 disables warmup
  std::size_t track_margins = 4;  // record margins of the first k samples
};

struct TraceStep {
  int step = 0;
  double risk = 0.0;
  double grad_norm = 0.0;
  std::vector<double> margins;  // clipped beta-scaled margins, label-0 frame
};

struct TrainTrace {
  std::vector<TraceStep> steps;
  bool converged = false;
  bool aborted = false;
  std::string diagnostic;
  int steps_taken = 0;
  Policy final_policy;
};

namespace detail {

struct ResolvedSample {
  std::size_t f1 = 0;  // flat logit index of y1
  std::size_t f2 = 0;
  QueryId query = 0;
  ResponseId y1 = 0;
  ResponseId y2 = 0;
  int label = 0;
};

inline std::vector<ResolvedSample> resolve_samples(
    const Policy& policy, std::span<const PreferenceSample> data) {
  std::vector<ResolvedSample> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    validate_sample(policy, s);
    out.push_back({policy.support().flat_index(s.query, s.y1),
                   policy.support().flat_index(s.query, s.y2), s.query, s.y1,
                   s.y2, s.label});
  }
  return out;
}

}  // namespace detail

/// Full-batch gradient descent with a per-sample flip probability: sample i
/// contributes (1 - p_i) * loss(label_i) + p_i * loss(1 - label_i) to the
/// risk. An empty flip_prob span means plain empirical risk. This is the
/// general entry point; train() below covers the two standard modes.
///
/// The chain rule from a pair's margin to the logits collapses to
/// +/- (scale) on the two paired coordinates, because the log-softmax
/// normalizers of a within-query log-ratio cancel. Margins outside the clip
/// bound contribute value but zero gradient (clip with stop-gradient), which
/// lets parameters sit at the compact-region boundary.
inline TrainTrace train_with_flip_probs(LossKind kind,
                                        std::span<const PreferenceSample> data,
                                        std::span<const double> flip_prob,
                                        const Policy& init,
                                        const Policy& reference,
                                        const Hyper& h,
                                        const TrainConfig& cfg) {
  if (data.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  if (!init.same_support(reference)) {
    throw std::invalid_argument("train: init and reference support differ");
  }
  if (!flip_prob.empty() && flip_prob.size() != data.size()) {
    throw std::invalid_argument("train: flip_prob size mismatch");
  }
  if (cfg.max_steps < 1 || !(cfg.grad_tol > 0.0)) {
    throw std::invalid_argument("train: bad config");
  }

  const auto resolved = detail::resolve_samples(init, data);
  Policy policy = init;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const double chain_scale = uses_unscaled_margin(kind) ? 1.0 : h.beta();
  const std::size_t n_track = std::min(cfg.track_margins, data.size());

  std::vector<double> grad(policy.logits_flat().size(), 0.0);
  TrainTrace trace{.steps = {},
                   .converged = false,
                   .aborted = false,
                   .diagnostic = {},
                   .steps_taken = 0,
                   .final_policy = policy};

  int last_recorded = -1;
  auto record = [&](int step, double risk, double gnorm,
                    std::vector<double> margins) {
    if (step == last_recorded) {
      return;
    }
    trace.steps.push_back({step, risk, gnorm, std::move(margins)});
    last_recorded = step;
  };

  int step = 0;
  while (true) {
    // risk and gradient at the current parameters
    double risk = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> margins;
    margins.reserve(n_track);
    for (std::size_t i = 0; i < resolved.size(); ++i) {
      const auto& r = resolved[i];
      const PairMargins pm =
          pair_margins(policy, reference, r.query, r.y1, r.y2, h);
      if (i < n_track) {
        margins.push_back(pm.clipped);
      }
      const double p = flip_prob.empty() ? 0.0 : flip_prob[i];
      const double w[2] = {1.0 - p, p};
      const int labels[2] = {r.label, 1 - r.label};
      for (int v = 0; v < 2; ++v) {
        const LossEval le = eval_oriented(kind, pm, labels[v], h);
        risk += w[v] * le.value;
        if (!pm.at_clip) {
          const double sign = (labels[v] == 0) ? 1.0 : -1.0;
          const double coef = w[v] * le.grad_margin * sign * chain_scale;
          grad[r.f1] += coef;
          grad[r.f2] -= coef;
        }
      }
    }
    risk *= inv_n;
    double gnorm = 0.0;
    for (auto& g : grad) {
      g *= inv_n;
      gnorm = std::max(gnorm, std::abs(g));
    }

    if (!std::isfinite(risk) || !std::isfinite(gnorm)) {
      trace.aborted = true;
      trace.diagnostic = "non-finite risk or gradient at step " +
                         std::to_string(step);
      break;
    }

    if (gnorm < cfg.grad_tol) {
      record(step, risk, gnorm, std::move(margins));
      trace.converged = true;
      break;
    }
    if (step >= cfg.max_steps) {
      record(step, risk, gnorm, std::move(margins));
      break;
    }
    if (step % cfg.record_every == 0) {
      record(step, risk, gnorm, std::move(margins));
    }

    double lr = cfg.learning_rate;
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
      lr *= static_cast<double>(step + 1) /
            static_cast<double>(cfg.warmup_steps);
    }
    auto z = policy.logits_flat();
    for (std::size_t j = 0; j < z.size(); ++j) {
      z[j] -= lr * grad[j];
    }
    ++step;
  }

  trace.steps_taken = step;
  trace.final_policy = std::move(policy);
  return trace;
}

/// Standard entry point: empirical risk on the given labels, or the exact
/// population risk under the configured uniform flip rate.
inline TrainTrace train(LossKind kind, std::span<const PreferenceSample> data,
                        const Policy& init, const Policy& reference,
                        const Hyper& h, const TrainConfig& cfg) {
  if (cfg.risk_mode == RiskMode::empirical) {
    return train_with_flip_probs(kind, data, {}, init, reference, h, cfg);
  }
  if (!(cfg.population_eta >= 0.0 && cfg.population_eta <= 1.0)) {
    throw std::invalid_argument("train: population_eta must be in [0, 1]");
  }
  std::vector<double> probs(data.size(), cfg.population_eta);
  return train_with_flip_probs(kind, data, probs, init, reference, h, cfg);
}

/// Compares the analytic logit gradient of the empirical risk with central
/// finite differences on n_coords randomly chosen logits; returns the largest
/// relative error. The finite-difference side goes through expected_risk, so
/// this validates the whole chain from loss derivative to logit gradient.
inline double numeric_gradient_check(LossKind kind, const Policy& policy,
                                     const Policy& reference,
                                     std::span<const PreferenceSample> data,
                                     const Hyper& h, int n_coords, double step,
                                     std::uint64_t seed = 0) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("numeric_gradient_check: step must be > 0");
  }
  const auto resolved = detail::resolve_samples(policy, data);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const double chain_scale = uses_unscaled_margin(kind) ? 1.0 : h.beta();

  std::vector<double> grad(policy.logits_flat().size(), 0.0);
  for (const auto& r : resolved) {
    const PairMargins pm =
        pair_margins(policy, reference, r.query, r.y1, r.y2, h);
    if (pm.at_clip) {
      continue;
    }
    const LossEval le = eval_oriented(kind, pm, r.label, h);
    const double sign = (r.label == 0) ? 1.0 : -1.0;
    const double coef = le.grad_margin * sign * chain_scale;
    grad[r.f1] += coef;
    grad[r.f2] -= coef;
  }
  for (auto& g : grad) {
    g *= inv_n;
  }

  // coordinate subset, without replacement
  std::vector<std::size_t> coords(grad.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    coords[i] = i;
  }
  Rng rng(seed);
  const std::size_t k =
      std::min<std::size_t>(static_cast<std::size_t>(n_coords), coords.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
  }

  Policy probe = policy;
  auto z = probe.logits_flat();
  double max_rel = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t c = coords[i];
    const double saved = z[c];
    z[c] = saved + step;
    const double up = expected_risk(kind, probe, reference, data, h, 0.0);
    z[c] = saved - step;
    const double dn = expected_risk(kind, probe, reference, data, h, 0.0);
    z[c] = saved;
    const double fd = (up - dn) / (2.0 * step);
    const double denom = std::max({std::abs(grad[c]), std::abs(fd), 1e-8});
    max_rel = std::max(max_rel, std::abs(grad[c] - fd) / denom);
  }
  return max_rel;
}

/// Golden-section search for the minimum of a unimodal function on [lo, hi].
/// Deterministic; shrinks the bracket to width tol and returns the midpoint
/// and its value. On a monotone function the result lands within tol of the
/// boundary.
inline std::pair<double, double> minimize_scalar(
    const std::function<double(double)>& f, double lo, double hi, double tol) {
  if (!(lo < hi) || !(tol > 0.0)) {
    throw std::invalid_argument("minimize_scalar: bad bracket or tol");
  }
  auto eval = [&](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      throw std::runtime_error("minimize_scalar: non-finite function value");
    }
    return v;
  };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, eval(x)};
}

}  // namespace ropo
