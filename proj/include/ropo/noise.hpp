#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ropo/losses.hpp"
#include "ropo/prefmodel.hpp"
#include "ropo/rng.hpp"

namespace ropo {

/// A dataset whose labels went through the flip channel, keeping the clean
/// labels and the flip mask so clean-vs-noisy statistics stay computable.
/// eta stores the channel parameter actually used, which may be any value in
/// [0, 1]; the noise-tolerance results additionally require eta < 1/2 and the
/// operations that rely on that enforce it themselves.
struct NoisyDataset {
  std::vector<PreferenceSample> samples;
  std::vector<int> clean_labels;
  std::vector<bool> flip_mask;
  double eta = 0.0;

  std::size_t size() const { return samples.size(); }

  /// flip_mask[i] true <=> samples[i].label != clean_labels[i].
  bool consistent() const {
    if (clean_labels.size() != samples.size() ||
        flip_mask.size() != samples.size()) {
      return false;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (flip_mask[i] != (samples[i].label != clean_labels[i])) {
        return false;
      }
    }
    return true;
  }
};

/// i.i.d. label-flip channel: each label is independently flipped with
/// probability eta. Deterministic per seed.
inline NoisyDataset flip_labels(std::span<const PreferenceSample> data,
                                double eta, std::uint64_t seed) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("flip_labels: eta must be in [0, 1]");
  }
  NoisyDataset out;
  out.eta = eta;
  out.samples.assign(data.begin(), data.end());
  out.clean_labels.reserve(data.size());
  out.flip_mask.reserve(data.size());
  Rng rng(seed);
  for (auto& s : out.samples) {
    out.clean_labels.push_back(s.label);
    const bool flip = rng.bernoulli(eta);
    out.flip_mask.push_back(flip);
    if (flip) {
      s.label ^= 1;
    }
  }
  return out;
}

/// Exact-fraction variant: flips exactly floor(ratio * n) labels, chosen
/// uniformly without replacement. This matches experiment designs that alter
/// a fixed proportion of the data rather than flipping i.i.d.
inline NoisyDataset flip_exact_fraction(std::span<const PreferenceSample> data,
                                        double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("flip_exact_fraction: ratio must be in [0, 1]");
  }
  NoisyDataset out;
  out.eta = ratio;
  out.samples.assign(data.begin(), data.end());
  out.clean_labels.reserve(data.size());
  for (const auto& s : out.samples) {
    out.clean_labels.push_back(s.label);
  }
  out.flip_mask.assign(data.size(), false);

  const auto n_flip =
      static_cast<std::size_t>(ratio * static_cast<double>(data.size()));
  // partial Fisher-Yates over the index vector
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    idx[i] = i;
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n_flip; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.flip_mask[idx[i]] = true;
    out.samples[idx[i]].label ^= 1;
  }
  return out;
}

/// Exact expected risk under the symmetric flip channel: the per-sample
/// two-point mixture (1-eta) * loss(label) + eta * loss(1-label), averaged
/// over the dataset. No Monte Carlo; this is the population quantity the
/// noise-tolerance statements are about. eta = 0 gives the plain empirical
/// risk exactly.
inline double expected_risk(LossKind kind, const Policy& policy,
                            const Policy& reference,
                            std::span<const PreferenceSample> data,
                            const Hyper& h, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("expected_risk: eta must be in [0, 1]");
  }
  if (data.empty()) {
    throw std::invalid_argument("expected_risk: empty dataset");
  }
  double acc = 0.0;
  for (const auto& s : data) {
    validate_sample(policy, s);
    const PairMargins pm =
        pair_margins(policy, reference, s.query, s.y1, s.y2, h);
    acc += (1.0 - eta) * eval_oriented(kind, pm, s.label, h).value +
           eta * eval_oriented(kind, pm, 1 - s.label, h).value;
  }
  return acc / static_cast<double>(data.size());
}

/// Residual of the linear-risk identity
///   risk(eta) = (1 - 2 eta) * risk(0) + eta,
/// which holds exactly for the ropo loss (its two label values sum to 1) and
/// fails for losses without that symmetry.
inline double linear_risk_residual(LossKind kind, const Policy& policy,
                                   const Policy& reference,
                                   std::span<const PreferenceSample> data,
                                   const Hyper& h, double eta) {
  const double noisy = expected_risk(kind, policy, reference, data, h, eta);
  const double clean = expected_risk(kind, policy, reference, data, h, 0.0);
  return std::abs(noisy - ((1.0 - 2.0 * eta) * clean + eta));
}

}  // namespace ropo
