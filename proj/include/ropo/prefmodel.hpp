#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ropo/math.hpp"

namespace ropo {

using QueryId = std::int32_t;
using ResponseId = std::int32_t;

/// One pairwise comparison: label 0 means y1 is preferred, 1 means y2 is.
struct PreferenceSample {
  QueryId query = 0;
  ResponseId y1 = 0;
  ResponseId y2 = 0;
  int label = 0;
};

/// An unlabeled response pair, used for evaluation and consistency checks.
struct PairRef {
  QueryId query = 0;
  ResponseId y1 = 0;
  ResponseId y2 = 0;
};

/// Scalar hyperparameters. Ranges are enforced at construction:
///   beta in (0, 1], eps in (0, 0.5), alpha >= 0, gamma >= 0,
///   eta in [0, 0.5), margin_clip > 0.
class Hyper {
 public:
  Hyper(double beta, double eps, double alpha, double gamma, double eta,
        double margin_clip)
      : beta_(beta),
        eps_(eps),
        alpha_(alpha),
        gamma_(gamma),
        eta_(eta),
        margin_clip_(margin_clip) {
    if (!(beta > 0.0 && beta <= 1.0)) {
      throw std::invalid_argument("Hyper: beta must be in (0, 1]");
    }
    if (!(eps > 0.0 && eps < 0.5)) {
      throw std::invalid_argument("Hyper: eps must be in (0, 0.5)");
    }
    if (!(alpha >= 0.0) || !(gamma >= 0.0)) {
      throw std::invalid_argument("Hyper: alpha and gamma must be >= 0");
    }
    if (!(eta >= 0.0 && eta < 0.5)) {
      throw std::invalid_argument("Hyper: eta must be in [0, 0.5)");
    }
    if (!(margin_clip > 0.0)) {
      throw std::invalid_argument("Hyper: margin_clip must be > 0");
    }
  }

  static Hyper defaults() { return Hyper(0.5, 0.1, 1.0, 0.1, 0.0, 5.0); }

  double beta() const { return beta_; }
  double eps() const { return eps_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  double eta() const { return eta_; }
  double margin_clip() const { return margin_clip_; }

  Hyper with_eta(double eta) const {
    return Hyper(beta_, eps_, alpha_, gamma_, eta, margin_clip_);
  }
  Hyper with_beta(double beta) const {
    return Hyper(beta, eps_, alpha_, gamma_, eta_, margin_clip_);
  }

 private:
  double beta_, eps_, alpha_, gamma_, eta_, margin_clip_;
};

namespace detail {

/// Shared (query, response) index: query order, per-query response sets, and
/// flat offsets into a contiguous value array.  World stores latent rewards
/// in this layout, Policy stores logits.
class Support {
 public:
  Support() = default;
  Support(std::vector<QueryId> queries,
          std::vector<std::vector<ResponseId>> responses)
      : queries_(std::move(queries)), responses_(std::move(responses)) {
    if (queries_.size() != responses_.size()) {
      throw std::invalid_argument("Support: queries/responses size mismatch");
    }
    offsets_.reserve(queries_.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < queries_.size(); ++i) {
      if (responses_[i].size() < 2) {
        throw std::invalid_argument("Support: every query needs >= 2 responses");
      }
      for (std::size_t a = 0; a < responses_[i].size(); ++a) {
        for (std::size_t b = a + 1; b < responses_[i].size(); ++b) {
          if (responses_[i][a] == responses_[i][b]) {
            throw std::invalid_argument("Support: duplicate response id");
          }
        }
      }
      if (!query_pos_.emplace(queries_[i], i).second) {
        throw std::invalid_argument("Support: duplicate query id");
      }
      offsets_.push_back(off);
      off += responses_[i].size();
    }
    total_ = off;
  }

  std::size_t n_queries() const { return queries_.size(); }
  std::size_t total_responses() const { return total_; }
  const std::vector<QueryId>& queries() const { return queries_; }

  std::size_t query_pos(QueryId q) const {
    auto it = query_pos_.find(q);
    if (it == query_pos_.end()) {
      throw std::out_of_range("unknown query id " + std::to_string(q));
    }
    return it->second;
  }

  std::span<const ResponseId> responses_at(std::size_t pos) const {
    return responses_[pos];
  }
  std::span<const ResponseId> responses(QueryId q) const {
    return responses_[query_pos(q)];
  }
  std::size_t offset_at(std::size_t pos) const { return offsets_[pos]; }

  /// Flat index of (query, response); throws on unknown ids.
  std::size_t flat_index(QueryId q, ResponseId y) const {
    const std::size_t pos = query_pos(q);
    const auto& rs = responses_[pos];
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (rs[i] == y) {
        return offsets_[pos] + i;
      }
    }
    throw std::out_of_range("unknown response id " + std::to_string(y) +
                            " for query " + std::to_string(q));
  }

  bool contains(QueryId q, ResponseId y) const {
    auto it = query_pos_.find(q);
    if (it == query_pos_.end()) {
      return false;
    }
    const auto& rs = responses_[it->second];
    return std::find(rs.begin(), rs.end(), y) != rs.end();
  }

  friend bool operator==(const Support& a, const Support& b) {
    return a.queries_ == b.queries_ && a.responses_ == b.responses_;
  }

 private:
  std::vector<QueryId> queries_;
  std::vector<std::vector<ResponseId>> responses_;
  std::vector<std::size_t> offsets_;
  std::unordered_map<QueryId, std::size_t> query_pos_;
  std::size_t total_ = 0;
};

}  // namespace detail

/// The synthetic ground truth: a latent reward per (query, response) pair.
class World {
 public:
  World(std::vector<QueryId> queries,
        std::vector<std::vector<ResponseId>> responses,
        std::vector<double> rewards_flat)
      : support_(std::move(queries), std::move(responses)),
        rewards_(std::move(rewards_flat)) {
    if (rewards_.size() != support_.total_responses()) {
      throw std::invalid_argument("World: reward count mismatch");
    }
    for (double r : rewards_) {
      if (!std::isfinite(r)) {
        throw std::invalid_argument("World: non-finite latent reward");
      }
    }
  }

  const detail::Support& support() const { return support_; }
  const std::vector<QueryId>& queries() const { return support_.queries(); }
  std::span<const ResponseId> responses(QueryId q) const {
    return support_.responses(q);
  }

  double latent_reward(QueryId q, ResponseId y) const {
    return rewards_[support_.flat_index(q, y)];
  }
  std::span<const double> rewards_flat() const { return rewards_; }

 private:
  detail::Support support_;
  std::vector<double> rewards_;
};

/// Trainable categorical policy: one logit per (query, response).
/// Log-probabilities are the log-softmax over each query's response set.
class Policy {
 public:
  Policy(std::vector<QueryId> queries,
         std::vector<std::vector<ResponseId>> responses,
         std::vector<double> logits_flat)
      : support_(std::move(queries), std::move(responses)),
        logits_(std::move(logits_flat)) {
    if (logits_.size() != support_.total_responses()) {
      throw std::invalid_argument("Policy: logit count mismatch");
    }
    check_finite();
  }

  /// Zero-logit (uniform) policy over the world's response sets.
  static Policy uniform_like(const World& w) {
    std::vector<std::vector<ResponseId>> rs;
    rs.reserve(w.queries().size());
    for (QueryId q : w.queries()) {
      auto span = w.responses(q);
      rs.emplace_back(span.begin(), span.end());
    }
    return Policy(w.queries(), std::move(rs),
                  std::vector<double>(w.rewards_flat().size(), 0.0));
  }

  const detail::Support& support() const { return support_; }
  const std::vector<QueryId>& queries() const { return support_.queries(); }
  std::span<const ResponseId> responses(QueryId q) const {
    return support_.responses(q);
  }

  double logit(QueryId q, ResponseId y) const {
    return logits_[support_.flat_index(q, y)];
  }
  void set_logit(QueryId q, ResponseId y, double v) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("Policy: logit must be finite");
    }
    logits_[support_.flat_index(q, y)] = v;
  }

  /// Raw storage for the trainer; layout follows support().offset_at.
  std::span<double> logits_flat() { return logits_; }
  std::span<const double> logits_flat() const { return logits_; }

  /// log softmax of the query's logits at the given response; always <= 0.
  double log_prob(QueryId q, ResponseId y) const {
    const std::size_t pos = support_.query_pos(q);
    const auto rs = support_.responses_at(pos);
    const std::size_t off = support_.offset_at(pos);
    std::size_t iy = rs.size();
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rs.size(); ++i) {
      zmax = std::max(zmax, logits_[off + i]);
      if (rs[i] == y) {
        iy = i;
      }
    }
    if (iy == rs.size()) {
      throw std::out_of_range("unknown response id " + std::to_string(y) +
                              " for query " + std::to_string(q));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      sum += std::exp(logits_[off + i] - zmax);
    }
    return logits_[off + iy] - (zmax + std::log(sum));
  }

  bool same_support(const Policy& other) const {
    return support_ == other.support_;
  }

  void check_finite() const {
    for (double z : logits_) {
      if (!std::isfinite(z)) {
        throw std::invalid_argument("Policy: non-finite logit");
      }
    }
  }

 private:
  detail::Support support_;
  std::vector<double> logits_;
};

inline double log_prob(const Policy& policy, QueryId q, ResponseId y) {
  return policy.log_prob(q, y);
}

/// Implicit reward beta * log(pi(y|q) / pi_ref(y|q)).
inline double implicit_reward(const Policy& policy, const Policy& reference,
                              QueryId q, ResponseId y, double beta) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("implicit_reward: beta must be > 0");
  }
  return beta * (policy.log_prob(q, y) - reference.log_prob(q, y));
}

/// Raw beta-scaled reward margin r_hat(y1) - r_hat(y2) for the sample's pair.
/// Antisymmetric in (y1, y2); clipping is a separate concern (see
/// clipped_margin).
inline double margin(const Policy& policy, const Policy& reference,
                     const PreferenceSample& sample, double beta) {
  return implicit_reward(policy, reference, sample.query, sample.y1, beta) -
         implicit_reward(policy, reference, sample.query, sample.y2, beta);
}

/// Margin clipped to [-M, +M], the compact parameter-space bound.
inline double clipped_margin(const Policy& policy, const Policy& reference,
                             const PreferenceSample& sample,
                             const Hyper& hyper) {
  const double m = margin(policy, reference, sample, hyper.beta());
  return std::clamp(m, -hyper.margin_clip(), hyper.margin_clip());
}

/// Bradley-Terry preference probability sigma(r*(y1) - r*(y2)).
inline double true_preference_prob(const World& world, QueryId q, ResponseId y1,
                                   ResponseId y2) {
  return sigmoid(world.latent_reward(q, y1) - world.latent_reward(q, y2));
}

/// Checks that a sample names a valid pair in the policy's support.
inline void validate_sample(const Policy& policy,
                            const PreferenceSample& sample) {
  if (sample.y1 == sample.y2) {
    throw std::invalid_argument("sample: y1 and y2 must differ");
  }
  if (!policy.support().contains(sample.query, sample.y1) ||
      !policy.support().contains(sample.query, sample.y2)) {
    throw std::out_of_range("sample: pair not in policy support");
  }
  if (sample.label != 0 && sample.label != 1) {
    throw std::invalid_argument("sample: label must be 0 or 1");
  }
}

}  // namespace ropo
