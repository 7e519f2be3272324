#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropo/noise.hpp"
#include "ropo/prefmodel.hpp"
#include "ropo/rng.hpp"
#include "ropo/trainer.hpp"

namespace ropo {

/// Shape and seed of a synthetic world. Latent rewards are drawn i.i.d.
/// normal with mean 0 and standard deviation reward_scale.
struct WorldSpec {
  int n_queries = 20;
  int n_responses = 4;
  double reward_scale = 1.0;
  std::uint64_t seed = 0;
};

inline World generate_world(const WorldSpec& spec) {
  if (spec.n_queries < 1 || spec.n_responses < 2) {
    throw std::invalid_argument("generate_world: need >= 1 query and >= 2 responses");
  }
  if (!(spec.reward_scale >= 0.0)) {
    throw std::invalid_argument("generate_world: reward_scale must be >= 0");
  }
  std::vector<QueryId> queries(static_cast<std::size_t>(spec.n_queries));
  std::vector<std::vector<ResponseId>> responses(queries.size());
  std::vector<double> rewards;
  rewards.reserve(queries.size() * static_cast<std::size_t>(spec.n_responses));
  Rng rng(spec.seed);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    queries[qi] = static_cast<QueryId>(qi);
    responses[qi].resize(static_cast<std::size_t>(spec.n_responses));
    for (int y = 0; y < spec.n_responses; ++y) {
      responses[qi][static_cast<std::size_t>(y)] = y;
      rewards.push_back(spec.reward_scale * rng.normal());
    }
  }
  return World(std::move(queries), std::move(responses), std::move(rewards));
}

/// Samples preference pairs: query uniform, ordered distinct response pair
/// uniform, label 0 drawn with the Bradley-Terry probability P*(y1 > y2).
inline std::vector<PreferenceSample> generate_dataset(const World& world,
                                                      std::size_t n_samples,
                                                      std::uint64_t seed) {
  if (n_samples < 1) {
    throw std::invalid_argument("generate_dataset: n_samples must be >= 1");
  }
  std::vector<PreferenceSample> out;
  out.reserve(n_samples);
  Rng rng(seed);
  const auto& queries = world.queries();
  for (std::size_t i = 0; i < n_samples; ++i) {
    const QueryId q = queries[rng.below(queries.size())];
    const auto rs = world.responses(q);
    const std::size_t a = rng.below(rs.size());
    std::size_t b = rng.below(rs.size() - 1);
    if (b >= a) {
      ++b;
    }
    const ResponseId y1 = rs[a];
    const ResponseId y2 = rs[b];
    const int label = rng.bernoulli(true_preference_prob(world, q, y1, y2)) ? 0 : 1;
    out.push_back({q, y1, y2, label});
  }
  return out;
}

/// (wins + ties/2) / comparisons.
inline double win_rate(std::int64_t wins, std::int64_t ties,
                       std::int64_t comparisons) {
  if (comparisons < 1 || wins < 0 || ties < 0 || wins + ties > comparisons) {
    throw std::domain_error("win_rate: need 0 <= wins + ties <= comparisons, comparisons >= 1");
  }
  return (static_cast<double>(wins) + static_cast<double>(ties) / 2.0) /
         static_cast<double>(comparisons);
}

/// All unordered response pairs of the world, as label-0-frame PairRefs.
inline std::vector<PairRef> all_pairs(const World& world) {
  std::vector<PairRef> out;
  for (QueryId q : world.queries()) {
    const auto rs = world.responses(q);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      for (std::size_t j = i + 1; j < rs.size(); ++j) {
        out.push_back({q, rs[i], rs[j]});
      }
    }
  }
  return out;
}

/// Fraction of pairs on which the sign of the policy's reward margin agrees
/// with the ground-truth preferred response. Margin ties (|margin| < 1e-9)
/// and ground-truth ties (|P* - 1/2| < 1e-9) score half, mirroring the
/// tie convention of the win-rate formula.
inline double evaluate_accuracy(const Policy& policy, const Policy& reference,
                                const World& world, const Hyper& h,
                                std::span<const PairRef> pairs) {
  if (pairs.empty()) {
    throw std::invalid_argument("evaluate_accuracy: no pairs");
  }
  double credit = 0.0;
  for (const auto& p : pairs) {
    const double pstar = true_preference_prob(world, p.query, p.y1, p.y2);
    const double m = margin(policy, reference,
                            PreferenceSample{p.query, p.y1, p.y2, 0}, h.beta());
    if (std::abs(m) < 1e-9 || std::abs(pstar - 0.5) < 1e-9) {
      credit += 0.5;
    } else if ((m > 0.0) == (pstar > 0.5)) {
      credit += 1.0;
    }
  }
  return credit / static_cast<double>(pairs.size());
}

/// Desk-scale head-to-head against the reference: per query, the trained
/// policy's top response plays the reference's top response and the latent
/// reward referees. Ties (same pick or equal reward) get half credit.
/// Logit ties within a policy resolve to the earliest response, so the
/// comparison is deterministic.
inline double win_rate_vs_reference(const Policy& policy,
                                    const Policy& reference,
                                    const World& world) {
  std::int64_t wins = 0, ties = 0;
  auto top_response = [](const Policy& p, QueryId q) {
    const auto rs = p.responses(q);
    ResponseId best = rs[0];
    double best_z = p.logit(q, rs[0]);
    for (std::size_t i = 1; i < rs.size(); ++i) {
      const double z = p.logit(q, rs[i]);
      if (z > best_z) {
        best_z = z;
        best = rs[i];
      }
    }
    return best;
  };
  const auto& queries = world.queries();
  for (QueryId q : queries) {
    const ResponseId a = top_response(policy, q);
    const ResponseId b = top_response(reference, q);
    if (a == b) {
      ++ties;
      continue;
    }
    const double ra = world.latent_reward(q, a);
    const double rb = world.latent_reward(q, b);
    if (std::abs(ra - rb) < 1e-12) {
      ++ties;
    } else if (ra > rb) {
      ++wins;
    }
  }
  return win_rate(wins, ties, static_cast<std::int64_t>(queries.size()));
}

/// Fixed-bin histogram; out-of-range values are clamped into the end bins.
struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::int64_t> counts;

  void add(double x) {
    if (counts.empty()) {
      return;
    }
    const double t = (x - lo) / (hi - lo) * static_cast<double>(counts.size());
    auto bin = static_cast<std::int64_t>(std::floor(t));
    bin = std::max<std::int64_t>(0,
        std::min<std::int64_t>(bin, static_cast<std::int64_t>(counts.size()) - 1));
    counts[static_cast<std::size_t>(bin)]++;
  }
};

/// Reward-margin statistics split by the flip mask. The per-sample statistic
/// is the margin of the label-dispreferred response over the label-preferred
/// one (the noisy label's frame), unclipped: raw implicit rewards are the
/// measurement here, the clip belongs to the losses. Empty partitions are
/// reported as absent, not zero.
struct MarginStats {
  std::optional<double> mean_clean;
  std::optional<double> mean_noisy;
  Histogram hist_clean;
  Histogram hist_noisy;
};

inline MarginStats margin_stats(const Policy& policy, const Policy& reference,
                                const NoisyDataset& noisy, const Hyper& h,
                                std::size_t n_bins = 41) {
  if (!noisy.consistent()) {
    throw std::invalid_argument("margin_stats: inconsistent NoisyDataset");
  }
  const double span = h.margin_clip() + 1.0;
  MarginStats stats;
  stats.hist_clean = {-span, span, std::vector<std::int64_t>(n_bins, 0)};
  stats.hist_noisy = {-span, span, std::vector<std::int64_t>(n_bins, 0)};
  double sum_clean = 0.0, sum_noisy = 0.0;
  std::size_t n_clean = 0, n_noisy = 0;
  for (std::size_t i = 0; i < noisy.samples.size(); ++i) {
    const auto& s = noisy.samples[i];
    const double raw = margin(policy, reference, s, h.beta());
    // dispreferred-minus-preferred in the (possibly flipped) label's frame
    const double stat = (s.label == 0) ? -raw : raw;
    if (noisy.flip_mask[i]) {
      sum_noisy += stat;
      ++n_noisy;
      stats.hist_noisy.add(stat);
    } else {
      sum_clean += stat;
      ++n_clean;
      stats.hist_clean.add(stat);
    }
  }
  if (n_clean > 0) {
    stats.mean_clean = sum_clean / static_cast<double>(n_clean);
  }
  if (n_noisy > 0) {
    stats.mean_noisy = sum_noisy / static_cast<double>(n_noisy);
  }
  return stats;
}

/// One row of the sweep grid.
struct SweepResult {
  LossKind kind = LossKind::dpo;
  double eta = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double win_rate_vs_reference = 0.0;
  std::optional<double> mean_margin_clean;
  std::optional<double> mean_margin_noisy;
  int steps_to_converge = 0;
  std::string status = "ok";
};

/// Grid and per-cell settings for the noise-ratio sweep. Each cell derives
/// its world/dataset/noise seeds from (seed, eta) only, so all loss kinds at
/// the same grid point train on identical data.
struct SweepSettings {
  std::vector<LossKind> kinds = {LossKind::dpo, LossKind::ipo, LossKind::cdpo,
                                 LossKind::cipo, LossKind::ropo};
  std::vector<double> etas = {0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int n_queries = 20;
  int n_responses = 4;
  double reward_scale = 1.0;
  std::size_t n_samples = 500;
  Hyper hyper = Hyper::defaults();
  TrainConfig train;
  bool exact_fraction = true;  // false: i.i.d. flips

  SweepSettings() {
    train.learning_rate = 0.5;
    train.max_steps = 1500;
    train.grad_tol = 1e-6;
    train.record_every = 500;
  }
};

namespace detail {
inline constexpr std::uint64_t kWorldStream = 1;
inline constexpr std::uint64_t kDataStream = 2;
inline constexpr std::uint64_t kNoiseStream = 3;

inline std::uint64_t noise_seed(std::uint64_t seed, double eta) {
  // mix the eta grid point into the stream tag so different noise levels
  // draw independent masks
  const auto tag = static_cast<std::uint64_t>(eta * 1e6);
  return derive_seed(seed, kNoiseStream ^ (tag << 8));
}
}  // namespace detail

/// Runs one sweep cell: build world and data, apply noise, train, evaluate.
inline SweepResult run_sweep_cell(const SweepSettings& cfg, LossKind kind,
                                  double eta, std::uint64_t seed) {
  SweepResult row;
  row.kind = kind;
  row.eta = eta;
  row.seed = seed;
  try {
    const WorldSpec wspec{cfg.n_queries, cfg.n_responses, cfg.reward_scale,
                          derive_seed(seed, detail::kWorldStream)};
    const World world = generate_world(wspec);
    const auto clean = generate_dataset(world, cfg.n_samples,
                                        derive_seed(seed, detail::kDataStream));
    const NoisyDataset noisy =
        cfg.exact_fraction
            ? flip_exact_fraction(clean, eta, detail::noise_seed(seed, eta))
            : flip_labels(clean, eta, detail::noise_seed(seed, eta));

    const Hyper h = cfg.hyper.with_eta(eta);
    const Policy reference = Policy::uniform_like(world);
    const TrainTrace trace =
        train(kind, noisy.samples, reference, reference, h, cfg.train);
    if (trace.aborted) {
      row.status = "aborted: " + trace.diagnostic;
      return row;
    }
    const auto pairs = all_pairs(world);
    row.accuracy =
        evaluate_accuracy(trace.final_policy, reference, world, h, pairs);
    row.win_rate_vs_reference =
        win_rate_vs_reference(trace.final_policy, reference, world);
    const MarginStats ms = margin_stats(trace.final_policy, reference, noisy, h);
    row.mean_margin_clean = ms.mean_clean;
    row.mean_margin_noisy = ms.mean_noisy;
    row.steps_to_converge = trace.steps_taken;
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  return row;
}

/// Full grid, rows in (kind, eta, seed) order. The callback, when given,
/// sees each row as it is produced.
inline std::vector<SweepResult> sweep(
    const SweepSettings& cfg,
    const std::function<void(const SweepResult&)>& on_row = nullptr) {
  if (cfg.kinds.empty() || cfg.etas.empty() || cfg.seeds.empty()) {
    throw std::invalid_argument("sweep: empty grid");
  }
  std::vector<SweepResult> rows;
  rows.reserve(cfg.kinds.size() * cfg.etas.size() * cfg.seeds.size());
  for (LossKind kind : cfg.kinds) {
    for (double eta : cfg.etas) {
      for (std::uint64_t seed : cfg.seeds) {
        rows.push_back(run_sweep_cell(cfg, kind, eta, seed));
        if (on_row) {
          on_row(rows.back());
        }
      }
    }
  }
  return rows;
}

}  // namespace ropo
