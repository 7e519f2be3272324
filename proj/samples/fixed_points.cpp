// Trains each loss on a single-pair population risk at a fixed noise rate and
// prints the learned margin next to the closed-form optimum. The noisy
// optimum moving away from the clean one is the noise-sensitivity of the
// baselines made visible; ropo stays pinned at the boundary.

#include <cstdio>

#include "ropo/harness.hpp"
#include "ropo/theory.hpp"
#include "ropo/trainer.hpp"

using namespace ropo;

int main() {
  const Hyper h(0.5, 0.1, 1.0, 0.1, 0.0, 5.0);
  const double eta = 0.2;

  World world({0}, {{0, 1}}, {1.0, 0.0});
  const Policy reference = Policy::uniform_like(world);
  const std::vector<PreferenceSample> pair = {{0, 0, 1, 0}};

  TrainConfig cfg;
  cfg.risk_mode = RiskMode::population;
  cfg.population_eta = eta;
  cfg.learning_rate = 2.0;
  cfg.max_steps = 200000;
  cfg.grad_tol = 1e-10;

  std::printf("%-6s %12s %12s %12s  %s\n", "loss", "clean opt", "noisy opt",
              "trained", "boundary?");
  for (LossKind kind : {LossKind::dpo, LossKind::ipo, LossKind::cdpo,
                        LossKind::cipo, LossKind::ropo}) {
    const FixedPoint clean = noisy_fixed_point(kind, h, 0.0);
    const FixedPoint noisy = noisy_fixed_point(kind, h, eta);
    const TrainTrace trace = train(kind, pair, reference, reference, h, cfg);
    const PairMargins pm =
        pair_margins(trace.final_policy, reference, 0, 0, 1, h);
    const double trained =
        uses_unscaled_margin(kind) ? pm.clipped / h.beta() : pm.clipped;
    std::printf("%-6s %12.6f %12.6f %12.6f  %s\n", to_string(kind),
                clean.location, noisy.location, trained,
                noisy.is_boundary ? "yes" : "no");
  }
  return 0;
}
