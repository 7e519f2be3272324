// A miniature noise-ratio sweep: two losses, three noise rates, three seeds.
// Shows how ropo's ground-truth accuracy holds up as labels degrade.

#include <cstdio>

#include "ropo/harness.hpp"

using namespace ropo;

int main() {
  SweepSettings cfg;
  cfg.kinds = {LossKind::dpo, LossKind::ropo};
  cfg.etas = {0.0, 0.2, 0.4};
  cfg.seeds = {0, 1, 2};

  std::printf("%-6s %5s %5s %9s %9s\n", "loss", "eta", "seed", "accuracy",
              "winrate");
  sweep(cfg, [](const SweepResult& row) {
    std::printf("%-6s %5.2f %5llu %9.4f %9.4f\n", to_string(row.kind), row.eta,
                static_cast<unsigned long long>(row.seed), row.accuracy,
                row.win_rate_vs_reference);
  });
  return 0;
}
