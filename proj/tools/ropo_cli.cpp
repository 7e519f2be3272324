// Command-line front end: generate synthetic preference data, train a single
// configuration, run the theory verification report, sweep the noise grid,
// and summarize result files.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ropo/harness.hpp"
#include "ropo/io.hpp"
#include "ropo/losses.hpp"
#include "ropo/noise.hpp"
#include "ropo/prefmodel.hpp"
#include "ropo/theory.hpp"
#include "ropo/trainer.hpp"
#include "ropo/verify.hpp"

namespace {

struct Options {
  std::uint64_t seed = 0;
  double eta = 0.0;
  std::string loss = "ropo";
  double beta = 0.5;
  double eps = 0.1;
  double alpha = 1.0;
  double gamma = 0.1;
  double clip = 5.0;
  std::string out;

  int queries = 20;
  int responses = 4;
  double scale = 1.0;
  std::size_t samples = 500;
  std::string noise_mode = "fraction";  // or "iid"

  double lr = 0.5;
  int steps = 1500;
  double grad_tol = 1e-6;
  int record_every = 100;
  bool population = false;

  std::string world_file;
  std::string data_file;
  std::string in_file;
  std::string etas = "0,0.1,0.2,0.3,0.4";
  int n_seeds = 10;

  ropo::Hyper hyper() const {
    return ropo::Hyper(beta, eps, alpha, gamma, eta, clip);
  }

  ropo::TrainConfig train_config() const {
    ropo::TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.max_steps = steps;
    cfg.grad_tol = grad_tol;
    cfg.record_every = record_every;
    if (population) {
      cfg.risk_mode = ropo::RiskMode::population;
      cfg.population_eta = eta;
    }
    return cfg;
  }
};

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.push_back(ropo::io::parse_double(item));
    }
  }
  return out;
}

std::vector<ropo::LossKind> parse_loss_list(const std::string& s) {
  std::vector<ropo::LossKind> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.push_back(ropo::loss_kind_from_string(item));
    }
  }
  return out;
}

int cmd_generate(const Options& opt) {
  const std::string prefix = opt.out.empty() ? "ropo_run" : opt.out;
  const ropo::WorldSpec spec{opt.queries, opt.responses, opt.scale,
                             ropo::derive_seed(opt.seed, 1)};
  const ropo::World world = ropo::generate_world(spec);
  const auto clean =
      ropo::generate_dataset(world, opt.samples, ropo::derive_seed(opt.seed, 2));
  const ropo::NoisyDataset noisy =
      opt.noise_mode == "iid"
          ? ropo::flip_labels(clean, opt.eta, ropo::derive_seed(opt.seed, 3))
          : ropo::flip_exact_fraction(clean, opt.eta,
                                      ropo::derive_seed(opt.seed, 3));
  ropo::io::save(prefix + ".world.csv",
                 [&](std::ostream& os) { ropo::io::write_world(os, world); });
  ropo::io::save(prefix + ".dataset.csv",
                 [&](std::ostream& os) { ropo::io::write_dataset(os, noisy); });
  std::size_t flipped = 0;
  for (bool f : noisy.flip_mask) {
    flipped += f ? 1 : 0;
  }
  std::cout << "wrote " << prefix << ".world.csv (" << opt.queries << " queries x "
            << opt.responses << " responses) and " << prefix << ".dataset.csv ("
            << noisy.samples.size() << " samples, " << flipped << " flipped)\n";
  return 0;
}

int cmd_train(const Options& opt) {
  std::optional<ropo::World> world;
  ropo::NoisyDataset data;
  if (!opt.world_file.empty() && !opt.data_file.empty()) {
    world = ropo::io::load(opt.world_file, ropo::io::read_world);
    data = ropo::io::load(opt.data_file, ropo::io::read_dataset);
  } else {
    const ropo::WorldSpec spec{opt.queries, opt.responses, opt.scale,
                               ropo::derive_seed(opt.seed, 1)};
    world = ropo::generate_world(spec);
    const auto clean = ropo::generate_dataset(*world, opt.samples,
                                              ropo::derive_seed(opt.seed, 2));
    data = opt.noise_mode == "iid"
               ? ropo::flip_labels(clean, opt.eta, ropo::derive_seed(opt.seed, 3))
               : ropo::flip_exact_fraction(clean, opt.eta,
                                           ropo::derive_seed(opt.seed, 3));
  }

  const ropo::Hyper h = opt.hyper();
  const ropo::Policy reference = ropo::Policy::uniform_like(*world);
  const ropo::LossKind kind = ropo::loss_kind_from_string(opt.loss);
  const ropo::TrainTrace trace =
      ropo::train(kind, data.samples, reference, reference, h, opt.train_config());

  const std::string prefix = opt.out.empty() ? "ropo_train" : opt.out;
  ropo::io::save(prefix + ".trace.csv",
                 [&](std::ostream& os) { ropo::io::write_trace(os, trace); });
  ropo::io::save(prefix + ".policy.csv", [&](std::ostream& os) {
    ropo::io::write_policy(os, trace.final_policy);
  });

  if (trace.aborted) {
    std::cerr << "training aborted: " << trace.diagnostic << "\n";
    return 1;
  }
  const auto pairs = ropo::all_pairs(*world);
  const double acc =
      ropo::evaluate_accuracy(trace.final_policy, reference, *world, h, pairs);
  std::cout << "loss=" << opt.loss << " eta=" << opt.eta
            << " steps=" << trace.steps_taken
            << " converged=" << (trace.converged ? "yes" : "no")
            << " final_risk=" << trace.steps.back().risk << " accuracy=" << acc
            << "\nwrote " << prefix << ".trace.csv and " << prefix
            << ".policy.csv\n";
  return 0;
}

int cmd_verify(const Options& opt) {
  const ropo::Hyper h = opt.hyper();
  const auto records = ropo::verify::run_all(h, opt.seed);
  if (!opt.out.empty()) {
    ropo::io::save(opt.out, [&](std::ostream& os) {
      ropo::verify::write_report(os, h, records);
    });
  } else {
    ropo::verify::write_report(std::cout, h, records);
  }
  std::size_t failed = 0;
  for (const auto& r : records) {
    failed += r.pass ? 0 : 1;
  }
  if (failed > 0) {
    std::cerr << "verify: " << failed << " of " << records.size()
              << " checks FAILED\n";
    return 1;
  }
  std::cout << "# verify: all " << records.size() << " checks passed\n";
  return 0;
}

int cmd_sweep(const Options& opt) {
  ropo::SweepSettings cfg;
  cfg.kinds = parse_loss_list(opt.loss);
  cfg.etas = parse_double_list(opt.etas);
  cfg.seeds.clear();
  for (int s = 0; s < opt.n_seeds; ++s) {
    cfg.seeds.push_back(opt.seed + static_cast<std::uint64_t>(s));
  }
  cfg.n_queries = opt.queries;
  cfg.n_responses = opt.responses;
  cfg.reward_scale = opt.scale;
  cfg.n_samples = opt.samples;
  cfg.hyper = opt.hyper();
  cfg.train = opt.train_config();
  cfg.exact_fraction = opt.noise_mode != "iid";

  const std::string path = opt.out.empty() ? "results.csv" : opt.out;
  std::ofstream os(path);
  if (!os) {
    std::cerr << "cannot open " << path << "\n";
    return 1;
  }
  ropo::io::write_results_header(os);
  std::size_t done = 0;
  const std::size_t total = cfg.kinds.size() * cfg.etas.size() * cfg.seeds.size();
  ropo::sweep(cfg, [&](const ropo::SweepResult& row) {
    ropo::io::write_result_row(os, row);
    os.flush();
    ++done;
    std::cerr << "\rsweep " << done << "/" << total << std::flush;
  });
  std::cerr << "\n";
  std::cout << "wrote " << path << " (" << total << " rows)\n";
  return 0;
}

int cmd_report(const Options& opt) {
  const auto rows = ropo::io::load(opt.in_file, ropo::io::read_results);
  // mean accuracy per (kind, eta) across seeds
  std::map<std::pair<std::string, double>, std::vector<double>> acc;
  for (const auto& r : rows) {
    if (r.status == "ok") {
      acc[{ropo::to_string(r.kind), r.eta}].push_back(r.accuracy);
    }
  }
  std::cout << std::left << std::setw(10) << "kind" << std::setw(8) << "eta"
            << std::setw(12) << "accuracy" << std::setw(10) << "stddev"
            << std::setw(6) << "n" << "\n";
  for (const auto& [key, vals] : acc) {
    double mean = 0.0;
    for (double v : vals) {
      mean += v;
    }
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) {
      var += (v - mean) * (v - mean);
    }
    var = vals.size() > 1 ? var / static_cast<double>(vals.size() - 1) : 0.0;
    std::cout << std::left << std::setw(10) << key.first << std::setw(8)
              << key.second << std::setw(12) << std::setprecision(4) << mean
              << std::setw(10) << std::sqrt(var) << std::setw(6) << vals.size()
              << "\n";
  }
  if (!opt.out.empty()) {
    ropo::io::save(opt.out, [&](std::ostream& os) {
      ropo::io::write_long_format(os, rows);
    });
    std::cout << "wrote long-format data to " << opt.out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale laboratory for noise-tolerant preference optimization"};
  app.fallthrough();
  app.set_config("--config", "", "flat key=value config file (flags override)");

  Options opt;
  app.add_option("--seed", opt.seed, "base random seed");
  app.add_option("--eta", opt.eta, "label noise rate");
  app.add_option("--loss", opt.loss,
                 "loss kind (dpo|ipo|cdpo|cipo|ropo|combined); sweep accepts a "
                 "comma list");
  app.add_option("--beta", opt.beta, "implicit-reward scale beta");
  app.add_option("--eps", opt.eps, "label-smoothing eps");
  app.add_option("--alpha", opt.alpha, "combined-loss ropo coefficient");
  app.add_option("--gamma", opt.gamma, "combined-loss dpo coefficient");
  app.add_option("--clip", opt.clip, "margin clip bound M");
  app.add_option("--out", opt.out, "output path or prefix");
  app.add_option("--queries", opt.queries, "queries in the synthetic world");
  app.add_option("--responses", opt.responses, "responses per query");
  app.add_option("--scale", opt.scale, "latent reward standard deviation");
  app.add_option("--samples", opt.samples, "preference samples to draw");
  app.add_option("--noise-mode", opt.noise_mode,
                 "fraction (exact count) or iid flips");
  app.add_option("--lr", opt.lr, "learning rate");
  app.add_option("--steps", opt.steps, "max gradient steps");
  app.add_option("--grad-tol", opt.grad_tol, "gradient norm stop tolerance");
  app.add_option("--record-every", opt.record_every, "trace recording stride");
  app.add_flag("--population", opt.population,
               "train on the exact population risk at --eta");

  auto* generate = app.add_subcommand("generate", "write world + dataset files");
  auto* train = app.add_subcommand("train", "train one configuration");
  train->add_option("--world", opt.world_file, "world file (with --data)");
  train->add_option("--data", opt.data_file, "dataset file (with --world)");
  auto* verify = app.add_subcommand("verify", "run the theory verification report");
  auto* sweep = app.add_subcommand("sweep", "run the noise-ratio sweep grid");
  sweep->add_option("--etas", opt.etas, "comma list of noise rates");
  sweep->add_option("--seeds", opt.n_seeds, "number of seeds (seed..seed+n-1)");
  auto* report = app.add_subcommand("report", "summarize a results file");
  report->add_option("file", opt.in_file, "results csv")->required();

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      return cmd_generate(opt);
    }
    if (train->parsed()) {
      return cmd_train(opt);
    }
    if (verify->parsed()) {
      return cmd_verify(opt);
    }
    if (sweep->parsed()) {
      return cmd_sweep(opt);
    }
    if (report->parsed()) {
      return cmd_report(opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
