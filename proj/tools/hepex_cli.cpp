// hepex: train, prune/permute/pack, sweep, simulate and verify autoencoders.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hepex/checkpoint.hpp"
#include "hepex/checks.hpp"
#include "hepex/data.hpp"
#include "hepex/hesim.hpp"
#include "hepex/nn.hpp"
#include "hepex/pipeline.hpp"
#include "hepex/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitAssertion = 2;

class AssertionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void announce(std::uint64_t seed, const json& config) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(hepex::fnv1a(config.dump())));
  std::cout << "seed=" << seed << " config_hash=" << hash << std::endl;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

fs::path resolve_mnist(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  return hepex::mnist_dir();
}

hepex::MnistSplit load_data(const fs::path& dir, std::optional<Eigen::Index> train_limit,
                            std::optional<Eigen::Index> test_limit) {
  hepex::MnistSplit split = hepex::load_mnist(dir);
  if (train_limit) split.train = split.train.head(*train_limit);
  if (test_limit) split.test = split.test.head(*test_limit);
  return split;
}

hepex::Network pretrain(hepex::Arch arch, std::uint64_t seed, int epochs, int batch_size,
                        double lr, bool linear_output, const hepex::Dataset& train) {
  hepex::Network net = hepex::build_autoencoder(arch, seed, linear_output);
  hepex::AdamState adam;
  adam.learning_rate = lr;
  hepex::TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = batch_size;
  opts.seed = seed;
  const auto history = hepex::train(net, train, opts, adam);
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::cout << "epoch " << e + 1 << " train_loss=" << history[e] << std::endl;
  }
  return net;
}

// ---- subcommands ----

struct TrainArgs {
  std::string arch = "autoenc2";
  std::optional<std::string> mnist;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<int> epochs;
  int batch_size = 10;
  double lr = 1e-3;
  std::optional<Eigen::Index> train_limit;
  bool linear_output = false;
};

int run_train(const TrainArgs& a) {
  const hepex::Arch arch = hepex::parse_arch(a.arch);
  const int epochs = a.epochs.value_or(hepex::default_epochs(arch).train);
  json config{{"arch", hepex::to_string(arch)}, {"epochs", epochs}, {"batch_size", a.batch_size},
              {"learning_rate", a.lr}, {"linear_output", a.linear_output}};
  if (a.train_limit) config["train_limit"] = *a.train_limit;
  announce(a.seed, config);
  const hepex::MnistSplit data = load_data(resolve_mnist(a.mnist), a.train_limit, std::nullopt);
  hepex::Checkpoint ckpt;
  ckpt.net = pretrain(arch, a.seed, epochs, a.batch_size, a.lr, a.linear_output, data.train);
  ckpt.arch = arch;
  ckpt.seed = a.seed;
  ckpt.config = config;
  std::cout << "test_loss=" << hepex::evaluate(ckpt.net, data.test) << std::endl;
  hepex::save_checkpoint(a.out, ckpt);
  std::cout << "wrote " << a.out << std::endl;
  return kExitOk;
}

struct PipelineArgs {
  std::string config;
  std::string ckpt;
  std::string out;
  std::optional<std::string> mnist;
};

int run_pipeline(const PipelineArgs& a) {
  const json raw = read_json(a.config);
  const hepex::PipelineConfig cfg = hepex::PipelineConfig::from_json(raw);
  const std::uint64_t seed = cfg.seeds.front();
  announce(seed, cfg.to_json());
  const hepex::Checkpoint base = hepex::load_checkpoint(a.ckpt);
  const fs::path dir = a.mnist ? fs::path(*a.mnist)
                               : cfg.mnist_dir ? fs::path(*cfg.mnist_dir) : hepex::mnist_dir();
  const hepex::MnistSplit data = load_data(dir, cfg.train_limit, cfg.test_limit);

  hepex::StrategyResult result = hepex::run_strategy(cfg.strategy_for(seed), base.net, data.train, data.test);
  fs::create_directories(a.out);
  hepex::Checkpoint ckpt;
  ckpt.net = result.net;
  ckpt.arch = base.arch;
  ckpt.seed = seed;
  ckpt.config = cfg.to_json();
  ckpt.permutations = result.permutations;
  hepex::save_checkpoint(fs::path(a.out) / "model.json", ckpt);
  write_text(fs::path(a.out) / "report.json", hepex::report_to_json(result.report).dump(2) + "\n");
  std::cout << result.report.sequence << "\n"
            << "loss_before=" << result.report.loss_before
            << " loss_after=" << result.report.loss_after
            << " zero_tiles=" << result.report.zero_tiles.zero << "/" << result.report.zero_tiles.total
            << std::endl;
  return kExitOk;
}

struct SweepArgs {
  std::string config;
  std::string out;
  std::optional<std::string> ckpt;
  std::optional<std::string> mnist;
};

int run_sweep(const SweepArgs& a) {
  const hepex::PipelineConfig cfg = hepex::PipelineConfig::from_json(read_json(a.config));
  announce(cfg.seeds.front(), cfg.to_json());
  const fs::path dir = a.mnist ? fs::path(*a.mnist)
                               : cfg.mnist_dir ? fs::path(*cfg.mnist_dir) : hepex::mnist_dir();
  const hepex::MnistSplit data = load_data(dir, cfg.train_limit, cfg.test_limit);
  const hepex::Objective objective = hepex::parse_objective(cfg.objective);
  fs::create_directories(a.out);

  hepex::SweepTable table;
  std::optional<hepex::StrategyResult> best;
  std::optional<double> best_score;
  for (std::uint64_t seed : cfg.seeds) {
    hepex::Network base;
    if (a.ckpt) {
      base = hepex::load_checkpoint(*a.ckpt).net;
    } else {
      const int epochs = cfg.train_epochs.value_or(hepex::default_epochs(cfg.arch).train);
      base = pretrain(cfg.arch, seed, epochs, cfg.batch_size, cfg.learning_rate,
                      cfg.linear_output, data.train);
    }
    hepex::GridResult grid = hepex::grid_search(cfg.strategy_for(seed), base, data.train,
                                                data.test, cfg.fractions, cfg.tiles(),
                                                cfg.n_values, objective);
    for (const hepex::Report& r : grid.reports) {
      table.rows.push_back(hepex::sweep_row(r));
      const auto& row = table.rows.back();
      std::cout << row.strategy << " " << row.prune << " f=" << row.fraction << " tile=" << row.tile
                << " N=" << (row.n ? std::to_string(*row.n) : "-") << " seed=" << row.seed
                << " loss=" << row.loss << " zero=" << row.zero_tile_pct << "%" << std::endl;
    }
    if (grid.best) {
      const double score = *objective.score(grid.reports[*grid.best]);
      if (!best_score || score > *best_score) {
        best_score = score;
        best = std::move(grid.best_model);
      }
    }
  }
  write_text(fs::path(a.out) / "sweep.json", hepex::emit_json(table));
  write_text(fs::path(a.out) / "sweep.csv", hepex::emit_csv(table));
  if (best) {
    hepex::Checkpoint ckpt;
    ckpt.net = best->net;
    ckpt.arch = cfg.arch;
    ckpt.seed = best->report.strategy.seed;
    ckpt.config = cfg.to_json();
    ckpt.permutations = best->permutations;
    hepex::save_checkpoint(fs::path(a.out) / "best.json", ckpt);
    write_text(fs::path(a.out) / "best_report.json", hepex::report_to_json(best->report).dump(2) + "\n");
    std::cout << "best: " << objective.name << " loss=" << best->report.loss_after
              << " zero=" << 100.0 * best->report.zero_tiles.fraction() << "%" << std::endl;
  } else {
    std::cout << "no grid point satisfies " << objective.name << std::endl;
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string ckpt;
  std::string tile = "4x4";
  Eigen::Index batch = 16;
  Eigen::Index slots = hepex::kDefaultSlots;
  std::optional<std::string> mnist;
  std::uint64_t seed = 0;
  double bytes_per_slot = hepex::kDefaultBytesPerSlot;
  bool output = false;
};

int run_simulate(const SimulateArgs& a) {
  const hepex::TileShape tile = hepex::parse_supported_tile_shape(a.tile, a.slots);
  if (a.batch < 1 || a.batch > tile.t3) {
    throw std::invalid_argument("--batch must be within [1, t3 = " + std::to_string(tile.t3) + "]");
  }
  announce(a.seed, json{{"tile", a.tile}, {"batch", a.batch}, {"slots", a.slots},
                        {"bytes_per_slot", a.bytes_per_slot}});
  const hepex::Checkpoint ckpt = hepex::load_checkpoint(a.ckpt);
  const fs::path dir = resolve_mnist(a.mnist);
  hepex::Matrix inputs;
  std::string source;
  if (fs::exists(dir / "t10k-images-idx3-ubyte") && ckpt.net.input_dim() == 784) {
    inputs = hepex::load_mnist_idx(dir / "t10k-images-idx3-ubyte").head(a.batch).samples();
    source = "mnist test";
  } else {
    inputs = hepex::synthetic_dataset(a.seed, a.batch, ckpt.net.input_dim(), 0.5).samples();
    source = "synthetic";
  }
  if (ckpt.permutations) inputs = hepex::permute_inputs(inputs, *ckpt.permutations);
  hepex::SimOptions options;
  options.bytes_per_slot = a.bytes_per_slot;
  const hepex::SimReport sim = hepex::simulate_inference(ckpt.net, inputs, tile, options);
  json j = hepex::sim_report_to_json(sim, a.output);
  j["inputs"] = source;
  std::cout << j.dump(2) << std::endl;
  return kExitOk;
}

struct VerifyArgs {
  std::string ckpt;
  std::uint64_t seed = 0;
  std::string tile = "4x4";
};

int run_verify(const VerifyArgs& a) {
  const hepex::TileShape tile = hepex::parse_supported_tile_shape(a.tile);
  announce(a.seed, json{{"ckpt", a.ckpt}, {"tile", a.tile}});
  const hepex::Checkpoint ckpt = hepex::load_checkpoint(a.ckpt);
  bool ok = true;
  for (const hepex::CheckResult& r : hepex::run_invariant_suite(ckpt.net, a.seed, tile)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << std::endl;
    ok &= r.passed;
  }
  if (!ok) throw AssertionFailure("invariant suite failed");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packing-aware pruning and tile-tensor inference simulation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train an autoencoder on MNIST");
  train_cmd->add_option("--arch", train.arch, "autoenc1, autoenc2 or autoenc3")->capture_default_str();
  train_cmd->add_option("--mnist", train.mnist, "MNIST directory (default: $HEPEX_MNIST_DIR)");
  train_cmd->add_option("--seed", train.seed)->capture_default_str();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", train.epochs, "Defaults to the architecture's schedule");
  train_cmd->add_option("--batch-size", train.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train.lr)->capture_default_str();
  train_cmd->add_option("--train-limit", train.train_limit, "Use only the first N training images");
  train_cmd->add_flag("--linear-output", train.linear_output, "No square after the last layer");

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run one strategy on a pretrained checkpoint");
  pipe_cmd->add_option("--config", pipe.config)->required()->check(CLI::ExistingFile);
  pipe_cmd->add_option("--ckpt", pipe.ckpt)->required()->check(CLI::ExistingFile);
  pipe_cmd->add_option("--out", pipe.out, "Output directory")->required();
  pipe_cmd->add_option("--mnist", pipe.mnist);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search over fractions, tile shapes and N");
  sweep_cmd->add_option("--config", sweep.config)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
  sweep_cmd->add_option("--ckpt", sweep.ckpt, "Pretrained base (otherwise trained per seed)")
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--mnist", sweep.mnist);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Tile-tensor inference with op counting");
  sim_cmd->add_option("--ckpt", sim.ckpt)->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--tile", sim.tile, "t1xt2 with t1, t2 in {2, 4, 8, 16}")->capture_default_str();
  sim_cmd->add_option("--batch", sim.batch)->capture_default_str();
  sim_cmd->add_option("--slots", sim.slots, "Slots per ciphertext")->capture_default_str();
  sim_cmd->add_option("--bytes-per-slot", sim.bytes_per_slot)->capture_default_str();
  sim_cmd->add_option("--mnist", sim.mnist);
  sim_cmd->add_option("--seed", sim.seed, "Seed for synthetic inputs")->capture_default_str();
  sim_cmd->add_flag("--output", sim.output, "Include decoded outputs");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run the invariant suite on a checkpoint");
  verify_cmd->add_option("--ckpt", verify.ckpt)->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--seed", verify.seed)->capture_default_str();
  verify_cmd->add_option("--tile", verify.tile)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*pipe_cmd) return run_pipeline(pipe);
    if (*sweep_cmd) return run_sweep(sweep);
    if (*sim_cmd) return run_simulate(sim);
    if (*verify_cmd) return run_verify(verify);
  } catch (const AssertionFailure& e) {
    std::cerr << "assertion failed: " << e.what() << std::endl;
    return kExitAssertion;
  } catch (const hepex::EquivalenceError& e) {
    std::cerr << "assertion failed: " << e.what() << std::endl;
    return kExitAssertion;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitInvalid;
  }
  return kExitInvalid;
}
