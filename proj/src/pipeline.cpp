#include "hepex/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <stdexcept>

#include "hepex/rng.hpp"

namespace hepex {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kRetrainStream = 5000;
constexpr std::uint64_t kPruneStream = 5001;
constexpr std::uint64_t kPermuteStream = 5002;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<double> parse_bound(std::string_view text, std::string_view prefix) {
  if (text.substr(0, prefix.size()) != prefix) return std::nullopt;
  const std::string rest(text.substr(prefix.size()));
  try {
    std::size_t used = 0;
    const double v = std::stod(rest, &used);
    if (used != rest.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

StrategyName parse_strategy(std::string_view name) {
  static const std::pair<std::string_view, StrategyName> table[] = {
      {"P2", StrategyName::P2},   {"P2T", StrategyName::P2T}, {"P3", StrategyName::P3},
      {"P3E", StrategyName::P3E}, {"P4", StrategyName::P4},   {"P4E", StrategyName::P4E}};
  for (const auto& [text, value] : table) {
    if (text == name) return value;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(name) +
                              "' (expected P2, P2T, P3, P3E, P4 or P4E)");
}

std::string to_string(StrategyName name) {
  switch (name) {
    case StrategyName::P2: return "P2";
    case StrategyName::P2T: return "P2T";
    case StrategyName::P3: return "P3";
    case StrategyName::P3E: return "P3E";
    case StrategyName::P4: return "P4";
    case StrategyName::P4E: return "P4E";
  }
  return "?";
}

std::vector<std::string> stage_sequence(StrategyName name) {
  switch (name) {
    case StrategyName::P2: return {"Train", "Prune", "Retrain", "Pack"};
    case StrategyName::P2T: return {"Train", "Prune^pack", "Retrain", "Pack"};
    case StrategyName::P3: return {"Train", "Prune", "Permute", "Retrain", "Pack"};
    case StrategyName::P3E: return {"Train", "Prune", "Permute", "Expand", "Retrain", "Pack"};
    case StrategyName::P4: return {"Train", "Prune", "Permute", "Prune^pack", "Retrain", "Pack"};
    case StrategyName::P4E:
      return {"Train", "Prune", "Permute", "Prune^pack", "Expand", "Retrain", "Pack"};
  }
  return {};
}

std::string stage_sequence_string(StrategyName name) {
  std::string out;
  for (const std::string& stage : stage_sequence(name)) {
    if (!out.empty()) out += " -> ";
    out += stage;
  }
  return out;
}

void Strategy::validate() const {
  prune.validate();
  tile.validate_supported();
  if (name == StrategyName::P2T) {
    if (!prune.is_tile_reduction()) {
      throw std::invalid_argument("P2T needs a tile criterion (T-Avg, T-Max or T-Min), got " +
                                  to_string(prune));
    }
  } else if (prune.target == Target::Tile) {
    throw std::invalid_argument(to_string(name) + " prunes weights or neurons; " +
                                to_string(prune) + " is a tile criterion");
  }
  if (name == StrategyName::P4 || name == StrategyName::P4E) {
    if (!threshold_n) throw std::invalid_argument(to_string(name) + " requires a threshold N");
    if (*threshold_n < 0) throw std::invalid_argument("threshold N must be >= 0");
  }
  if (retrain_epochs < 0) throw std::invalid_argument("retrain epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

nlohmann::json Strategy::to_json() const {
  nlohmann::json j;
  j["name"] = to_string(name);
  j["prune"] = to_string(prune);
  j["fraction"] = prune.fraction;
  j["tile"] = {tile.t1, tile.t2, tile.t3};
  j["threshold_n"] = threshold_n ? nlohmann::json(*threshold_n) : nlohmann::json();
  j["retrain_epochs"] = retrain_epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["seed"] = seed;
  j["sequence"] = stage_sequence_string(name);
  return j;
}

std::optional<double> Report::fraction_after(std::string_view stage) const {
  for (const StageSnapshot& s : stages) {
    if (s.stage == stage) return s.zero_tiles.fraction();
  }
  return std::nullopt;
}

StrategyResult run_strategy(const Strategy& s, const Network& trained, const Dataset& train_set,
                            const Dataset& test) {
  s.validate();
  trained.validate();
  if (trained.input_dim() != test.dim() || trained.output_dim() != test.dim() ||
      (train_set.count() > 0 && train_set.dim() != test.dim())) {
    throw ShapeError("run_strategy: network dims do not match the data");
  }

  StrategyResult result;
  result.net = trained;
  result.permutations = LayerPermutations::identity(trained);
  Report& report = result.report;
  report.strategy = s;
  report.sequence = stage_sequence_string(s.name);
  report.loss_before = evaluate(trained, test);
  report.notes.push_back(
      "pretraining is shared: the Train stage reuses one network trained per architecture and "
      "seed instead of training again for every grid point");
  report.notes.push_back("losses are measured on " + std::to_string(test.count()) +
                         " held-out samples (the MNIST t10k split when MNIST is used)");

  Network& net = result.net;
  auto record = [&](const std::string& stage, Clock::time_point start) {
    report.stage_log.push_back(stage);
    report.stages.push_back({stage, seconds_since(start), count_zero_tiles(net, s.tile)});
  };

  for (const std::string& stage : stage_sequence(s.name)) {
    const auto start = Clock::now();
    if (stage == "Train") {
      // Supplied pretrained.
    } else if (stage == "Prune") {
      prune(net, s.prune, Rng::derive(s.seed, kPruneStream).next());
    } else if (stage == "Prune^pack") {
      if (s.name == StrategyName::P2T) {
        prune_pack(net, s.tile, s.prune.criterion, s.prune.scope, s.prune.fraction);
      } else {
        prune_pack_threshold(net, s.tile, *s.threshold_n);
      }
    } else if (stage == "Permute") {
      const LayerPermutations perms = permute_network(
          net, s.tile, Rng::derive(s.seed, kPermuteStream).next(), s.permute.max_sweeps, s.permute);
      net = apply_permutations(net, perms);
      result.permutations = perms;
    } else if (stage == "Expand") {
      expand(net, s.tile);
    } else if (stage == "Retrain") {
      if (s.retrain_epochs > 0 && train_set.count() > 0) {
        AdamState adam;
        adam.learning_rate = s.learning_rate;
        TrainOptions opts;
        opts.epochs = s.retrain_epochs;
        opts.batch_size = s.batch_size;
        opts.seed = Rng::derive(s.seed, kRetrainStream).next();
        // Training is equivariant under reindexing, so the permuted model is
        // retrained in the original neuron order and permuted back.
        const LayerPermutations inverse = result.permutations.inverse();
        Network original = apply_permutations(net, inverse);
        hepex::train(original, train_set, opts, adam);
        net = apply_permutations(original, result.permutations);
      }
    } else if (stage == "Pack") {
      const Eigen::Index n = std::min<Eigen::Index>({s.sim_samples, s.tile.t3, test.count()});
      if (n > 0) {
        const Matrix inputs = permute_inputs(test.samples().topRows(n), result.permutations);
        const SimReport sim = simulate_inference(net, inputs, s.tile);
        report.ops = sim.ops;
        report.allocated_tiles = sim.allocated_tiles;
        report.memory_bytes = sim.memory_bytes;
        report.bytes_per_slot = sim.bytes_per_slot;
        report.latency_proxy = sim.latency_proxy;
        report.sim_deviation = sim.max_abs_deviation;
        report.sim_samples = n;
      } else {
        const MemoryEstimate mem = memory_estimate(net, s.tile);
        report.allocated_tiles = mem.allocated_tiles;
        report.memory_bytes = mem.bytes;
      }
    }
    record(stage, start);
  }

  report.loss_after = evaluate(apply_permutations(net, result.permutations.inverse()), test);
  report.zero_tiles_per_layer = count_zero_tiles_per_layer(net, s.tile);
  report.zero_tiles = count_zero_tiles(net, s.tile);
  report.zero_cell_histogram = zero_cell_histogram(net, s.tile);
  return result;
}

Objective min_loss_objective(double min_zero) {
  return {"min_loss:zero>=" + std::to_string(min_zero),
          [min_zero](const Report& r) -> std::optional<double> {
            if (r.zero_tiles.fraction() + 1e-12 < min_zero) return std::nullopt;
            return -r.loss_after;
          }};
}

Objective max_zero_objective(double max_loss) {
  return {"max_zero:loss<=" + std::to_string(max_loss),
          [max_loss](const Report& r) -> std::optional<double> {
            if (!(r.loss_after <= max_loss)) return std::nullopt;
            return r.zero_tiles.fraction();
          }};
}

Objective parse_objective(std::string_view text) {
  if (auto v = parse_bound(text, "min_loss:zero>=")) return min_loss_objective(*v);
  if (auto v = parse_bound(text, "max_zero:loss<=")) return max_zero_objective(*v);
  throw std::invalid_argument("unknown objective '" + std::string(text) +
                              "' (expected min_loss:zero>=X or max_zero:loss<=Y)");
}

GridResult grid_search(const Strategy& base, const Network& trained, const Dataset& train,
                       const Dataset& test, const std::vector<double>& fractions,
                       const std::vector<TileShape>& tiles,
                       const std::vector<std::optional<int>>& n_values,
                       const Objective& objective) {
  if (fractions.empty() || tiles.empty() || n_values.empty()) {
    throw std::invalid_argument("grid_search: every grid axis needs at least one value");
  }
  GridResult result;
  std::optional<double> best_score;
  for (double fraction : fractions) {
    for (const TileShape& tile : tiles) {
      for (const std::optional<int>& n : n_values) {
        Strategy s = base;
        s.prune.fraction = fraction;
        s.tile = tile;
        if (n) {
          s.threshold_n = n;
        } else if (s.name == StrategyName::P4 || s.name == StrategyName::P4E) {
          s.threshold_n = default_threshold_n(tile);
        }
        StrategyResult run = run_strategy(s, trained, train, test);
        const std::optional<double> score = objective.score(run.report);
        result.points.push_back({fraction, tile, s.threshold_n});
        result.reports.push_back(run.report);
        if (score && (!best_score || *score > *best_score)) {
          best_score = score;
          result.best = result.reports.size() - 1;
          result.best_model = std::move(run);
        }
      }
    }
  }
  return result;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("pipeline config must be a JSON object");
  static const char* known[] = {"arch", "strategy", "prune", "fractions", "tile_shapes", "N",
                                "seeds", "train_epochs", "retrain_epochs", "batch_size",
                                "learning_rate", "slots", "objective", "mnist_dir",
                                "train_limit", "test_limit", "linear_output"};
  for (const auto& item : j.items()) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return item.key() == k; }) == std::end(known)) {
      throw std::invalid_argument("unknown pipeline config field '" + item.key() + "'");
    }
  }
  PipelineConfig c;
  try {
    if (j.contains("arch")) c.arch = parse_arch(j.at("arch").get<std::string>());
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    c.prune = j.value("prune", c.prune);
    c.fractions = j.value("fractions", c.fractions);
    c.tile_shapes = j.value("tile_shapes", c.tile_shapes);
    if (j.contains("N")) {
      c.n_values.clear();
      for (const auto& v : j.at("N")) {
        c.n_values.push_back(v.is_null() ? std::nullopt : std::optional<int>(v.get<int>()));
      }
    }
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("train_epochs")) c.train_epochs = j.at("train_epochs").get<int>();
    if (j.contains("retrain_epochs")) c.retrain_epochs = j.at("retrain_epochs").get<int>();
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.slots = j.value("slots", c.slots);
    c.objective = j.value("objective", c.objective);
    if (j.contains("mnist_dir")) c.mnist_dir = j.at("mnist_dir").get<std::string>();
    if (j.contains("train_limit")) c.train_limit = j.at("train_limit").get<Eigen::Index>();
    if (j.contains("test_limit")) c.test_limit = j.at("test_limit").get<Eigen::Index>();
    c.linear_output = j.value("linear_output", c.linear_output);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("pipeline config: ") + e.what());
  }
  if (c.fractions.empty() || c.tile_shapes.empty() || c.n_values.empty() || c.seeds.empty()) {
    throw std::invalid_argument("pipeline config: fractions, tile_shapes, N and seeds must be non-empty");
  }
  for (double f : c.fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("pipeline config: fractions must lie in [0, 1]");
  }
  parse_prune_config(c.prune);
  parse_objective(c.objective);
  for (const TileShape& t : c.tiles()) t.validate_supported();
  c.strategy_for(c.seeds.front()).validate();
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  j["arch"] = hepex::to_string(arch);
  j["strategy"] = hepex::to_string(strategy);
  j["prune"] = prune;
  j["fractions"] = fractions;
  j["tile_shapes"] = tile_shapes;
  nlohmann::json ns = nlohmann::json::array();
  for (const auto& n : n_values) ns.push_back(n ? nlohmann::json(*n) : nlohmann::json());
  j["N"] = std::move(ns);
  j["seeds"] = seeds;
  if (train_epochs) j["train_epochs"] = *train_epochs;
  if (retrain_epochs) j["retrain_epochs"] = *retrain_epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["slots"] = slots;
  j["objective"] = objective;
  if (mnist_dir) j["mnist_dir"] = *mnist_dir;
  if (train_limit) j["train_limit"] = *train_limit;
  if (test_limit) j["test_limit"] = *test_limit;
  j["linear_output"] = linear_output;
  return j;
}

std::vector<TileShape> PipelineConfig::tiles() const {
  std::vector<TileShape> out;
  for (const std::string& t : tile_shapes) out.push_back(parse_supported_tile_shape(t, slots));
  return out;
}

Strategy PipelineConfig::strategy_for(std::uint64_t seed) const {
  Strategy s;
  s.name = strategy;
  s.prune = parse_prune_config(prune);
  s.prune.fraction = fractions.front();
  s.tile = tiles().front();
  s.threshold_n = n_values.front();
  if (!s.threshold_n && (strategy == StrategyName::P4 || strategy == StrategyName::P4E)) {
    s.threshold_n = default_threshold_n(s.tile);
  }
  s.retrain_epochs = retrain_epochs.value_or(default_epochs(arch).retrain);
  s.batch_size = batch_size;
  s.learning_rate = learning_rate;
  s.seed = seed;
  return s;
}

}  // namespace hepex
