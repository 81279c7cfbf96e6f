#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hepex/nn.hpp"
#include "hepex/permute.hpp"

namespace hepex {

inline constexpr const char* kCheckpointFormat = "hepex-checkpoint/1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A network plus what is needed to reproduce or serve it: the config it
/// came from and, for permuted models, the client-side p_in/p_out vectors.
struct Checkpoint {
  Network net;
  std::optional<Arch> arch;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::optional<LayerPermutations> permutations;
};

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hepex
