#include "hepex/checkpoint.hpp"

#include <fstream>

namespace hepex {

namespace {

using nlohmann::json;

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  }
  return rows;
}

// Masks are stored one string of '0'/'1' per row.
json mask_rows(const Mask& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::string s(static_cast<std::size_t>(m.cols()), '0');
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0) s[static_cast<std::size_t>(j)] = '1';
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw CheckpointError(std::string("checkpoint is missing field '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

json network_to_json(const Network& net) {
  json j;
  std::vector<Eigen::Index> dims{net.input_dim()};
  for (const FCLayer& layer : net.layers) dims.push_back(layer.out_dim());
  j["dims"] = dims;
  j["linear_output"] = net.linear_output;
  json layers = json::array();
  for (const FCLayer& layer : net.layers) {
    layers.push_back({{"weights", matrix_rows(layer.weights)},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())},
                      {"mask", mask_rows(layer.mask)}});
  }
  j["layers"] = std::move(layers);
  return j;
}

Network network_from_json(const json& j) {
  try {
    const auto dims = field(j, "dims").get<std::vector<Eigen::Index>>();
    const json& layers = field(j, "layers");
    if (dims.size() < 2 || layers.size() + 1 != dims.size()) {
      throw CheckpointError("checkpoint dims do not match its layer count");
    }
    Network net;
    net.linear_output = j.value("linear_output", false);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const Eigen::Index out = dims[k + 1];
      const Eigen::Index in = dims[k];
      const json& lj = layers[k];
      const json& w = field(lj, "weights");
      const json& m = field(lj, "mask");
      const auto bias = field(lj, "bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != out || static_cast<Eigen::Index>(m.size()) != out ||
          static_cast<Eigen::Index>(bias.size()) != out) {
        throw CheckpointError("layer " + std::to_string(k) + " row count does not match dims");
      }
      FCLayer layer;
      layer.weights.resize(out, in);
      layer.mask.resize(out, in);
      layer.bias = Eigen::Map<const Vector>(bias.data(), out);
      for (Eigen::Index i = 0; i < out; ++i) {
        const auto row = w[static_cast<std::size_t>(i)].get<std::vector<double>>();
        const auto bits = m[static_cast<std::size_t>(i)].get<std::string>();
        if (static_cast<Eigen::Index>(row.size()) != in || static_cast<Eigen::Index>(bits.size()) != in) {
          throw CheckpointError("layer " + std::to_string(k) + " row " + std::to_string(i) +
                                " has the wrong width");
        }
        for (Eigen::Index c = 0; c < in; ++c) {
          layer.weights(i, c) = row[static_cast<std::size_t>(c)];
          const char bit = bits[static_cast<std::size_t>(c)];
          if (bit != '0' && bit != '1') throw CheckpointError("mask entries must be '0' or '1'");
          layer.mask(i, c) = bit == '1' ? 1 : 0;
        }
      }
      net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed network: ") + e.what());
  }
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["format"] = kCheckpointFormat;
  if (ckpt.arch) j["arch"] = to_string(*ckpt.arch);
  j["seed"] = ckpt.seed;
  j["config"] = ckpt.config;
  j["network"] = network_to_json(ckpt.net);
  if (ckpt.permutations) j["permutations"] = ckpt.permutations->boundaries;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  const json& format = field(j, "format");
  if (!format.is_string() || format.get<std::string>() != kCheckpointFormat) {
    throw CheckpointError("unsupported checkpoint format " + format.dump() + ", expected \"" +
                          kCheckpointFormat + "\"");
  }
  try {
    Checkpoint ckpt;
    ckpt.net = network_from_json(field(j, "network"));
    if (j.contains("arch")) ckpt.arch = parse_arch(j.at("arch").get<std::string>());
    ckpt.seed = j.value("seed", std::uint64_t{0});
    ckpt.config = j.value("config", json::object());
    if (j.contains("permutations")) {
      LayerPermutations perms;
      perms.boundaries = j.at("permutations").get<std::vector<Permutation>>();
      try {
        perms.validate(ckpt.net);
      } catch (const ShapeError& e) {
        throw CheckpointError(std::string("invalid permutations: ") + e.what());
      }
      ckpt.permutations = std::move(perms);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace hepex
