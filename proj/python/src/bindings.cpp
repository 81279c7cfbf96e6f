#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hepex/checkpoint.hpp"
#include "hepex/hesim.hpp"
#include "hepex/nn.hpp"
#include "hepex/permute.hpp"
#include "hepex/pipeline.hpp"
#include "hepex/pruning.hpp"
#include "hepex/report.hpp"
#include "hepex/tile_shape.hpp"

namespace py = pybind11;
using namespace hepex;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

LayerPermutations to_perms(const std::vector<Permutation>& boundaries) {
  LayerPermutations p;
  p.boundaries = boundaries;
  return p;
}

TileShape tile_arg(const py::object& tile) {
  if (py::isinstance<py::str>(tile)) return parse_supported_tile_shape(tile.cast<std::string>());
  return tile.cast<TileShape>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of hepex";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
  py::register_exception<EquivalenceError>(m, "EquivalenceError", PyExc_RuntimeError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);

  py::class_<TileShape>(m, "TileShape")
      .def(py::init([](Eigen::Index t1, Eigen::Index t2, std::optional<Eigen::Index> t3) {
             TileShape t = t3 ? TileShape{t1, t2, *t3} : TileShape::from_slots(t1, t2);
             t.validate();
             return t;
           }),
           py::arg("t1"), py::arg("t2"), py::arg("t3") = py::none())
      .def_static("parse", [](const std::string& s) { return parse_supported_tile_shape(s); })
      .def_readonly("t1", &TileShape::t1)
      .def_readonly("t2", &TileShape::t2)
      .def_readonly("t3", &TileShape::t3)
      .def("__eq__", &TileShape::operator==)
      .def("__repr__", [](const TileShape& t) {
        return "TileShape(" + std::to_string(t.t1) + ", " + std::to_string(t.t2) + ", " + std::to_string(t.t3) + ")";
      });

  py::class_<Network>(m, "Network")
      .def_property_readonly("dims",
                             [](const Network& n) {
                               std::vector<Eigen::Index> d{n.input_dim()};
                               for (const FCLayer& l : n.layers) d.push_back(l.out_dim());
                               return d;
                             })
      .def_readwrite("linear_output", &Network::linear_output)
      .def("weights", [](const Network& n, std::size_t k) { return n.layers.at(k).weights; })
      .def("bias", [](const Network& n, std::size_t k) { return n.layers.at(k).bias; })
      .def("mask", [](const Network& n, std::size_t k) { return n.layers.at(k).mask; })
      .def("set_mask",
           [](Network& n, std::size_t k, const Mask& mask) {
             FCLayer& l = n.layers.at(k);
             if (mask.rows() != l.out_dim() || mask.cols() != l.in_dim()) {
               throw ShapeError("mask shape does not match layer " + std::to_string(k));
             }
             l.mask = mask;
             l.apply_mask();
           })
      .def("active_count", [](const Network& n) {
        Eigen::Index c = 0;
        for (const FCLayer& l : n.layers) c += l.active_count();
        return c;
      });

  py::class_<OpCounts>(m, "OpCounts")
      .def_readonly("add", &OpCounts::add)
      .def_readonly("mul", &OpCounts::mul)
      .def_readonly("rot", &OpCounts::rot)
      .def_readonly("relin", &OpCounts::relin)
      .def("__repr__", [](const OpCounts& c) {
        return "OpCounts(add=" + std::to_string(c.add) + ", mul=" + std::to_string(c.mul) +
               ", rot=" + std::to_string(c.rot) + ", relin=" + std::to_string(c.relin) + ")";
      });

  py::class_<SimReport>(m, "SimReport")
      .def_readonly("ops", &SimReport::ops)
      .def_readonly("allocated_tiles", &SimReport::allocated_tiles)
      .def_readonly("total_tiles", &SimReport::total_tiles)
      .def_readonly("memory_bytes", &SimReport::memory_bytes)
      .def_readonly("latency_proxy", &SimReport::latency_proxy)
      .def_readonly("output", &SimReport::output)
      .def_readonly("max_abs_deviation", &SimReport::max_abs_deviation);

  m.def("build_network", [](const std::vector<Eigen::Index>& dims, std::uint64_t seed,
                            bool linear_output) { return build_network(dims, seed, linear_output); },
        py::arg("dims"), py::arg("seed") = 0, py::arg("linear_output") = false);
  m.def("build_autoencoder",
        [](const std::string& arch, std::uint64_t seed) { return build_autoencoder(parse_arch(arch), seed); },
        py::arg("arch"), py::arg("seed") = 0);
  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path).net; });
  m.def("save_checkpoint", [](const std::string& path, const Network& net) {
    Checkpoint c;
    c.net = net;
    save_checkpoint(path, c);
  });

  m.def("predict", &predict, py::arg("net"), py::arg("batch"));
  m.def("predict_exact", &predict_exact, py::arg("net"), py::arg("batch"));
  m.def("synthetic_dataset",
        [](std::uint64_t seed, Eigen::Index count, Eigen::Index dim, double sparsity) {
          return synthetic_dataset(seed, count, dim, sparsity).samples();
        },
        py::arg("seed"), py::arg("count"), py::arg("dim"), py::arg("sparsity"));

  m.def("count_zero_tiles",
        [](const Network& net, const py::object& tile) {
          const TileCount c = count_zero_tiles(net, tile_arg(tile));
          return std::make_pair(c.zero, c.total);
        },
        "(zero, total) tiles over every layer");

  m.def("prune",
        [](const Network& net, const std::string& config, double fraction, std::uint64_t seed) {
          Network out = net;
          PruneConfig cfg = parse_prune_config(config);
          cfg.fraction = fraction;
          prune(out, cfg, seed);
          return out;
        },
        py::arg("net"), py::arg("config"), py::arg("fraction"), py::arg("seed") = 0);
  m.def("prune_pack",
        [](const Network& net, const py::object& tile, const std::string& config, double fraction) {
          Network out = net;
          const PruneConfig cfg = parse_prune_config(config);
          prune_pack(out, tile_arg(tile), cfg.criterion, cfg.scope, fraction);
          return out;
        },
        py::arg("net"), py::arg("tile"), py::arg("config"), py::arg("fraction"));
  m.def("prune_pack_threshold",
        [](const Network& net, const py::object& tile, int n) {
          Network out = net;
          prune_pack_threshold(out, tile_arg(tile), n);
          return out;
        },
        py::arg("net"), py::arg("tile"), py::arg("n"));
  m.def("expand",
        [](const Network& net, const py::object& tile) {
          Network out = net;
          expand(out, tile_arg(tile));
          return out;
        },
        py::arg("net"), py::arg("tile"));

  m.def("permute_network",
        [](const Network& net, const py::object& tile, std::uint64_t seed) {
          return permute_network(net, tile_arg(tile), seed).boundaries;
        },
        py::arg("net"), py::arg("tile"), py::arg("seed") = 0,
        "One gather permutation per neuron boundary, input first");
  m.def("apply_permutations",
        [](const Network& net, const std::vector<Permutation>& perms) {
          const LayerPermutations p = to_perms(perms);
          p.validate(net);
          return apply_permutations(net, p);
        });
  m.def("permute_inputs", [](const Matrix& batch, const std::vector<Permutation>& perms) {
    return permute_inputs(batch, to_perms(perms));
  });
  m.def("restore_outputs", [](const Matrix& output, const std::vector<Permutation>& perms) {
    return restore_outputs(output, to_perms(perms));
  });

  m.def("simulate",
        [](const Network& net, const Matrix& batch, const py::object& tile, double bytes_per_slot) {
          SimOptions o;
          o.bytes_per_slot = bytes_per_slot;
          return simulate_inference(net, batch, tile_arg(tile), o);
        },
        py::arg("net"), py::arg("batch"), py::arg("tile"), py::arg("bytes_per_slot") = kDefaultBytesPerSlot);
  m.def("memory_bytes",
        [](const Network& net, const py::object& tile, double bytes_per_slot) {
          return memory_estimate(net, tile_arg(tile), bytes_per_slot).bytes;
        },
        py::arg("net"), py::arg("tile"), py::arg("bytes_per_slot") = kDefaultBytesPerSlot);
  m.def("verify_equivalence",
        [](const Network& net, const Matrix& inputs, const py::object& tile, double tolerance) {
          return verify_equivalence(net, inputs, tile_arg(tile), tolerance);
        },
        py::arg("net"), py::arg("inputs"), py::arg("tile"), py::arg("tolerance") = 1e-9);

  m.def("run_strategy",
        [](const Network& trained, const Matrix& train, const Matrix& test, const std::string& name,
           const std::string& config, double fraction, const py::object& tile,
           std::optional<int> threshold_n, int retrain_epochs, std::uint64_t seed) {
          Strategy s;
          s.name = parse_strategy(name);
          s.prune = parse_prune_config(config);
          s.prune.fraction = fraction;
          s.tile = tile_arg(tile);
          s.threshold_n = threshold_n;
          s.retrain_epochs = retrain_epochs;
          s.seed = seed;
          StrategyResult r;
          {
            py::gil_scoped_release release;
            r = run_strategy(s, trained, Dataset(train), Dataset(test));
          }
          return py::make_tuple(r.net, r.permutations.boundaries, to_python(report_to_json(r.report)));
        },
        py::arg("trained"), py::arg("train"), py::arg("test"), py::arg("strategy"),
        py::arg("config") = "Lc/L1/Wei", py::arg("fraction") = 0.9, py::arg("tile") = "4x4",
        py::arg("threshold_n") = py::none(), py::arg("retrain_epochs") = 0, py::arg("seed") = 0,
        "Returns (network, permutations, report dict)");
}
