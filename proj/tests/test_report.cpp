#include <doctest.h>

#include "hepex/report.hpp"
#include "support.hpp"

using namespace hepex;

namespace {

SweepRow sample_row() {
  SweepRow r;
  r.strategy = "P4E";
  r.prune = "Lc/L1/Wei";
  r.fraction = 0.9;
  r.tile = "8x8";
  r.n = 4;
  r.seed = 2;
  r.loss = 0.0123456789012345678;
  r.zero_tile_pct = 65.0 + 1.0 / 3.0;
  r.add = 10;
  r.mul = 20;
  r.rot = 30;
  r.relin = 40;
  r.allocated_tiles = 17;
  r.memory_bytes = 17.0 * 16384 * 16;
  return r;
}

}  // namespace

TEST_CASE("empty sweeps are refused") {
  CHECK_THROWS_WITH_AS(emit_json(SweepTable{}), "empty sweep", ReportError);
  CHECK_THROWS_WITH_AS(emit_csv(SweepTable{}), "empty sweep", ReportError);
}

TEST_CASE("one row gives a header and one CRLF record") {
  const std::string csv = emit_csv(SweepTable{{sample_row()}});
  std::size_t lines = 0;
  for (std::size_t p = csv.find("\r\n"); p != std::string::npos; p = csv.find("\r\n", p + 2)) ++lines;
  CHECK(lines == 2);
  CHECK(csv.rfind("schema,strategy,prune,fraction,tile,N,seed,loss,zero_tile_pct,add,mul,rot,relin,"
                  "allocated_tiles,memory_bytes\r\n",
                  0) == 0);
  CHECK(csv.find("hepex-sweep/1,P4E,Lc/L1/Wei,0.90000000000000002,8x8,4,2,") != std::string::npos);
}

TEST_CASE("round trips are exact") {
  SweepRow a = sample_row();
  SweepRow b = sample_row();
  b.n.reset();
  b.strategy = "P2";
  b.prune = "-/Rnd/Wei";
  b.loss = 1e-300;
  const SweepTable table{{a, b}};
  CHECK(parse_json(emit_json(table)) == table);
  CHECK(parse_csv(emit_csv(table)) == table);
}

TEST_CASE("csv quoting") {
  SweepRow r = sample_row();
  r.strategy = "odd, \"name\"\nwith lines";
  const SweepTable table{{r}};
  const std::string csv = emit_csv(table);
  CHECK(csv.find("\"odd, \"\"name\"\"\nwith lines\"") != std::string::npos);
  CHECK(parse_csv(csv) == table);
}

TEST_CASE("malformed input") {
  CHECK_THROWS_AS(parse_csv("a,b\r\n"), ReportError);
  const std::string good = emit_csv(SweepTable{{sample_row()}});
  std::string bad = good;
  bad.replace(bad.find("0.90000000000000002"), 19, "ninety");
  CHECK_THROWS_AS(parse_csv(bad), ReportError);
  CHECK_THROWS_AS(parse_csv(good.substr(0, good.size() - 10)), ReportError);
  CHECK_THROWS_AS(parse_csv(good + "\"open"), ReportError);
  CHECK_THROWS_AS(parse_json("{}"), ReportError);
  CHECK_THROWS_AS(parse_json("{"), ReportError);
  CHECK_THROWS_AS(parse_json(R"({"schema": "hepex-sweep/1", "rows": [{"strategy": 1}]})"), ReportError);
}

TEST_CASE("rows from reports") {
  Report rep;
  rep.strategy.name = StrategyName::P3E;
  rep.strategy.prune = parse_prune_config("Lc/L1/Wei");
  rep.strategy.prune.fraction = 0.95;
  rep.strategy.tile = TileShape::from_slots(16, 16);
  rep.strategy.seed = 7;
  rep.loss_after = 0.5;
  rep.zero_tiles = {3, 4};
  rep.ops = {1, 2, 3, 4};
  rep.allocated_tiles = 1;
  rep.memory_bytes = 262144.0;
  const SweepRow r = sweep_row(rep);
  CHECK(r.strategy == "P3E");
  CHECK(r.tile == "16x16");
  CHECK_FALSE(r.n.has_value());
  CHECK(r.zero_tile_pct == 75.0);
  CHECK(r.relin == 4);
  const auto j = report_to_json(rep);
  CHECK(j.at("schema") == kReportSchema);
  CHECK(j.at("strategy").at("sequence") == stage_sequence_string(StrategyName::P3E));
}

TEST_CASE("simulator reports") {
  const Eigen::Index dims[] = {4, 4};
  const Network net = build_network(dims, 0);
  const SimReport sim = simulate_inference(net, Matrix::Ones(2, 4), TileShape{2, 2, 4});
  const auto j = sim_report_to_json(sim, true);
  CHECK(j.contains("output"));
  CHECK_FALSE(sim_report_to_json(sim).contains("output"));
}
