#include "hepex/report.hpp"

#include <cstdio>
#include <sstream>

namespace hepex {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      field_started = false;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ReportError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

double to_double(const std::string& s, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ReportError(std::string("csv: column '") + column + "' is not a number: '" + s + "'");
}

std::int64_t to_int(const std::string& s, const char* column) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ReportError(std::string("csv: column '") + column + "' is not an integer: '" + s + "'");
}

json row_to_json(const SweepRow& r) {
  return json{{"strategy", r.strategy},
              {"prune", r.prune},
              {"fraction", r.fraction},
              {"tile", r.tile},
              {"N", r.n ? json(*r.n) : json()},
              {"seed", r.seed},
              {"loss", r.loss},
              {"zero_tile_pct", r.zero_tile_pct},
              {"add", r.add},
              {"mul", r.mul},
              {"rot", r.rot},
              {"relin", r.relin},
              {"allocated_tiles", r.allocated_tiles},
              {"memory_bytes", r.memory_bytes}};
}

json ops_json(const OpCounts& c) {
  return json{{"add", c.add}, {"mul", c.mul}, {"rot", c.rot}, {"relin", c.relin}};
}

json count_json(const TileCount& c) {
  return json{{"zero", c.zero}, {"total", c.total}, {"fraction", c.fraction()}};
}

void require_rows(const SweepTable& table) {
  if (table.rows.empty()) throw ReportError("empty sweep");
}

}  // namespace

const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> header{
      "schema", "strategy", "prune", "fraction", "tile", "N", "seed", "loss", "zero_tile_pct",
      "add", "mul", "rot", "relin", "allocated_tiles", "memory_bytes"};
  return header;
}

SweepRow sweep_row(const Report& report) {
  SweepRow r;
  r.strategy = to_string(report.strategy.name);
  r.prune = to_string(report.strategy.prune);
  r.fraction = report.strategy.prune.fraction;
  r.tile = to_string(report.strategy.tile);
  r.n = report.strategy.threshold_n;
  r.seed = report.strategy.seed;
  r.loss = report.loss_after;
  r.zero_tile_pct = 100.0 * report.zero_tiles.fraction();
  r.add = report.ops.add;
  r.mul = report.ops.mul;
  r.rot = report.ops.rot;
  r.relin = report.ops.relin;
  r.allocated_tiles = report.allocated_tiles;
  r.memory_bytes = report.memory_bytes;
  return r;
}

std::string emit_json(const SweepTable& table) {
  require_rows(table);
  json rows = json::array();
  for (const SweepRow& r : table.rows) rows.push_back(row_to_json(r));
  return json{{"schema", kSweepSchema}, {"rows", std::move(rows)}}.dump(2) + "\n";
}

SweepTable parse_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ReportError(std::string("sweep json: ") + e.what());
  }
  if (j.value("schema", std::string()) != kSweepSchema) {
    throw ReportError(std::string("sweep json: expected schema ") + kSweepSchema);
  }
  SweepTable table;
  try {
    for (const json& r : j.at("rows")) {
      SweepRow row;
      row.strategy = r.at("strategy").get<std::string>();
      row.prune = r.at("prune").get<std::string>();
      row.fraction = r.at("fraction").get<double>();
      row.tile = r.at("tile").get<std::string>();
      if (!r.at("N").is_null()) row.n = r.at("N").get<int>();
      row.seed = r.at("seed").get<std::uint64_t>();
      row.loss = r.at("loss").get<double>();
      row.zero_tile_pct = r.at("zero_tile_pct").get<double>();
      row.add = r.at("add").get<std::int64_t>();
      row.mul = r.at("mul").get<std::int64_t>();
      row.rot = r.at("rot").get<std::int64_t>();
      row.relin = r.at("relin").get<std::int64_t>();
      row.allocated_tiles = r.at("allocated_tiles").get<std::int64_t>();
      row.memory_bytes = r.at("memory_bytes").get<double>();
      table.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw ReportError(std::string("sweep json: ") + e.what());
  }
  return table;
}

std::string emit_csv(const SweepTable& table) {
  require_rows(table);
  std::ostringstream out;
  const auto& header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\r\n";
  for (const SweepRow& r : table.rows) {
    out << kSweepSchema << ',' << csv_field(r.strategy) << ',' << csv_field(r.prune) << ','
        << format_double(r.fraction) << ',' << csv_field(r.tile) << ','
        << (r.n ? std::to_string(*r.n) : std::string()) << ',' << r.seed << ','
        << format_double(r.loss) << ',' << format_double(r.zero_tile_pct) << ',' << r.add << ','
        << r.mul << ',' << r.rot << ',' << r.relin << ',' << r.allocated_tiles << ','
        << format_double(r.memory_bytes) << "\r\n";
  }
  return out.str();
}

SweepTable parse_csv(const std::string& text) {
  const auto records = split_csv(text);
  if (records.empty() || records.front() != csv_header()) {
    throw ReportError("csv: header does not match the sweep schema");
  }
  SweepTable table;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != csv_header().size()) {
      throw ReportError("csv: record " + std::to_string(i) + " has " + std::to_string(f.size()) +
                        " fields");
    }
    if (f[0] != kSweepSchema) throw ReportError("csv: unknown schema tag '" + f[0] + "'");
    SweepRow r;
    r.strategy = f[1];
    r.prune = f[2];
    r.fraction = to_double(f[3], "fraction");
    r.tile = f[4];
    if (!f[5].empty()) r.n = static_cast<int>(to_int(f[5], "N"));
    r.seed = static_cast<std::uint64_t>(std::stoull(f[6]));
    r.loss = to_double(f[7], "loss");
    r.zero_tile_pct = to_double(f[8], "zero_tile_pct");
    r.add = to_int(f[9], "add");
    r.mul = to_int(f[10], "mul");
    r.rot = to_int(f[11], "rot");
    r.relin = to_int(f[12], "relin");
    r.allocated_tiles = to_int(f[13], "allocated_tiles");
    r.memory_bytes = to_double(f[14], "memory_bytes");
    table.rows.push_back(std::move(r));
  }
  return table;
}

nlohmann::json report_to_json(const Report& report) {
  json j;
  j["schema"] = kReportSchema;
  j["strategy"] = report.strategy.to_json();
  j["sequence"] = report.sequence;
  j["stage_log"] = report.stage_log;
  json stages = json::array();
  for (const StageSnapshot& s : report.stages) {
    stages.push_back({{"stage", s.stage}, {"seconds", s.seconds}, {"zero_tiles", count_json(s.zero_tiles)}});
  }
  j["stages"] = std::move(stages);
  j["loss_before"] = report.loss_before;
  j["loss_after"] = report.loss_after;
  json per_layer = json::array();
  for (const TileCount& c : report.zero_tiles_per_layer) per_layer.push_back(count_json(c));
  j["zero_tiles_per_layer"] = std::move(per_layer);
  j["zero_tiles"] = count_json(report.zero_tiles);
  j["zero_cell_histogram"] = report.zero_cell_histogram;
  j["ops"] = ops_json(report.ops);
  j["allocated_tiles"] = report.allocated_tiles;
  j["memory_bytes"] = report.memory_bytes;
  j["bytes_per_slot"] = report.bytes_per_slot;
  j["latency_proxy"] = report.latency_proxy;
  j["sim_samples"] = report.sim_samples;
  j["sim_deviation"] = report.sim_deviation;
  j["notes"] = report.notes;
  return j;
}

nlohmann::json sim_report_to_json(const SimReport& sim, bool include_output) {
  json j;
  j["schema"] = kReportSchema;
  j["tile"] = {sim.tile.t1, sim.tile.t2, sim.tile.t3};
  j["ops"] = ops_json(sim.ops);
  json layers = json::array();
  for (const LayerSim& l : sim.layers) {
    layers.push_back({{"ops", ops_json(l.ops)},
                      {"weight_tiles", l.weight_tiles},
                      {"allocated_tiles", l.allocated_tiles},
                      {"output_tiles", l.output_tiles}});
  }
  j["layers"] = std::move(layers);
  j["allocated_tiles"] = sim.allocated_tiles;
  j["total_tiles"] = sim.total_tiles;
  j["bytes_per_slot"] = sim.bytes_per_slot;
  j["memory_bytes"] = sim.memory_bytes;
  j["latency_weights"] = {{"add", sim.latency_weights.add},
                          {"mul", sim.latency_weights.mul},
                          {"rot", sim.latency_weights.rot},
                          {"relin", sim.latency_weights.relin}};
  j["latency_proxy"] = sim.latency_proxy;
  j["max_abs_deviation"] = sim.max_abs_deviation;
  if (include_output) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < sim.output.rows(); ++i) {
      rows.push_back(std::vector<double>(sim.output.row(i).begin(), sim.output.row(i).end()));
    }
    j["output"] = std::move(rows);
  }
  return j;
}

}  // namespace hepex
