#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hepex/hesim.hpp"
#include "hepex/pipeline.hpp"

namespace hepex {

inline constexpr const char* kSweepSchema = "hepex-sweep/1";
inline constexpr const char* kReportSchema = "hepex-report/1";

struct SweepRow {
  std::string strategy;
  std::string prune;
  double fraction = 0.0;
  std::string tile;
  std::optional<int> n;
  std::uint64_t seed = 0;
  double loss = 0.0;
  double zero_tile_pct = 0.0;
  std::int64_t add = 0;
  std::int64_t mul = 0;
  std::int64_t rot = 0;
  std::int64_t relin = 0;
  std::int64_t allocated_tiles = 0;
  double memory_bytes = 0.0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  bool operator==(const SweepTable&) const = default;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SweepRow sweep_row(const Report& report);

/// Both emitters refuse an empty table with "empty sweep".
std::string emit_json(const SweepTable& table);
std::string emit_csv(const SweepTable& table);
SweepTable parse_json(const std::string& text);
SweepTable parse_csv(const std::string& text);

/// CSV column names in emission order.
const std::vector<std::string>& csv_header();

nlohmann::json report_to_json(const Report& report);
nlohmann::json sim_report_to_json(const SimReport& sim, bool include_output = false);

}  // namespace hepex
