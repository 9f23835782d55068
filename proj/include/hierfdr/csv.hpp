#pragma once

#include "hierfdr/dataset.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hierfdr {

enum class TimeScale { Raw, Log };

/// Column roles for CSV ingestion. Raw times are log-transformed on load; log
/// times are used as-is. With `x_rest` every column not otherwise claimed
/// becomes an X column.
struct CsvSchema {
  std::string time;
  std::string status;
  std::vector<std::string> z;
  std::vector<std::string> x;
  bool x_rest = false;
  TimeScale time_scale = TimeScale::Raw;
  char delimiter = ',';

  /// Accepts {"time": .., "status": .., "z": [..], "x": [..] | "*",
  /// "time_scale": "raw"|"log", "delimiter": ","}.
  static CsvSchema from_json(const std::string& text);
  std::string to_json() const;
};

SurvivalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
SurvivalDataset parse_csv(const std::string& content, const CsvSchema& schema);

}  // namespace hierfdr
