#include "hierfdr/csv.hpp"

#include "hierfdr/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace hierfdr {
namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  for (auto& cell : cells) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
  }
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  auto where = [&] { return " (row " + std::to_string(row) + ", column '" + column + "')"; };
  if (cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan") {
    fail(ErrorCode::Parse, "missing value" + where());
  }
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) fail(ErrorCode::Parse, "non-numeric cell '" + cell + "'" + where());
  return v;
}

}  // namespace

CsvSchema CsvSchema::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Parse, "schema must be a JSON object");
  CsvSchema s;
  try {
    if (!j.contains("time") || !j.contains("status") || !j.contains("z") || !j.contains("x")) {
      fail(ErrorCode::Parse, "schema needs 'time', 'status', 'z' and 'x'");
    }
    s.time = j.at("time").get<std::string>();
    s.status = j.at("status").get<std::string>();
    s.z = j.at("z").get<std::vector<std::string>>();
    if (j.at("x").is_string()) {
      if (j.at("x").get<std::string>() != "*") fail(ErrorCode::Parse, "'x' must be a list of columns or \"*\"");
      s.x_rest = true;
    } else {
      s.x = j.at("x").get<std::vector<std::string>>();
    }
    const std::string scale = j.value("time_scale", std::string("raw"));
    if (scale == "raw") {
      s.time_scale = TimeScale::Raw;
    } else if (scale == "log") {
      s.time_scale = TimeScale::Log;
    } else {
      fail(ErrorCode::Parse, "time_scale must be 'raw' or 'log'");
    }
    const std::string delim = j.value("delimiter", std::string(","));
    if (delim == "\\t" || delim == "tab") {
      s.delimiter = '\t';
    } else if (delim.size() == 1) {
      s.delimiter = delim[0];
    } else {
      fail(ErrorCode::Parse, "delimiter must be a single character");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed schema: ") + e.what());
  }
  if (s.z.empty()) fail(ErrorCode::Parse, "schema needs at least one Z column");
  if (!s.x_rest && s.x.empty()) fail(ErrorCode::Parse, "schema needs at least one X column");
  return s;
}

std::string CsvSchema::to_json() const {
  json j;
  j["time"] = time;
  j["status"] = status;
  j["z"] = z;
  if (x_rest) {
    j["x"] = "*";
  } else {
    j["x"] = x;
  }
  j["time_scale"] = time_scale == TimeScale::Raw ? "raw" : "log";
  j["delimiter"] = delimiter == '\t' ? std::string("\\t") : std::string(1, delimiter);
  return j.dump();
}

SurvivalDataset parse_csv(const std::string& content, const CsvSchema& schema) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Parse, "empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const std::vector<std::string> header = split_line(line, schema.delimiter);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!pos.emplace(header[c], c).second) fail(ErrorCode::Parse, "duplicate column '" + header[c] + "'");
  }
  auto column = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) fail(ErrorCode::Parse, "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t time_col = column(schema.time);
  const std::size_t status_col = column(schema.status);
  std::vector<std::size_t> z_cols;
  for (const auto& name : schema.z) z_cols.push_back(column(name));
  std::vector<std::string> x_names = schema.x;
  if (schema.x_rest) {
    x_names.clear();
    for (const auto& name : header) {
      if (name == schema.time || name == schema.status) continue;
      if (std::find(schema.z.begin(), schema.z.end(), name) != schema.z.end()) continue;
      x_names.push_back(name);
    }
    if (x_names.empty()) fail(ErrorCode::Parse, "no columns left for X");
  }
  std::vector<std::size_t> x_cols;
  for (const auto& name : x_names) x_cols.push_back(column(name));

  std::vector<double> times;
  std::vector<int> status;
  std::vector<double> xs;
  std::vector<double> zs;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++row;
    const std::vector<std::string> cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      fail(ErrorCode::Parse, "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                 " cells, header has " + std::to_string(header.size()));
    }
    double t = parse_number(cells[time_col], row, schema.time);
    if (schema.time_scale == TimeScale::Raw) {
      if (!(t > 0.0)) {
        fail(ErrorCode::InvalidArgument, "non-positive time " + cells[time_col] + " at row " + std::to_string(row) +
                                             " cannot be log-transformed");
      }
      t = std::log(t);
    }
    times.push_back(t);
    const std::string& sc = cells[status_col];
    int s = -1;
    if (sc == "true" || sc == "TRUE") {
      s = 1;
    } else if (sc == "false" || sc == "FALSE") {
      s = 0;
    } else {
      const double v = parse_number(sc, row, schema.status);
      if (v == 0.0) s = 0;
      if (v == 1.0) s = 1;
    }
    if (s < 0) fail(ErrorCode::InvalidArgument, "status value '" + sc + "' at row " + std::to_string(row) + " is not 0 or 1");
    status.push_back(s);
    for (std::size_t k = 0; k < z_cols.size(); ++k) zs.push_back(parse_number(cells[z_cols[k]], row, schema.z[k]));
    for (std::size_t k = 0; k < x_cols.size(); ++k) xs.push_back(parse_number(cells[x_cols[k]], row, x_names[k]));
  }
  const Index n = static_cast<Index>(times.size());
  if (n == 0) fail(ErrorCode::Parse, "CSV has no data rows");
  const Index d = static_cast<Index>(x_cols.size());
  const Index q = static_cast<Index>(z_cols.size());
  VectorXd y = Eigen::Map<VectorXd>(times.data(), n);
  VectorXi st = Eigen::Map<VectorXi>(status.data(), n);
  MatrixXd x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, d);
  MatrixXd z = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(zs.data(), n, q);
  return SurvivalDataset(std::move(y), std::move(st), std::move(x), std::move(z), std::move(x_names), schema.z);
}

SurvivalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

}  // namespace hierfdr
