#pragma once

// CSV tables, run manifests and plain-text configuration files. Numbers are
// written in the shortest form that reads back to the same double, so files
// round-trip and repeated runs compare byte for byte.

#include "hilltop/continuation.hpp"

#include <boost/crc.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

namespace hilltop::io {

namespace fs = std::filesystem;

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

using Cell = std::variant<double, long long, std::string>;

inline std::string format_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

/// Table with a fixed header; rows must match its width.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<Cell> row) {
    if (row.size() != header_.size()) {
      throw Error(ErrorCode::bad_input, "row width " + std::to_string(row.size()) +
                                            " does not match header width " +
                                            std::to_string(header_.size()));
    }
    rows_.push_back(std::move(row));
  }
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  std::string str() const {
    std::string out;
    auto line = [&](auto&& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) {
      std::vector<std::string> cells;
      cells.reserve(r.size());
      for (const auto& c : r) cells.push_back(format_cell(c));
      line(cells);
    }
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

inline std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type c;
  c.process_bytes(bytes.data(), bytes.size());
  return c.checksum();
}

inline std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::bad_input, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Output directory that remembers every file written for the manifest.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  const fs::path& path() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::bad_input, "cannot write " + (dir_ / name).string());
    out << content;
    files_[name] = {content.size(), crc32(content)};
  }
  void write(const std::string& name, const Table& t) { write(name, t.str()); }

  nlohmann::json file_list() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [name, info] : files_) {
      j.push_back({{"name", name}, {"bytes", info.first}, {"crc32", hex32(info.second)}});
    }
    return j;
  }

 private:
  fs::path dir_;
  std::map<std::string, std::pair<std::size_t, std::uint32_t>> files_;
};

/// Branch as a table: index, all monitors, step data and the event tag.
/// `extra` appends named columns computed from each point and its index.
using ExtraColumns = std::vector<
    std::pair<std::string, std::function<double(const BranchPoint&, std::size_t)>>>;

inline Table branch_table(const Branch& b, const ExtraColumns& extra = {},
                          const std::string& run = {}) {
  std::vector<std::string> header;
  if (!run.empty()) header.push_back("run");
  header.push_back("index");
  for (const auto& m : b.monitor_names) header.push_back(m);
  for (const auto& e : extra) header.push_back(e.first);
  for (const char* h : {"step", "newton_iterations", "residual", "event"}) header.push_back(h);
  Table t(header);
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    const BranchPoint& p = b.points[i];
    std::vector<Cell> row;
    if (!run.empty()) row.emplace_back(run);
    row.emplace_back(static_cast<long long>(i));
    for (double m : p.monitors) row.emplace_back(m);
    for (const auto& e : extra) row.emplace_back(e.second(p, i));
    row.emplace_back(p.step);
    row.emplace_back(static_cast<long long>(p.newton_iterations));
    row.emplace_back(p.residual);
    row.emplace_back(p.event);
    t.add(std::move(row));
  }
  return t;
}

/// Flat `key = value` file with `#` comments. Keys keep their file order.
struct ConfigFile {
  std::vector<std::pair<std::string, std::string>> entries;

  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static ConfigFile parse(const std::string& text, const std::string& origin = "config") {
    ConfigFile c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = origin + ":" + std::to_string(lineno);
      if (eq == std::string::npos) throw Error(ErrorCode::bad_input, where + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(ErrorCode::bad_input, where + ": empty key");
      for (const auto& [k, v] : c.entries) {
        if (k == key) throw Error(ErrorCode::bad_input, where + ": duplicate key " + key);
      }
      c.entries.emplace_back(std::move(key), std::move(value));
    }
    return c;
  }

  static ConfigFile load(const fs::path& p) { return parse(read_file(p), p.string()); }
};

/// Canonical text of a resolved configuration (sorted keys) and its hash.
inline std::string canonical_config(const std::map<std::string, std::string>& resolved) {
  std::string out;
  for (const auto& [k, v] : resolved) out += k + " = " + v + "\n";
  return out;
}

}  // namespace hilltop::io
