#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Deterministic output helpers.  Numbers are rendered with %.17g so a
// round-trip through text is exact; no timestamps or hostnames appear in
// any file, which keeps outputs byte-identical for a fixed seed.
namespace horosim {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + path + "': " + ec.message());
}

// CSV with "# key = value" comment lines carrying the resolved config,
// then a header row, then data rows.
class CsvWriter {
 public:
  CsvWriter(const std::string& path,
            const std::vector<std::pair<std::string, std::string>>& config,
            const std::vector<std::string>& columns)
      : out_(path), n_cols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (const auto& [k, v] : config) out_ << "# " << k << " = " << v << "\n";
    for (size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_)
      throw std::logic_error("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(n_cols_));
    for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  size_t n_cols_;
};

inline std::string csv_cell(double v) { return format_g17(v); }
inline std::string csv_cell(long v) { return std::to_string(v); }
inline std::string csv_cell(int v) { return std::to_string(v); }
inline std::string csv_cell(bool v) { return v ? "1" : "0"; }
inline std::string csv_cell(const std::string& v) { return v; }

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
}

}  // namespace horosim
