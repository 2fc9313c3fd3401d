#pragma once

#include <unistd.h>

#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hfr/error.hpp"

namespace hfr {

// Shortest round-trip decimal form: parsing the text recovers the exact
// double, which is what makes file round-trips bit-exact.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw DataError(errc::non_numeric_value,
                    "'" + std::string(text) + "' is not a number (" + context + ")");
  return v;
}

inline long parse_long(std::string_view text, const std::string& context) {
  long v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw DataError(errc::non_numeric_value,
                    "'" + std::string(text) + "' is not an integer (" + context + ")");
  return v;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(errc::io_failure, "cannot open " + path.string());
  CsvFile file;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      file.header = std::move(fields);
      first = false;
    } else {
      file.rows.push_back(std::move(fields));
    }
  }
  if (first) throw DataError(errc::bad_format, "empty file " + path.string());
  return file;
}

inline void expect_header(const CsvFile& file, const std::vector<std::string>& expected,
                          const std::string& what) {
  if (file.header != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) want += (i ? "," : "") + expected[i];
    throw DataError(errc::bad_format, what + ": expected header '" + want + "'");
  }
}

// Writes via a temp file in the same directory, then renames, so readers
// never observe a partially written file. The temp name carries pid and a
// counter so concurrent writers cannot trample each other.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid()) + "-" +
                       std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(errc::io_failure, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(errc::io_failure, "short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(errc::io_failure, "rename " + tmp.string() + " -> " + path.string() +
                                            ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(errc::io_failure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hfr
