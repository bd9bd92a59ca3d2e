#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridopt/errors.hpp"

namespace gridopt {

/// One parsed CSV row plus its 1-based line number in the source file.
struct CsvRow {
  std::vector<std::string> fields;
  int line = 0;
};

struct CsvFile {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  std::vector<std::string> comments;  // full '#' lines, in order
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
  }
  return out;
}

/// Reads a CSV file with a mandatory header row. Lines starting with '#' are
/// collected as comments and skipped; blank lines are skipped.
inline CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  CsvFile file;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      file.comments.push_back(line);
      continue;
    }
    auto fields = split_csv_line(line);
    if (!have_header) {
      file.header = std::move(fields);
      have_header = true;
    } else {
      file.rows.push_back({std::move(fields), lineno});
    }
  }
  if (!have_header) throw ParseError("missing header row: " + path);
  return file;
}

inline double parse_double(const std::string& s, const std::string& path, int line) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw ParseError(path + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s, const std::string& path, int line) {
  long v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw ParseError(path + ":" + std::to_string(line) + ": not an integer: '" + s + "'");
  return v;
}

/// Formats a double with enough digits to round-trip.
inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw InputError("cannot open file for writing: " + path);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  void comment(const std::string& text) { out_ << "# " << text << '\n'; }

 private:
  std::ofstream out_;
};

}  // namespace gridopt
