#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bidrl/errors.hpp"

namespace bidrl::csv {

// Shortest round-trip-safe text for a double; locale independent and
// identical across runs.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string num(long long x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }
inline std::string num(unsigned long long x) { return std::to_string(x); }
inline std::string num(unsigned long x) { return std::to_string(x); }

// Fields joined by `sep` (used for list-valued cells such as seed lists).
template <class T>
std::string join(const std::vector<T>& xs, char sep = ' ') {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += num(xs[i]);
  }
  return out;
}

class Writer {
 public:
  explicit Writer(std::vector<std::string> header) : width_(header.size()) { row(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw LengthMismatch("csv row has " + std::to_string(fields.size()) +
                                                      " fields, header has " + std::to_string(width_));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].find_first_of(",\n\"") != std::string::npos) {
        throw InvalidParameter("csv field '" + fields[i] + "' needs quoting");
      }
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << out_.str();
  }

 private:
  std::size_t width_;
  std::ostringstream out_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw InvalidParameter("csv has no column '" + name + "'");
  }
};

// Strict reader: header required, every row as wide as the header, no empty
// lines, trailing newline required.
inline Table parse(const std::string& text) {
  Table t;
  if (text.empty() || text.back() != '\n') throw Error("csv must end with a newline");
  std::istringstream in(text);
  std::string line;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) throw Error("csv line " + std::to_string(lineno) + " is empty");
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size()) {
        throw Error("csv line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                    " fields, header has " + std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw Error("csv has no header");
  return t;
}

inline Table read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

}  // namespace bidrl::csv
