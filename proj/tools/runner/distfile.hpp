#pragma once

// Distribution files: one table row per line, whitespace-separated
// decimals, '#' starts a comment. A single row is a distribution over K
// symbols; K rows of K entries are a joint over (x1, x2). The whole table
// must sum to 1 within 1e-9 unless renormalization is requested.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace divlab::cli {

using Table = std::vector<std::vector<double>>;

inline constexpr double kFileMassTolerance = 1e-9;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t row, std::size_t line, const std::string& what)
      : std::runtime_error(fmt::format("{}: row {} (line {}): {}", source, row, line, what)), row_(row), line_(line) {}

  /// 1-based row of the offending table row.
  std::size_t row() const { return row_; }
  std::size_t line() const { return line_; }

 private:
  std::size_t row_;
  std::size_t line_;
};

inline Table parse_distribution(const std::string& text, const std::string& source, bool renormalize) {
  Table rows;
  std::vector<std::size_t> lines;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string body = raw.substr(0, raw.find('#'));
    std::istringstream tokens(body);
    std::vector<double> row;
    std::string tok;
    while (tokens >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw ParseError(source, rows.size() + 1, lineno, "'" + tok + "' is not a number");
      if (!std::isfinite(v) || v < 0.0) {
        throw ParseError(source, rows.size() + 1, lineno, "entry " + tok + " is negative or non-finite");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(source, rows.size() + 1, lineno,
                       fmt::format("has {} entries, row 1 has {}", row.size(), rows.front().size()));
    }
    rows.push_back(std::move(row));
    lines.push_back(lineno);
  }
  if (rows.empty()) throw ParseError(source, 1, lineno, "no table rows");
  if (rows.size() > 1 && rows.size() != rows.front().size()) {
    throw ParseError(source, rows.size(), lines.back(),
                     fmt::format("a joint table must be square, got {} rows of {}", rows.size(), rows.front().size()));
  }

  double total = 0.0;
  for (const auto& r : rows) {
    for (double v : r) total += v;
  }
  if (!(total > 0.0)) throw ParseError(source, rows.size(), lines.back(), "table has no mass");
  if (renormalize) {
    for (auto& r : rows) {
      for (double& v : r) v /= total;
    }
  } else if (std::abs(total - 1.0) > kFileMassTolerance) {
    // Report the row where the running sum stops matching a unit table: the
    // last row, since earlier rows cannot be blamed individually.
    double before = total;
    for (double v : rows.back()) before -= v;
    throw ParseError(source, rows.size(), lines.back(),
                     fmt::format("table sums to {:.12g}; this row holds {:.12g} but {:.12g} was needed "
                                 "(pass --renormalize to rescale)",
                                 total, total - before, 1.0 - before));
  }
  return rows;
}

inline Table read_distribution_file(const std::string& path, bool renormalize) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_distribution(ss.str(), path, renormalize);
}

}  // namespace divlab::cli
