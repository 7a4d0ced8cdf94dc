#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "elbsde/deepnet/checkpoint.hpp"

namespace elbsde {

/// Comma-separated output with a fixed header; doubles at 17 significant digits.
class CsvWriter {
 public:
  using Cell = std::variant<double, long, std::string>;

  CsvWriter(const std::string& path, std::vector<std::string> header) : os_(path), width_(header.size()) {
    if (!os_) throw Error("cannot write " + path);
    write_row(header);
  }

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != width_) throw DimMismatch(width_, cells.size());
    std::vector<std::string> out;
    out.reserve(cells.size());
    for (const Cell& c : cells) {
      if (const auto* d = std::get_if<double>(&c)) out.push_back(nn::format_double(*d));
      else if (const auto* l = std::get_if<long>(&c)) out.push_back(std::to_string(*l));
      else out.push_back(std::get<std::string>(c));
    }
    write_row(out);
  }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

  std::ofstream os_;
  std::size_t width_;
};

}  // namespace elbsde
