#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "upliftlab/dataset.hpp"

namespace upliftlab {

// Parse failure carrying the 1-based data row (0 for the header) and the
// column name where it occurred.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t row, std::string column, const std::string& what);
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

// Header "x1,...,xp,t,y" with an optional trailing "u_true" column.
Dataset read_csv(std::istream& in);
Dataset load_csv(const std::filesystem::path& path);

// Values written with 17 significant digits.
void write_csv(const Dataset& data, std::ostream& out);
void save_csv(const Dataset& data, const std::filesystem::path& path);

// Shortest-safe %.17g formatting shared by all CSV writers.
std::string format_double(double value);

}  // namespace upliftlab
