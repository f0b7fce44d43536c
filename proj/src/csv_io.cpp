#include "upliftlab/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

namespace upliftlab {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view text, std::size_t row, const std::string& column) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw CsvError(row, column, "'" + std::string(text) + "' is not a number");
  }
  return value;
}

int parse_binary(std::string_view text, std::size_t row, const std::string& column) {
  const double v = parse_double(text, row, column);
  if (v != 0.0 && v != 1.0) {
    throw CsvError(row, column, "value " + std::string(trim(text)) + " not in {0,1}");
  }
  return static_cast<int>(v);
}

}  // namespace

CsvError::CsvError(std::size_t row, std::string column, const std::string& what)
    : std::runtime_error("csv row " + std::to_string(row) + ", column " + column + ": " + what),
      row_(row),
      column_(std::move(column)) {}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(0, "header", "file is empty");
  const auto header = split_fields(trim(line));

  std::size_t p = 0;
  while (p < header.size() && trim(header[p]) == "x" + std::to_string(p + 1)) ++p;
  const std::size_t rest = header.size() - p;
  if (p == 0) throw CsvError(0, "header", "expected covariate columns x1..xp first");
  if (rest < 2 || trim(header[p]) != "t" || trim(header[p + 1]) != "y") {
    throw CsvError(0, "header", "expected columns t,y after x" + std::to_string(p));
  }
  if (rest > 3 || (rest == 3 && trim(header[p + 2]) != "u_true")) {
    throw CsvError(0, "header", "only an optional u_true column may follow y");
  }
  const bool has_u = rest == 3;
  std::vector<std::string> names;
  for (const auto h : header) names.emplace_back(trim(h));

  std::vector<double> xs;
  std::vector<int> t, y;
  std::vector<double> u;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw CsvError(row, "*", "expected " + std::to_string(header.size()) + " fields, found " +
                                   std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < p; ++j) xs.push_back(parse_double(fields[j], row, names[j]));
    t.push_back(parse_binary(fields[p], row, "t"));
    y.push_back(parse_binary(fields[p + 1], row, "y"));
    if (has_u) {
      const double v = parse_double(fields[p + 2], row, "u_true");
      if (!(v > -1.0 && v < 1.0)) throw CsvError(row, "u_true", "value outside (-1, 1)");
      u.push_back(v);
    }
  }

  Matrix x = Eigen::Map<Matrix>(xs.data(), Eigen::Index(row), Eigen::Index(p));
  std::optional<Vector> true_uplift;
  if (has_u) true_uplift = Eigen::Map<Vector>(u.data(), Eigen::Index(u.size()));
  return Dataset(std::move(x), std::move(t), std::move(y), std::move(true_uplift));
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in);
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.p(); ++j) out << 'x' << j + 1 << ',';
  out << "t,y";
  if (data.has_true_uplift()) out << ",u_true";
  out << '\n';
  const auto t = data.t();
  const auto y = data.y();
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto r = Eigen::Index(i);
    for (std::size_t j = 0; j < data.p(); ++j) out << format_double(data.x()(r, Eigen::Index(j))) << ',';
    out << t[i] << ',' << y[i];
    if (data.has_true_uplift()) out << ',' << format_double(data.true_uplift()[r]);
    out << '\n';
  }
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(data, out);
}

}  // namespace upliftlab
