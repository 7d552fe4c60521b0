#include "blipcdf/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "blipcdf/errors.hpp"

namespace blipcdf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_number(const std::string& cell, std::size_t row, const std::string& column) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || errno != 0 || !std::isfinite(v)) {
    throw DataError("row " + std::to_string(row) + ", column '" + column + "': not a finite number: '" + cell + "'");
  }
  return v;
}

std::size_t column_index(const CsvTable& table, const std::string& name) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw DataError("CSV has no column named '" + name + "'");
  return static_cast<std::size_t>(it - table.header.begin());
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                      " fields, found " + std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw DataError("CSV is empty");
  return table;
}

LoadedData load_dataset(const CsvTable& table, const LoadOptions& opt) {
  LoadedData out;
  const std::size_t a_col = column_index(table, opt.treatment_column);
  const std::size_t y_col = column_index(table, opt.outcome_column);
  std::optional<std::size_t> g_col;
  if (opt.propensity_column) g_col = column_index(table, *opt.propensity_column);

  std::vector<std::size_t> w_cols;
  if (opt.covariate_columns.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c != a_col && c != y_col && (!g_col || c != *g_col)) {
        w_cols.push_back(c);
        out.covariate_columns.push_back(table.header[c]);
      }
    }
  } else {
    for (const auto& name : opt.covariate_columns) w_cols.push_back(column_index(table, name));
    out.covariate_columns = opt.covariate_columns;
  }
  if (w_cols.empty()) throw DataError("no covariate columns found");

  const std::size_t n = table.rows.size();
  if (n < 2) throw DataError("dataset needs at least 2 rows");
  Dataset& data = out.data;
  data.W.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(w_cols.size()));
  data.A.resize(n);
  std::vector<double> raw_y(n);
  if (g_col) out.known_g.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const std::size_t row_no = i + 2;  // header is line 1
    for (std::size_t k = 0; k < w_cols.size(); ++k) {
      data.W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          to_number(row[w_cols[k]], row_no, table.header[w_cols[k]]);
    }
    const double a = to_number(row[a_col], row_no, opt.treatment_column);
    if (a != 0.0 && a != 1.0) {
      throw DataError("row " + std::to_string(row_no) + ": treatment must be 0 or 1, found '" + row[a_col] + "'");
    }
    data.A[i] = static_cast<int>(a);
    raw_y[i] = to_number(row[y_col], row_no, opt.outcome_column);
    if (g_col) {
      const double g = to_number(row[*g_col], row_no, *opt.propensity_column);
      if (!(g > 0.0 && g < 1.0)) {
        throw DataError("row " + std::to_string(row_no) + ": known propensity must lie in (0, 1)");
      }
      (*out.known_g)[i] = g;
    }
  }
  const bool binary = std::all_of(raw_y.begin(), raw_y.end(), [](double v) { return v == 0.0 || v == 1.0; });
  if (binary && !opt.y_bounds) {
    const bool constant = std::all_of(raw_y.begin(), raw_y.end(), [&](double v) { return v == raw_y.front(); });
    if (constant) throw DataError("outcome is constant; nothing to estimate");
    data.Y = raw_y;
    data.y_bounds = {0.0, 1.0};
  } else {
    std::pair<double, double> bounds = opt.y_bounds.value_or(std::pair<double, double>{0.0, 0.0});
    data.Y = scale_outcome(raw_y, bounds, opt.y_bounds.has_value());
    data.y_bounds = bounds;
    out.outcome_scaled = true;
  }
  data.validate();
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dataset_to_csv(const Dataset& data, const std::vector<double>* known_g) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index k = 0; k < data.W.cols(); ++k) os << 'W' << k + 1 << ',';
  os << "A,Y";
  if (known_g) os << ",g";
  os << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (Eigen::Index k = 0; k < data.W.cols(); ++k) os << data.W(static_cast<Eigen::Index>(i), k) << ',';
    os << data.A[i] << ',' << data.Y[i];
    if (known_g) os << ',' << (*known_g)[i];
    os << '\n';
  }
  return os.str();
}

}  // namespace blipcdf
