#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blipcdf/dataset.hpp"

namespace blipcdf {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated with a header row. Throws DataError on ragged rows.
CsvTable parse_csv(const std::string& text);

struct LoadOptions {
  std::string treatment_column = "A";
  std::string outcome_column = "Y";
  std::vector<std::string> covariate_columns;  // empty: every other column
  std::optional<std::string> propensity_column;
  std::optional<std::pair<double, double>> y_bounds;
};

struct LoadedData {
  Dataset data;
  std::optional<std::vector<double>> known_g;
  bool outcome_scaled = false;
  std::vector<std::string> covariate_columns;
};

/// Builds a validated Dataset. Binary outcomes are kept as is; anything else
/// is mapped onto [0, 1] by (y - min) / (max - min).
LoadedData load_dataset(const CsvTable& table, const LoadOptions& opt);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string content_hash(const std::string& bytes);

/// Dataset back to CSV with columns W1..Wp,A,Y (for simulated data export).
std::string dataset_to_csv(const Dataset& data, const std::vector<double>* known_g = nullptr);

}  // namespace blipcdf
