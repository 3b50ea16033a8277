#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isurv/common.hpp"

namespace isurv::data {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t column(std::string_view name) const;  // throws naming the column
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

// Shortest text that parses back to the same double.
std::string format_double(double v);
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

bool is_missing(std::string_view field);
double parse_number(std::string_view field, std::string_view what);

enum class ColumnKind { numeric, ordinal, categorical };

struct FeatureSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::map<std::string, double> encoding;  // ordinal/categorical string -> code
  bool minmax = false;                     // rescale to [0,1] with training min/max
};

// Encodings quoted for the head-and-neck clinical variables.
std::map<std::string, double> smoking_status_encoding();
std::map<std::string, double> hpv_encoding();
std::map<std::string, double> tnm_stage_encoding();
std::map<std::string, double> named_encoding(std::string_view name);

struct DatasetManifest {
  std::filesystem::path csv_path;
  std::string id_column = "id";
  std::string time_column = "time";
  std::string event_column = "event";
  std::vector<FeatureSpec> features;
  std::vector<std::string> teacher_columns;
  std::optional<std::string> split_column;
  std::string train_value = "train";
  std::string test_value = "test";
  double split_fraction = 0.3;  // test share when no split column
  std::uint64_t split_seed = 0;
  std::optional<std::string> stage_column;  // must be one of the features
  std::vector<int> stage_codes{0, 1, 2, 3, 4, 5};
};

DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct MinMaxParam {
  std::string name;
  double min = 0.0;
  double max = 1.0;
};

struct Dataset {
  std::vector<std::string> ids;
  FeatureTable features;
  FeatureTable teachers;
  Outcomes outcomes;
  std::vector<bool> is_test;
  std::vector<MinMaxParam> minmax;
  std::size_t rows_in = 0;
  std::size_t rows_used = 0;
  std::size_t rows_dropped_missing = 0;

  std::vector<std::size_t> train_rows() const;
  std::vector<std::size_t> test_rows() const;
};

Dataset load_dataset(const DatasetManifest& manifest);
Dataset load_dataset(const DatasetManifest& manifest, const CsvTable& csv);

}  // namespace isurv::data
