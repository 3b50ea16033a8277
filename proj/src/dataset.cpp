#include "isurv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "isurv/random.hpp"

namespace isurv::data {

std::optional<std::size_t> CsvTable::find(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const {
  if (auto j = find(name)) return *j;
  throw Error("column '" + std::string(name) + "' not found in CSV header");
}

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw Error("unterminated quoted CSV field");
  if (field_started || !record.empty()) end_record();
  if (records.empty()) throw Error("CSV has no header row");

  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw Error("CSV row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                  " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_escape(fields[i]);
  os << '\n';
}

bool is_missing(std::string_view f) {
  while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
  while (!f.empty() && f.back() == ' ') f.remove_suffix(1);
  return f.empty() || f == "NA" || f == "NaN" || f == "nan" || f == "N/A" || f == "." || f == "null";
}

double parse_number(std::string_view field, std::string_view what) {
  std::string s(field);
  s.erase(0, s.find_first_not_of(' '));
  s.erase(s.find_last_not_of(' ') + 1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error("non-numeric " + std::string(what) + " value '" + std::string(field) + "'");
  return v;
}

std::map<std::string, double> smoking_status_encoding() {
  return {{"non-smoker", 1.0}, {"ex-smoker", 0.0}, {"current", -1.0}, {"current smoker", -1.0}};
}

std::map<std::string, double> hpv_encoding() {
  return {{"positive", 1.0}, {"unknown", 0.0}, {"negative", -1.0}};
}

std::map<std::string, double> tnm_stage_encoding() {
  return {{"0", 0.0}, {"I", 1.0}, {"II", 2.0}, {"III", 3.0}, {"IVA", 4.0}, {"IVB", 5.0}};
}

std::map<std::string, double> named_encoding(std::string_view name) {
  if (name == "smoking_status") return smoking_status_encoding();
  if (name == "hpv") return hpv_encoding();
  if (name == "tnm_stage") return tnm_stage_encoding();
  throw Error("unknown named encoding '" + std::string(name) + "'");
}

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw Error("unknown key '" + it.key() + "' in " + where);
}

ColumnKind kind_from(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "ordinal") return ColumnKind::ordinal;
  if (s == "categorical") return ColumnKind::categorical;
  throw Error("unknown column kind '" + s + "'");
}

const char* kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::ordinal: return "ordinal";
    case ColumnKind::categorical: return "categorical";
  }
  return "numeric";
}

}  // namespace

DatasetManifest manifest_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"csv_path", "id_column", "time_column", "event_column", "features", "teacher_columns",
                 "split_column", "train_value", "test_value", "split_fraction", "split_seed",
                 "stage_column", "stage_codes"},
             "manifest");
  DatasetManifest m;
  try {
    const std::filesystem::path csv = j.at("csv_path").get<std::string>();
    m.csv_path = csv.is_relative() && !base_dir.empty() ? base_dir / csv : csv;
    m.id_column = j.value("id_column", m.id_column);
    m.time_column = j.value("time_column", m.time_column);
    m.event_column = j.value("event_column", m.event_column);
    for (const auto& f : j.value("features", json::array())) {
      FeatureSpec spec;
      if (f.is_string()) {
        spec.name = f.get<std::string>();
      } else {
        check_keys(f, {"name", "kind", "encoding", "minmax"}, "feature spec");
        spec.name = f.at("name").get<std::string>();
        spec.kind = kind_from(f.value("kind", std::string("numeric")));
        spec.minmax = f.value("minmax", false);
        if (f.contains("encoding")) {
          const auto& e = f.at("encoding");
          if (e.is_string())
            spec.encoding = named_encoding(e.get<std::string>());
          else
            spec.encoding = e.get<std::map<std::string, double>>();
        }
        if (spec.kind == ColumnKind::categorical && spec.encoding.empty())
          throw Error("categorical column '" + spec.name + "' needs an encoding map");
      }
      m.features.push_back(std::move(spec));
    }
    m.teacher_columns = j.value("teacher_columns", std::vector<std::string>{});
    if (j.contains("split_column") && !j.at("split_column").is_null())
      m.split_column = j.at("split_column").get<std::string>();
    m.train_value = j.value("train_value", m.train_value);
    m.test_value = j.value("test_value", m.test_value);
    m.split_fraction = j.value("split_fraction", m.split_fraction);
    m.split_seed = j.value("split_seed", m.split_seed);
    if (j.contains("stage_column") && !j.at("stage_column").is_null())
      m.stage_column = j.at("stage_column").get<std::string>();
    m.stage_codes = j.value("stage_codes", m.stage_codes);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid manifest: ") + e.what());
  }
  if (!(m.split_fraction >= 0.0 && m.split_fraction < 1.0))
    throw Error("split_fraction must lie in [0, 1)");
  if (m.stage_column &&
      std::none_of(m.features.begin(), m.features.end(), [&](const auto& f) { return f.name == *m.stage_column; }))
    throw Error("stage column '" + *m.stage_column + "' must be a declared feature");
  return m;
}

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["csv_path"] = m.csv_path.string();
  j["id_column"] = m.id_column;
  j["time_column"] = m.time_column;
  j["event_column"] = m.event_column;
  j["features"] = json::array();
  for (const auto& f : m.features) {
    json s{{"name", f.name}, {"kind", kind_name(f.kind)}, {"minmax", f.minmax}};
    if (!f.encoding.empty()) s["encoding"] = f.encoding;
    j["features"].push_back(s);
  }
  j["teacher_columns"] = m.teacher_columns;
  if (m.split_column) j["split_column"] = *m.split_column;
  j["train_value"] = m.train_value;
  j["test_value"] = m.test_value;
  j["split_fraction"] = m.split_fraction;
  j["split_seed"] = m.split_seed;
  if (m.stage_column) j["stage_column"] = *m.stage_column;
  j["stage_codes"] = m.stage_codes;
  return j;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

std::vector<std::size_t> Dataset::train_rows() const {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < is_test.size(); ++i)
    if (!is_test[i]) r.push_back(i);
  return r;
}

std::vector<std::size_t> Dataset::test_rows() const {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < is_test.size(); ++i)
    if (is_test[i]) r.push_back(i);
  return r;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  return load_dataset(manifest, read_csv(manifest.csv_path));
}

Dataset load_dataset(const DatasetManifest& m, const CsvTable& csv) {
  const auto id_col = csv.find(m.id_column);
  const auto time_col = csv.column(m.time_column);
  const auto event_col = csv.column(m.event_column);
  std::vector<std::size_t> feat_cols, teacher_cols;
  for (const auto& f : m.features) feat_cols.push_back(csv.column(f.name));
  for (const auto& t : m.teacher_columns) teacher_cols.push_back(csv.column(t));
  std::optional<std::size_t> split_col;
  if (m.split_column) split_col = csv.column(*m.split_column);

  std::vector<std::size_t> used_cols{time_col, event_col};
  used_cols.insert(used_cols.end(), feat_cols.begin(), feat_cols.end());
  used_cols.insert(used_cols.end(), teacher_cols.begin(), teacher_cols.end());
  if (split_col) used_cols.push_back(*split_col);

  Dataset ds;
  ds.rows_in = csv.rows.size();
  std::vector<std::vector<double>> feats(m.features.size()), teach(m.teacher_columns.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (std::any_of(used_cols.begin(), used_cols.end(), [&](std::size_t c) { return is_missing(row[c]); })) {
      ++ds.rows_dropped_missing;
      continue;
    }
    const std::string where = " (row " + std::to_string(r + 1) + ")";
    const double t = parse_number(row[time_col], "time" + where);
    if (t < 0.0) throw Error("negative time" + where);
    const double e = parse_number(row[event_col], "event" + where);
    if (e != 0.0 && e != 1.0) throw Error("event must be 0 or 1" + where);
    ds.outcomes.push_back({t, e == 1.0});
    ds.ids.push_back(id_col ? row[*id_col] : std::to_string(r + 1));

    for (std::size_t k = 0; k < m.features.size(); ++k) {
      const auto& spec = m.features[k];
      const std::string& raw = row[feat_cols[k]];
      if (!spec.encoding.empty()) {
        auto it = spec.encoding.find(raw);
        if (it == spec.encoding.end())
          throw Error("unmapped category '" + raw + "' in column '" + spec.name + "'");
        feats[k].push_back(it->second);
      } else {
        feats[k].push_back(parse_number(raw, "'" + spec.name + "'" + where));
      }
    }
    for (std::size_t k = 0; k < teacher_cols.size(); ++k)
      teach[k].push_back(parse_number(row[teacher_cols[k]], "'" + m.teacher_columns[k] + "'" + where));
    if (split_col) {
      const std::string& s = row[*split_col];
      if (s == m.test_value)
        ds.is_test.push_back(true);
      else if (s == m.train_value)
        ds.is_test.push_back(false);
      else
        throw Error("unknown split value '" + s + "'" + where);
    }
  }
  ds.rows_used = ds.outcomes.size();
  if (ds.rows_used == 0) throw Error("no usable rows after dropping missing values");

  if (!split_col) {
    std::vector<std::size_t> perm(ds.rows_used);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(m.split_seed, {0x5917u});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(m.split_fraction * static_cast<double>(ds.rows_used)));
    ds.is_test.assign(ds.rows_used, false);
    for (std::size_t i = 0; i < n_test; ++i) ds.is_test[perm[i]] = true;
  }

  // Min-max rescaling learns its range from training rows only.
  for (std::size_t k = 0; k < m.features.size(); ++k) {
    const auto& spec = m.features[k];
    if (spec.minmax) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < feats[k].size(); ++i)
        if (!ds.is_test[i]) {
          lo = std::min(lo, feats[k][i]);
          hi = std::max(hi, feats[k][i]);
        }
      if (!(hi > lo)) throw Error("zero variance in column '" + spec.name + "'");
      for (auto& v : feats[k]) v = (v - lo) / (hi - lo);
      ds.minmax.push_back({spec.name, lo, hi});
    }
    ds.features.add_column(spec.name, std::move(feats[k]));
  }
  ds.teachers = FeatureTable(ds.rows_used);
  for (std::size_t k = 0; k < teach.size(); ++k) ds.teachers.add_column(m.teacher_columns[k], std::move(teach[k]));
  if (ds.features.cols() == 0) ds.features = FeatureTable(ds.rows_used);
  return ds;
}

}  // namespace isurv::data
