#pragma once

// Mixed-feature tabular data: feature metadata, encoders, CSV loading,
// train/test splitting, response-range binning and the correlation matrix.
//
// Rows are held in two representations. The raw representation keeps the
// user's values (numbers and category labels). The encoded representation,
// used by every model in the library, standardizes numerical features to zero
// mean and unit variance and maps categorical labels to ordinal codes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "care/error.hpp"
#include "care/stats.hpp"
#include "json.hpp"

namespace care {

enum class FeatureKind { numerical, categorical };
enum class Task { classification, regression };

using RawValue = std::variant<double, std::string>;
using RawRow = std::vector<RawValue>;
using Row = std::vector<double>;

inline const char* to_string(FeatureKind k) { return k == FeatureKind::numerical ? "numerical" : "categorical"; }
inline const char* to_string(Task t) { return t == Task::classification ? "classification" : "regression"; }

inline FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "numerical" || s == "numeric") return FeatureKind::numerical;
  if (s == "categorical") return FeatureKind::categorical;
  throw ConfigError("unknown feature kind '" + s + "'", "kind");
}

inline Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw ConfigError("unknown task '" + s + "'", "task");
}

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::numerical;
  // Training range R_j = max - min, in raw units. Numerical only.
  double min = 0.0;
  double max = 0.0;
  // Standardization parameters. Numerical only.
  double mean = 0.0;
  double scale = 1.0;
  // Category labels; the index of a label is its ordinal code.
  std::vector<std::string> categories;

  bool numerical() const { return kind == FeatureKind::numerical; }
  double range() const { return max - min; }

  std::size_t code_of(const std::string& label) const {
    auto it = std::find(categories.begin(), categories.end(), label);
    if (it == categories.end())
      throw EncodingError("feature '" + name + "': unknown category '" + label + "'");
    return static_cast<std::size_t>(it - categories.begin());
  }

  // Raw scalar (numerical value or category code) <-> encoded value.
  double encode_scalar(double raw) const { return numerical() ? (raw - mean) / scale : raw; }
  double decode_scalar(double encoded) const { return numerical() ? encoded * scale + mean : encoded; }

  double encode(const RawValue& v) const {
    if (numerical()) {
      if (const auto* d = std::get_if<double>(&v)) return encode_scalar(*d);
      throw EncodingError("feature '" + name + "': expected a number");
    }
    if (const auto* s = std::get_if<std::string>(&v)) return static_cast<double>(code_of(*s));
    throw EncodingError("feature '" + name + "': expected a category label");
  }

  RawValue decode(double encoded) const {
    if (numerical()) return decode_scalar(encoded);
    const auto code = std::lround(encoded);
    if (code < 0 || static_cast<std::size_t>(code) >= categories.size())
      throw EncodingError("feature '" + name + "': invalid ordinal code");
    return categories[static_cast<std::size_t>(code)];
  }

  // Gene bounds in the encoded space.
  double encoded_lower() const { return numerical() ? encode_scalar(min) : 0.0; }
  double encoded_upper() const {
    return numerical() ? encode_scalar(max) : static_cast<double>(categories.size()) - 1.0;
  }

  bool valid_encoded(double v) const {
    if (!std::isfinite(v)) return false;
    if (numerical()) return true;
    return v == std::floor(v) && v >= 0.0 && v < static_cast<double>(categories.size());
  }
};

// Declared metadata from the sidecar file.
struct FeatureDecl {
  std::string name;
  FeatureKind kind = FeatureKind::numerical;
  std::vector<std::string> values;  // allowed categories; empty means "discover from data"
};

struct DatasetMeta {
  std::vector<FeatureDecl> features;
  std::string target = "target";
  Task task = Task::classification;
  std::vector<std::string> classes;  // empty means "discover from data"
};

inline DatasetMeta parse_dataset_meta(const nlohmann::json& doc) {
  DatasetMeta meta;
  try {
    meta.task = parse_task(doc.value("task", std::string("classification")));
    meta.target = doc.value("target", std::string("target"));
    if (doc.contains("classes")) meta.classes = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& f : doc.at("features")) {
      FeatureDecl d;
      d.name = f.at("name").get<std::string>();
      d.kind = parse_feature_kind(f.at("kind").get<std::string>());
      if (f.contains("values")) {
        if (d.kind == FeatureKind::numerical)
          throw ConfigError("numerical feature '" + d.name + "' declares category values", "features");
        d.values = f.at("values").get<std::vector<std::string>>();
      }
      meta.features.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metadata: ") + e.what());
  }
  if (meta.features.empty()) throw ParseError("metadata: no features declared");
  return meta;
}

inline nlohmann::json to_json(const DatasetMeta& meta) {
  nlohmann::json doc;
  doc["task"] = to_string(meta.task);
  doc["target"] = meta.target;
  if (!meta.classes.empty()) doc["classes"] = meta.classes;
  doc["features"] = nlohmann::json::array();
  for (const auto& f : meta.features) {
    nlohmann::json e{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.kind == FeatureKind::categorical) e["values"] = f.values;
    doc["features"].push_back(std::move(e));
  }
  return doc;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DatasetMeta load_dataset_meta(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metadata '" + path.string() + "': " + e.what());
  }
  return parse_dataset_meta(doc);
}

// Fitted encoders for one dataset.
struct Schema {
  std::vector<FeatureMeta> features;
  Task task = Task::classification;
  std::string target;
  std::vector<std::string> classes;

  std::size_t size() const { return features.size(); }
  std::size_t class_count() const { return task == Task::classification ? classes.size() : 0; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t j = 0; j < features.size(); ++j)
      if (features[j].name == name) return j;
    return std::nullopt;
  }

  Row encode(const RawRow& raw) const {
    if (raw.size() != features.size()) throw InputError("row arity does not match the schema");
    Row out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) out[j] = features[j].encode(raw[j]);
    return out;
  }

  RawRow decode(std::span<const double> encoded) const {
    if (encoded.size() != features.size()) throw InputError("row arity does not match the schema");
    RawRow out;
    out.reserve(encoded.size());
    for (std::size_t j = 0; j < encoded.size(); ++j) out.push_back(features[j].decode(encoded[j]));
    return out;
  }

  void validate(std::span<const double> encoded) const {
    if (encoded.size() != features.size()) throw InputError("row arity does not match the schema");
    for (std::size_t j = 0; j < encoded.size(); ++j)
      if (!features[j].valid_encoded(encoded[j]))
        throw InputError("feature '" + features[j].name + "': invalid encoded value");
  }

  std::size_t class_index(const std::string& label) const {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw EncodingError("unknown class label '" + label + "'");
    return static_cast<std::size_t>(it - classes.begin());
  }

  // Fits encoders on `rows`. Categorical codes follow first appearance in `rows`;
  // declared categories that never appear are appended in declaration order.
  static Schema fit(const DatasetMeta& meta, std::span<const RawRow> rows) {
    if (rows.empty()) throw ArgumentError("cannot fit encoders on an empty table");
    Schema s;
    s.task = meta.task;
    s.target = meta.target;
    s.classes = meta.classes;
    for (std::size_t j = 0; j < meta.features.size(); ++j) {
      const auto& d = meta.features[j];
      FeatureMeta f;
      f.name = d.name;
      f.kind = d.kind;
      if (d.kind == FeatureKind::numerical) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& r : rows) col.push_back(std::get<double>(r[j]));
        f.min = *std::min_element(col.begin(), col.end());
        f.max = *std::max_element(col.begin(), col.end());
        f.mean = stats::mean(col);
        const double sd = stats::stddev(col);
        f.scale = sd > 0.0 ? sd : 1.0;
      } else {
        for (const auto& r : rows) {
          const auto& label = std::get<std::string>(r[j]);
          if (std::find(f.categories.begin(), f.categories.end(), label) == f.categories.end())
            f.categories.push_back(label);
        }
        for (const auto& v : d.values)
          if (std::find(f.categories.begin(), f.categories.end(), v) == f.categories.end())
            f.categories.push_back(v);
      }
      s.features.push_back(std::move(f));
    }
    return s;
  }
};

inline nlohmann::json to_json(const Schema& s) {
  nlohmann::json doc;
  doc["task"] = to_string(s.task);
  doc["target"] = s.target;
  doc["classes"] = s.classes;
  doc["features"] = nlohmann::json::array();
  for (const auto& f : s.features) {
    nlohmann::json e{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.numerical()) {
      e["min"] = f.min;
      e["max"] = f.max;
      e["mean"] = f.mean;
      e["scale"] = f.scale;
    } else {
      e["categories"] = f.categories;
    }
    doc["features"].push_back(std::move(e));
  }
  return doc;
}

inline Schema schema_from_json(const nlohmann::json& doc) {
  Schema s;
  s.task = parse_task(doc.at("task").get<std::string>());
  s.target = doc.at("target").get<std::string>();
  s.classes = doc.at("classes").get<std::vector<std::string>>();
  for (const auto& e : doc.at("features")) {
    FeatureMeta f;
    f.name = e.at("name").get<std::string>();
    f.kind = parse_feature_kind(e.at("kind").get<std::string>());
    if (f.numerical()) {
      f.min = e.at("min").get<double>();
      f.max = e.at("max").get<double>();
      f.mean = e.at("mean").get<double>();
      f.scale = e.at("scale").get<double>();
    } else {
      f.categories = e.at("categories").get<std::vector<std::string>>();
    }
    s.features.push_back(std::move(f));
  }
  return s;
}

inline nlohmann::json raw_value_to_json(const RawValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

inline RawValue raw_value_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw ParseError("raw value must be a number or a string");
}

inline bool raw_equal(const RawValue& a, const RawValue& b, double tol = 1e-9) {
  if (a.index() != b.index()) return false;
  if (const auto* d = std::get_if<double>(&a)) return std::abs(*d - std::get<double>(b)) <= tol;
  return std::get<std::string>(a) == std::get<std::string>(b);
}

struct Dataset {
  // Declared metadata with every categorical vocabulary and the class list resolved.
  DatasetMeta meta;
  Schema schema;
  std::vector<RawRow> raw;
  std::vector<Row> rows;
  // Class index (classification) or response (regression).
  std::vector<double> targets;

  std::size_t size() const { return rows.size(); }
  std::size_t feature_count() const { return schema.size(); }
  Task task() const { return schema.task; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[j]);
    return out;
  }
};

namespace detail {

inline void check_raw_rows(const DatasetMeta& meta, std::span<const RawRow> raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != meta.features.size())
      throw ParseError("row " + std::to_string(i + 1) + ": expected " + std::to_string(meta.features.size()) +
                           " feature values",
                       i + 1);
    for (std::size_t j = 0; j < meta.features.size(); ++j) {
      const auto& d = meta.features[j];
      if (d.kind == FeatureKind::numerical) {
        const auto* v = std::get_if<double>(&raw[i][j]);
        if (v == nullptr || !std::isfinite(*v))
          throw ParseError("row " + std::to_string(i + 1) + ": feature '" + d.name + "' is not a finite number",
                           i + 1);
      } else {
        const auto* v = std::get_if<std::string>(&raw[i][j]);
        if (v == nullptr)
          throw ParseError("row " + std::to_string(i + 1) + ": feature '" + d.name + "' expects a label", i + 1);
        if (!d.values.empty() && std::find(d.values.begin(), d.values.end(), *v) == d.values.end())
          throw EncodingError("feature '" + d.name + "': unseen category '" + *v + "'");
      }
    }
  }
}

// Fills undeclared vocabularies with first-seen values.
inline void resolve_vocabulary(DatasetMeta& meta, std::span<const RawRow> raw) {
  for (std::size_t j = 0; j < meta.features.size(); ++j) {
    auto& d = meta.features[j];
    if (d.kind != FeatureKind::categorical || !d.values.empty()) continue;
    for (const auto& r : raw) {
      const auto& label = std::get<std::string>(r[j]);
      if (std::find(d.values.begin(), d.values.end(), label) == d.values.end()) d.values.push_back(label);
    }
  }
}

inline Dataset assemble(DatasetMeta meta, Schema schema, std::vector<RawRow> raw, std::vector<double> targets) {
  Dataset ds;
  ds.meta = std::move(meta);
  ds.schema = std::move(schema);
  ds.rows.reserve(raw.size());
  for (const auto& r : raw) ds.rows.push_back(ds.schema.encode(r));
  ds.raw = std::move(raw);
  ds.targets = std::move(targets);
  return ds;
}

}  // namespace detail

// Builds a dataset from raw rows, fitting encoders on the rows themselves.
// For classification, `targets` are class indices into `meta.classes`.
inline Dataset build_dataset(DatasetMeta meta, std::vector<RawRow> raw, std::vector<double> targets) {
  if (raw.empty()) throw ArgumentError("dataset has no rows");
  if (raw.size() != targets.size()) throw ArgumentError("row and target counts differ");
  detail::check_raw_rows(meta, raw);
  detail::resolve_vocabulary(meta, raw);
  if (meta.task == Task::classification) {
    for (double t : targets)
      if (t < 0 || t != std::floor(t) || static_cast<std::size_t>(t) >= meta.classes.size())
        throw ArgumentError("class target outside the declared class list");
  } else {
    for (double t : targets)
      if (!std::isfinite(t)) throw ArgumentError("non-finite regression target");
  }
  auto schema = Schema::fit(meta, raw);
  return detail::assemble(std::move(meta), std::move(schema), std::move(raw), std::move(targets));
}

// Re-encodes `raw` with an already fitted schema (e.g., a test split).
inline Dataset encode_with(const Dataset& fitted, std::vector<RawRow> raw, std::vector<double> targets) {
  detail::check_raw_rows(fitted.meta, raw);
  return detail::assemble(fitted.meta, fitted.schema, std::move(raw), std::move(targets));
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// One CSV record; double quotes delimit fields containing commas, "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError("row " + std::to_string(row) + ": unterminated quote", row);
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

inline double parse_number(const std::string& s, std::size_t row, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v))
    throw ParseError("row " + std::to_string(row) + ": column '" + column + "' is not a number: '" + s + "'", row);
  return v;
}

}  // namespace detail

// Parsed CSV content: raw feature values in metadata order plus raw target cells.
struct CsvTable {
  std::vector<RawRow> rows;
  std::vector<std::string> targets;  // empty when the target column is absent
};

inline std::vector<std::string> csv_header(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!detail::trim(line).empty()) return detail::split_csv_line(line, 0);
  throw ParseError("empty CSV input");
}

// Reads feature columns by header name. The target column is optional when
// `require_target` is false (explaining raw input rows).
inline CsvTable parse_csv(const std::string& text, const DatasetMeta& meta, bool require_target = true) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    header = detail::split_csv_line(line, 0);
    break;
  }
  if (header.empty()) throw ParseError("empty CSV input");
  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> cols;
  for (const auto& f : meta.features) {
    auto c = find_col(f.name);
    if (!c) throw SchemaMismatchError("CSV header lacks declared feature '" + f.name + "'");
    cols.push_back(*c);
  }
  const auto target_col = find_col(meta.target);
  if (require_target && !target_col) throw SchemaMismatchError("CSV header lacks target column '" + meta.target + "'");

  CsvTable table;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line, row);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       row);
    RawRow r;
    r.reserve(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& cell = cells[cols[j]];
      if (cell.empty())
        throw ParseError("row " + std::to_string(row) + ": missing value for '" + meta.features[j].name + "'", row);
      if (meta.features[j].kind == FeatureKind::numerical)
        r.emplace_back(detail::parse_number(cell, row, meta.features[j].name));
      else
        r.emplace_back(cell);
    }
    table.rows.push_back(std::move(r));
    if (target_col) table.targets.push_back(cells[*target_col]);
  }
  return table;
}

inline Dataset parse_dataset(const std::string& csv_text, DatasetMeta meta) {
  auto table = parse_csv(csv_text, meta);
  std::vector<double> targets;
  targets.reserve(table.targets.size());
  if (meta.task == Task::classification) {
    const bool declared = !meta.classes.empty();
    for (std::size_t i = 0; i < table.targets.size(); ++i) {
      const auto& label = table.targets[i];
      auto it = std::find(meta.classes.begin(), meta.classes.end(), label);
      if (it == meta.classes.end()) {
        if (declared) throw EncodingError("target: unseen class '" + label + "'");
        meta.classes.push_back(label);
        it = meta.classes.end() - 1;
      }
      targets.push_back(static_cast<double>(it - meta.classes.begin()));
    }
  } else {
    for (std::size_t i = 0; i < table.targets.size(); ++i)
      targets.push_back(detail::parse_number(table.targets[i], i + 1, meta.target));
  }
  return build_dataset(std::move(meta), std::move(table.rows), std::move(targets));
}

inline Dataset load_dataset(const std::filesystem::path& csv, const std::filesystem::path& meta) {
  auto m = load_dataset_meta(meta);
  return parse_dataset(read_text_file(csv), std::move(m));
}

// Seeded shuffle split. Encoders are refitted on the train part; the test part
// is encoded with the train encoders.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must lie in (0, 1)");
  if (ds.size() < 2) throw ArgumentError("need at least two rows to split");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(ds.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, ds.size() - 1);

  std::vector<RawRow> train_raw, test_raw;
  std::vector<double> train_t, test_t;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto& raw = k < n_train ? train_raw : test_raw;
    auto& t = k < n_train ? train_t : test_t;
    raw.push_back(ds.raw[idx[k]]);
    t.push_back(ds.targets[idx[k]]);
  }
  auto train = build_dataset(ds.meta, std::move(train_raw), std::move(train_t));
  auto test = encode_with(train, std::move(test_raw), std::move(test_t));
  return {std::move(train), std::move(test)};
}

// Response bins: q intervals cut at the 1/q .. (q-1)/q empirical quantiles.
// Interval i is [lb_i, ub_i); the last interval is closed at the observed maximum.
struct ResponseRanges {
  std::vector<double> cut_points;
  std::vector<std::pair<double, double>> intervals;

  std::size_t size() const { return intervals.size(); }

  // Index of the interval containing y; values beyond the observed span map to the end intervals.
  std::size_t interval_of(double y) const {
    const auto it = std::upper_bound(cut_points.begin(), cut_points.end(), y);
    return static_cast<std::size_t>(it - cut_points.begin());
  }
};

inline ResponseRanges response_ranges(std::span<const double> targets, int q) {
  if (q < 2) throw ArgumentError("response_ranges: q must be at least 2");
  if (targets.empty()) throw ArgumentError("response_ranges: no targets");
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  if (*lo == *hi) throw DegenerateRangeError("response_ranges: all targets are equal");
  std::vector<double> sample(targets.begin(), targets.end());
  ResponseRanges rr;
  for (int k = 1; k < q; ++k) rr.cut_points.push_back(stats::quantile(sample, static_cast<double>(k) / q));
  double prev = *lo;
  for (double c : rr.cut_points) {
    rr.intervals.emplace_back(prev, c);
    prev = c;
  }
  rr.intervals.emplace_back(prev, *hi);
  return rr;
}

inline nlohmann::json to_json(const ResponseRanges& rr) {
  nlohmann::json iv = nlohmann::json::array();
  for (const auto& [a, b] : rr.intervals) iv.push_back({a, b});
  return {{"cut_points", rr.cut_points}, {"intervals", iv}};
}

inline ResponseRanges response_ranges_from_json(const nlohmann::json& doc) {
  ResponseRanges rr;
  rr.cut_points = doc.at("cut_points").get<std::vector<double>>();
  for (const auto& iv : doc.at("intervals")) rr.intervals.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
  return rr;
}

struct CorrelationWarning {
  std::size_t a;
  std::size_t b;
  std::string reason;
};

// Symmetric association matrix with entries in [0, 1]. Pairs whose measure is
// undefined (constant columns) are stored as 0 and listed in `warnings`.
struct CorrelationMatrix {
  std::vector<std::vector<double>> values;
  std::vector<CorrelationWarning> warnings;

  double operator()(std::size_t i, std::size_t j) const { return values[i][j]; }
  std::size_t size() const { return values.size(); }
};

inline CorrelationMatrix correlation_matrix(const Dataset& ds) {
  const std::size_t m = ds.feature_count();
  CorrelationMatrix cm;
  cm.values.assign(m, std::vector<double>(m, 0.0));
  std::vector<std::vector<double>> cols;
  cols.reserve(m);
  for (std::size_t j = 0; j < m; ++j) cols.push_back(ds.column(j));
  for (std::size_t i = 0; i < m; ++i) {
    cm.values[i][i] = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      const bool ni = ds.schema.features[i].numerical();
      const bool nj = ds.schema.features[j].numerical();
      double v = 0.0;
      try {
        if (ni && nj)
          v = std::abs(stats::pearson_r(cols[i], cols[j]));
        else if (ni)
          v = stats::correlation_ratio(cols[j], cols[i]);
        else if (nj)
          v = stats::correlation_ratio(cols[i], cols[j]);
        else
          v = stats::cramers_v(cols[i], cols[j]);
      } catch (const UndefinedCorrelationError& e) {
        cm.warnings.push_back({i, j, e.what()});
        v = 0.0;
      }
      cm.values[i][j] = cm.values[j][i] = v;
    }
  }
  return cm;
}

}  // namespace care
