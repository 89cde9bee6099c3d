#include "survexplain/dataio.hpp"

#include "survexplain/rng.hpp"
#include "survexplain/stats.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace survexplain {

using nlohmann::json;

namespace {

ColumnRole role_from_string(const std::string& s) {
  if (s == "feature") return ColumnRole::feature;
  if (s == "time") return ColumnRole::time;
  if (s == "event") return ColumnRole::event;
  if (s == "ignore") return ColumnRole::ignore;
  throw std::invalid_argument("unknown column role: " + s);
}

std::string role_to_string(ColumnRole r) {
  switch (r) {
    case ColumnRole::feature: return "feature";
    case ColumnRole::time: return "time";
    case ColumnRole::event: return "event";
    default: return "ignore";
  }
}

}  // namespace

void DatasetSchema::validate() const {
  std::size_t n_time = 0, n_event = 0, n_feature = 0;
  std::vector<std::string> names;
  for (const auto& c : columns) {
    names.push_back(c.name);
    switch (c.role) {
      case ColumnRole::time: ++n_time; break;
      case ColumnRole::event: ++n_event; break;
      case ColumnRole::feature: ++n_feature; break;
      default: break;
    }
    if (c.role == ColumnRole::feature && c.type == ColumnType::categorical && c.levels.empty())
      throw std::invalid_argument("categorical column " + c.name + " needs a level list");
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end())
    throw std::invalid_argument("schema column names must be unique");
  if (n_time != 1 || n_event != 1)
    throw std::invalid_argument("schema needs exactly one time and one event column");
  if (n_feature == 0) throw std::invalid_argument("schema needs at least one feature column");
}

FeatureSchema DatasetSchema::feature_schema() const {
  FeatureSchema fs;
  for (const auto& c : columns)
    if (c.role == ColumnRole::feature)
      fs.columns.push_back({c.name, c.type, c.levels});
  return fs;
}

DatasetSchema DatasetSchema::from_json_text(const std::string& text) {
  json doc = json::parse(text);
  DatasetSchema schema;
  for (const auto& jc : doc.at("columns")) {
    SchemaColumn c;
    c.name = jc.at("name").get<std::string>();
    c.role = role_from_string(jc.at("role").get<std::string>());
    std::string type = jc.value("type", "numeric");
    c.type = type == "categorical" ? ColumnType::categorical : ColumnType::numeric;
    if (jc.contains("levels"))
      c.levels = jc.at("levels").get<std::vector<std::string>>();
    schema.columns.push_back(std::move(c));
  }
  schema.validate();
  return schema;
}

std::string DatasetSchema::to_json_text() const {
  json doc;
  doc["columns"] = json::array();
  for (const auto& c : columns) {
    json jc;
    jc["name"] = c.name;
    jc["role"] = role_to_string(c.role);
    jc["type"] = c.type == ColumnType::categorical ? "categorical" : "numeric";
    if (c.type == ColumnType::categorical) jc["levels"] = c.levels;
    doc["columns"].push_back(jc);
  }
  return doc.dump(2);
}

namespace {

// RFC 4180 record reader: quoted fields may contain commas, doubled quotes
// and line breaks.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char ch;
  auto end_field = [&]() {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&]() {
    end_field();
    records.push_back(record);
    record.clear();
  };
  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_record();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw std::invalid_argument("unterminated quoted field in CSV");
  if (field_started || !record.empty() || !field.empty()) end_record();
  return records;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

double parse_numeric_cell(const std::string& cell, std::size_t row, const std::string& col) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("unparseable cell at row " + std::to_string(row) +
                                ", column " + col + ": '" + cell + "'");
  }
  while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
  if (pos != cell.size())
    throw std::invalid_argument("unparseable cell at row " + std::to_string(row) +
                                ", column " + col + ": '" + cell + "'");
  return v;
}

}  // namespace

LoadResult load_csv(const std::string& path, const DatasetSchema& schema,
                    const LoadOptions& options) {
  schema.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  // artifacts may carry leading "# ..." comment lines before the header
  while (in.peek() == '#') {
    std::string skipped;
    std::getline(in, skipped);
  }
  auto records = read_csv_records(in);
  if (records.empty()) throw std::invalid_argument("CSV file has no header row");

  const auto& header = records.front();
  // map schema columns to file positions
  std::vector<std::ptrdiff_t> schema_to_file(schema.columns.size(), -1);
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (header[h] == schema.columns[j].name) {
        schema_to_file[j] = static_cast<std::ptrdiff_t>(h);
        break;
      }
    }
    if (schema_to_file[j] < 0 && schema.columns[j].role != ColumnRole::ignore)
      throw std::invalid_argument("column " + schema.columns[j].name + " missing from CSV header");
  }
  for (const auto& h : header) {
    bool known = false;
    for (const auto& c : schema.columns)
      if (c.name == h) known = true;
    if (!known) throw std::invalid_argument("CSV column " + h + " not covered by schema");
  }

  std::size_t n = records.size() - 1;
  if (n == 0) throw std::invalid_argument("CSV file has no data rows");

  FeatureSchema fs = schema.feature_schema();
  FeatureTable features(fs, n);
  std::vector<double> time(n, 0.0);
  std::vector<int> event(n, 0);
  std::size_t imputed = 0;

  // missing cells per feature column, filled after the scan
  std::vector<std::vector<std::size_t>> missing(fs.size());

  std::size_t fi = 0;  // feature index within fs
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    const auto& col = schema.columns[j];
    if (col.role == ColumnRole::ignore) continue;
    std::size_t file_col = static_cast<std::size_t>(schema_to_file[j]);
    for (std::size_t r = 0; r < n; ++r) {
      const auto& rec = records[r + 1];
      if (file_col >= rec.size())
        throw std::invalid_argument("row " + std::to_string(r + 1) + " has too few fields");
      const std::string& cell = rec[file_col];
      if (col.role == ColumnRole::time) {
        double v = parse_numeric_cell(cell, r + 1, col.name);
        if (v < 0.0) throw std::invalid_argument("negative time at row " + std::to_string(r + 1));
        time[r] = v;
      } else if (col.role == ColumnRole::event) {
        double v = parse_numeric_cell(cell, r + 1, col.name);
        if (v != 0.0 && v != 1.0)
          throw std::invalid_argument("event must be 0 or 1 at row " + std::to_string(r + 1));
        event[r] = static_cast<int>(v);
      } else {
        if (cell.empty()) {
          if (!options.impute_missing)
            throw std::invalid_argument("missing cell at row " + std::to_string(r + 1) +
                                        ", column " + col.name);
          missing[fi].push_back(r);
          continue;
        }
        if (col.type == ColumnType::numeric) {
          features.set(r, fi, parse_numeric_cell(cell, r + 1, col.name));
        } else {
          auto it = std::find(col.levels.begin(), col.levels.end(), cell);
          if (it == col.levels.end())
            throw std::invalid_argument("unknown level '" + cell + "' at row " +
                                        std::to_string(r + 1) + ", column " + col.name);
          features.set(r, fi, static_cast<double>(it - col.levels.begin()));
        }
      }
    }
    if (col.role == ColumnRole::feature) ++fi;
  }

  // single imputation: numeric median, categorical mode
  for (std::size_t j = 0; j < fs.size(); ++j) {
    if (missing[j].empty()) continue;
    std::vector<bool> is_missing(n, false);
    for (std::size_t r : missing[j]) is_missing[r] = true;
    std::vector<double> present;
    for (std::size_t r = 0; r < n; ++r)
      if (!is_missing[r]) present.push_back(features.get(r, j));
    if (present.empty())
      throw std::invalid_argument("column " + fs.columns[j].name + " has no observed values");
    double fill;
    if (fs.columns[j].type == ColumnType::numeric) {
      fill = quantile_type7(present, 0.5);
    } else {
      std::map<double, std::size_t> counts;
      for (double v : present) counts[v]++;
      fill = counts.begin()->first;
      std::size_t best = counts.begin()->second;
      for (const auto& [v, c] : counts)
        if (c > best) { best = c; fill = v; }
    }
    for (std::size_t r : missing[j]) {
      features.set(r, j, fill);
      ++imputed;
    }
  }

  return LoadResult{SurvivalDataset(std::move(features), std::move(time), std::move(event)),
                    imputed};
}

void save_csv(const SurvivalDataset& data, const std::string& path,
              const std::string& time_name, const std::string& event_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto& fs = data.schema();
  for (std::size_t j = 0; j < fs.size(); ++j) out << csv_quote(fs.columns[j].name) << ",";
  out << csv_quote(time_name) << "," << csv_quote(event_name) << "\n";
  std::ostringstream cell;
  cell.precision(17);
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    for (std::size_t j = 0; j < fs.size(); ++j) {
      const auto& col = fs.columns[j];
      if (col.type == ColumnType::categorical) {
        out << csv_quote(col.levels[static_cast<std::size_t>(data.features().get(i, j))]);
      } else {
        cell.str("");
        cell << data.features().get(i, j);
        out << cell.str();
      }
      out << ",";
    }
    cell.str("");
    cell << data.time()[i];
    out << cell.str() << "," << data.event()[i] << "\n";
  }
}

Encoding make_encoding(const FeatureSchema& schema, bool drop_reference) {
  Encoding enc;
  enc.schema = schema;
  enc.drop_reference = drop_reference;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& col = schema.columns[j];
    if (col.type == ColumnType::numeric) {
      enc.columns.push_back({col.name, j, -1});
    } else {
      std::size_t first = drop_reference ? 1 : 0;
      for (std::size_t l = first; l < col.levels.size(); ++l)
        enc.columns.push_back({col.name + "=" + col.levels[l], j, static_cast<int>(l)});
    }
  }
  return enc;
}

Eigen::MatrixXd Encoding::apply(const FeatureTable& x) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.n_rows()),
                                              static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < x.n_rows(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = apply_row(x, i);
  return out;
}

Eigen::RowVectorXd Encoding::apply_row(const FeatureTable& x, std::size_t row) const {
  if (x.n_cols() != schema.size())
    throw std::invalid_argument("feature table width does not match encoding");
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& ec = columns[c];
    double v = x.get(row, ec.source_col);
    if (ec.level < 0) {
      out(static_cast<Eigen::Index>(c)) = v;
    } else {
      const auto& col = schema.columns[ec.source_col];
      auto idx = static_cast<long long>(v);
      if (v != static_cast<double>(idx) || idx < 0 ||
          idx >= static_cast<long long>(col.levels.size()))
        throw std::invalid_argument("unknown categorical level in column " + col.name);
      if (idx == ec.level) out(static_cast<Eigen::Index>(c)) = 1.0;
    }
  }
  return out;
}

FeatureTable Encoding::decode(const Eigen::MatrixXd& encoded) const {
  if (encoded.cols() != static_cast<Eigen::Index>(columns.size()))
    throw std::invalid_argument("encoded width mismatch");
  FeatureTable out(schema, static_cast<std::size_t>(encoded.rows()));
  for (std::size_t i = 0; i < out.n_rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& col = schema.columns[j];
      if (col.type == ColumnType::numeric) {
        for (std::size_t c = 0; c < columns.size(); ++c)
          if (columns[c].source_col == j)
            out.set(i, j, encoded(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
      } else {
        // argmax over the level block; all-zero block means the reference level
        double best = drop_reference ? 0.5 : -1.0;
        std::size_t best_level = 0;
        for (std::size_t c = 0; c < columns.size(); ++c) {
          if (columns[c].source_col != j) continue;
          double v = encoded(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
          if (v > best) {
            best = v;
            best_level = static_cast<std::size_t>(columns[c].level);
          }
        }
        out.set(i, j, static_cast<double>(best_level));
      }
    }
  }
  return out;
}

SplitResult split(const SurvivalDataset& data, const std::array<double, 3>& fractions,
                  std::uint64_t seed) {
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  for (double f : fractions)
    if (f <= 0.0) throw std::invalid_argument("split fractions must be positive");

  std::vector<std::size_t> events, censored;
  for (std::size_t i = 0; i < data.n_rows(); ++i)
    (data.event()[i] == 1 ? events : censored).push_back(i);

  Rng rng(derive_seed(seed, 0x5b17));
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.uniform_int(i)]);
  };
  shuffle(events);
  shuffle(censored);

  std::array<std::vector<std::size_t>, 3> parts;
  auto distribute = [&](const std::vector<std::size_t>& pool) {
    std::size_t n = pool.size();
    std::size_t n0 = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    std::size_t n1 = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    n0 = std::min(n0, n);
    n1 = std::min(n1, n - n0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t part = i < n0 ? 0 : (i < n0 + n1 ? 1 : 2);
      parts[part].push_back(pool[i]);
    }
  };
  distribute(events);
  distribute(censored);

  for (auto& p : parts) {
    if (p.empty()) throw std::invalid_argument("split produced an empty partition");
    std::sort(p.begin(), p.end());
    bool has_event = false;
    for (std::size_t i : p)
      if (data.event()[i] == 1) has_event = true;
    if (!has_event) throw std::invalid_argument("split partition has no events");
  }
  return SplitResult{data.select_rows(parts[0]), data.select_rows(parts[1]),
                     data.select_rows(parts[2])};
}

DatasetSchema synthetic_schema(std::size_t p) {
  DatasetSchema schema;
  for (std::size_t j = 0; j < p; ++j)
    schema.columns.push_back({"x" + std::to_string(j + 1), ColumnRole::feature,
                              ColumnType::numeric, {}});
  schema.columns.push_back({"time", ColumnRole::time, ColumnType::numeric, {}});
  schema.columns.push_back({"event", ColumnRole::event, ColumnType::numeric, {}});
  return schema;
}

SurvivalDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.p < 1) throw std::invalid_argument("n and p must be positive");
  if (spec.coefficients.size() != spec.p)
    throw std::invalid_argument("coefficient count must equal p");
  if (spec.censoring_rate < 0.0 || spec.censoring_rate >= 1.0)
    throw std::invalid_argument("censoring rate must lie in [0, 1)");
  for (const auto& term : spec.interactions)
    if (term.a >= spec.p || term.b >= spec.p)
      throw std::invalid_argument("interaction term index out of range");

  Rng rng(derive_seed(spec.seed, 0xda7a));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.p));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();

  if (spec.correlation) {
    const Eigen::MatrixXd& corr = *spec.correlation;
    if (corr.rows() != static_cast<Eigen::Index>(spec.p) ||
        corr.cols() != static_cast<Eigen::Index>(spec.p))
      throw std::invalid_argument("correlation matrix must be p x p");
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("correlation matrix must be positive definite");
    x = x * llt.matrixL().transpose();
  }

  std::vector<double> event_time(spec.n);
  std::vector<double> u_censor(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double lp = 0.0;
    for (std::size_t j = 0; j < spec.p; ++j)
      lp += spec.coefficients[j] * x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    for (const auto& term : spec.interactions)
      lp += term.coefficient * x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(term.a)) *
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(term.b));
    double u = rng.uniform();
    double target_chf = -std::log(u) / std::exp(lp);  // H0(T) = target
    if (spec.baseline == BaselineFamily::exponential) {
      if (spec.rate <= 0.0) throw std::invalid_argument("exponential rate must be positive");
      event_time[i] = target_chf / spec.rate;
    } else {
      if (spec.shape <= 0.0 || spec.scale <= 0.0)
        throw std::invalid_argument("weibull shape and scale must be positive");
      event_time[i] = spec.scale * std::pow(target_chf, 1.0 / spec.shape);
    }
    u_censor[i] = rng.uniform();
  }

  std::vector<double> time(event_time);
  std::vector<int> event(spec.n, 1);

  if (spec.censoring_rate > 0.0) {
    // censoring times C = -log(U)/lambda; the censored fraction is monotone
    // in lambda, so bisect on it
    auto censored_fraction = [&](double lambda) {
      std::size_t c = 0;
      for (std::size_t i = 0; i < spec.n; ++i)
        if (-std::log(u_censor[i]) / lambda < event_time[i]) ++c;
      return static_cast<double>(c) / static_cast<double>(spec.n);
    };
    double lo = 1e-12, hi = 1e12;
    for (int it = 0; it < 200; ++it) {
      double mid = std::sqrt(lo * hi);
      if (censored_fraction(mid) < spec.censoring_rate) lo = mid;
      else hi = mid;
    }
    // the fraction is a step function; settle on whichever side of the jump
    // lands closer to the target
    double lambda = lo;
    double achieved = censored_fraction(lo);
    for (double candidate : {std::sqrt(lo * hi), hi}) {
      double f = censored_fraction(candidate);
      if (std::fabs(f - spec.censoring_rate) < std::fabs(achieved - spec.censoring_rate)) {
        lambda = candidate;
        achieved = f;
      }
    }
    if (std::fabs(achieved - spec.censoring_rate) > 0.02)
      throw std::runtime_error("unable to calibrate censoring rate");
    for (std::size_t i = 0; i < spec.n; ++i) {
      double c = -std::log(u_censor[i]) / lambda;
      if (c < event_time[i]) {
        time[i] = c;
        event[i] = 0;
      }
    }
  }

  FeatureSchema fs = synthetic_schema(spec.p).feature_schema();
  FeatureTable features(fs, spec.n);
  for (std::size_t i = 0; i < spec.n; ++i)
    for (std::size_t j = 0; j < spec.p; ++j)
      features.set(i, j, x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return SurvivalDataset(std::move(features), std::move(time), std::move(event));
}

}  // namespace survexplain
