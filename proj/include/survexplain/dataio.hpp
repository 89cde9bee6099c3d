#pragma once

#include "survexplain/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace survexplain {

enum class ColumnRole { feature, time, event, ignore };

struct SchemaColumn {
  std::string name;
  ColumnRole role = ColumnRole::feature;
  ColumnType type = ColumnType::numeric;
  std::vector<std::string> levels;
};

// File-level schema: exactly one time and one event column, unique names.
// No type inference happens anywhere; the schema is authoritative.
struct DatasetSchema {
  std::vector<SchemaColumn> columns;

  void validate() const;
  FeatureSchema feature_schema() const;

  static DatasetSchema from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct LoadOptions {
  bool impute_missing = false;
};

struct LoadResult {
  SurvivalDataset data;
  std::size_t imputed_cells = 0;
};

LoadResult load_csv(const std::string& path, const DatasetSchema& schema,
                    const LoadOptions& options = {});
void save_csv(const SurvivalDataset& data, const std::string& path,
              const std::string& time_name = "time", const std::string& event_name = "event");

// One-hot encoding of a feature table. Model fitting drops the first level of
// each categorical as the reference; knockoff sampling keeps every level.
struct EncodedColumn {
  std::string name;        // "feature" or "feature=level"
  std::size_t source_col;  // index into the feature schema
  int level;               // -1 for numeric, else level index
};

struct Encoding {
  FeatureSchema schema;
  bool drop_reference = true;
  std::vector<EncodedColumn> columns;

  std::size_t width() const { return columns.size(); }
  Eigen::MatrixXd apply(const FeatureTable& x) const;
  Eigen::RowVectorXd apply_row(const FeatureTable& x, std::size_t row) const;
  // inverse of apply for a single row; categorical levels recovered by argmax
  FeatureTable decode(const Eigen::MatrixXd& encoded) const;
};

Encoding make_encoding(const FeatureSchema& schema, bool drop_reference);

struct SplitResult {
  SurvivalDataset train;
  SurvivalDataset valid;
  SurvivalDataset test;
};

// Seeded shuffle and partition, stratified by event status so every split
// keeps roughly the sample event rate. Throws when a split ends up without
// any event.
SplitResult split(const SurvivalDataset& data, const std::array<double, 3>& fractions,
                  std::uint64_t seed);

struct InteractionTerm {
  std::size_t a = 0;
  std::size_t b = 0;
  double coefficient = 0.0;
};

enum class BaselineFamily { exponential, weibull };

struct SyntheticSpec {
  std::size_t n = 100;
  std::size_t p = 2;
  std::vector<double> coefficients;           // length p
  BaselineFamily baseline = BaselineFamily::exponential;
  double rate = 0.1;                          // exponential
  double shape = 1.0, scale = 10.0;           // weibull
  double censoring_rate = 0.0;                // target fraction in [0, 1)
  std::vector<InteractionTerm> interactions;
  std::optional<Eigen::MatrixXd> correlation; // p x p, optional
  std::uint64_t seed = 0;
};

// Draws standard normal features (optionally correlated), event times by
// inverse transform from the proportional-hazards generator, and calibrates
// an exponential censoring rate to hit the target within two percentage
// points.
SurvivalDataset generate_synthetic(const SyntheticSpec& spec);

DatasetSchema synthetic_schema(std::size_t p);

}  // namespace survexplain
