#include "survexplain/serialize.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace survexplain {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

json curve_to_json(const StepCurve& curve) {
  json doc;
  doc["grid"] = curve.grid().points();
  doc["values"] = curve.values();
  return doc;
}

std::string grid_value_label(const EffectSurface& surface, const FeatureSchema& schema,
                             std::size_t k) {
  std::size_t col = schema.index_of(surface.feature);
  if (schema.columns[col].type == ColumnType::categorical) {
    auto lev = static_cast<std::size_t>(surface.grid.points[k]);
    return schema.columns[col].levels[lev];
  }
  return format_double(surface.grid.points[k]);
}

std::string method_name(EffectMethod method) {
  switch (method) {
    case EffectMethod::ice: return "ice";
    case EffectMethod::c_ice: return "c-ice";
    case EffectMethod::pdp: return "pdp";
    case EffectMethod::c_pdp: return "c-pdp";
    case EffectMethod::mplot: return "mplot";
    case EffectMethod::ale_uncentered: return "ale-uncentered";
    default: return "ale-centered";
  }
}

std::string marginal_name(TimeMarginal marg) {
  switch (marg) {
    case TimeMarginal::mean_time: return "mean-time";
    case TimeMarginal::sum_time: return "sum-time";
    default: return "none";
  }
}

}  // namespace

json schema_to_json(const DatasetSchema& schema) {
  return json::parse(schema.to_json_text());
}

json feature_schema_to_json(const FeatureSchema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns) {
    json jc;
    jc["name"] = c.name;
    jc["type"] = c.type == ColumnType::categorical ? "categorical" : "numeric";
    if (c.type == ColumnType::categorical) jc["levels"] = c.levels;
    cols.push_back(jc);
  }
  return json{{"columns", cols}};
}

FeatureSchema feature_schema_from_json(const json& doc) {
  FeatureSchema schema;
  for (const auto& jc : doc.at("columns")) {
    ColumnSpec c;
    c.name = jc.at("name").get<std::string>();
    c.type = jc.value("type", "numeric") == "categorical" ? ColumnType::categorical
                                                          : ColumnType::numeric;
    if (jc.contains("levels")) c.levels = jc.at("levels").get<std::vector<std::string>>();
    schema.columns.push_back(std::move(c));
  }
  return schema;
}

json cox_to_json(const CoxModel& model) {
  json doc;
  doc["type"] = "cox";
  doc["encoding"] = feature_schema_to_json(model.encoding().schema);
  doc["encoding"]["drop_reference"] = model.encoding().drop_reference;
  json names = json::array();
  for (const auto& c : model.encoding().columns) names.push_back(c.name);
  doc["encoding"]["encoded_columns"] = names;
  std::vector<double> coefs(model.coefficients().data(),
                            model.coefficients().data() + model.coefficients().size());
  doc["coefficients"] = coefs;
  doc["baseline_grid"] = model.baseline_chf().grid().points();
  doc["baseline_chf"] = model.baseline_chf().values();
  doc["fit_report"] = {{"iterations", model.fit_report().iterations},
                       {"gradient_norm", model.fit_report().gradient_norm},
                       {"log_partial_likelihood", model.fit_report().log_partial_likelihood}};
  return doc;
}

CoxModel cox_from_json(const json& doc) {
  FeatureSchema schema = feature_schema_from_json(doc.at("encoding"));
  Encoding encoding = make_encoding(schema, doc.at("encoding").value("drop_reference", true));
  auto coefs = doc.at("coefficients").get<std::vector<double>>();
  Eigen::VectorXd beta =
      Eigen::Map<Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
  StepCurve baseline(TimeGrid(doc.at("baseline_grid").get<std::vector<double>>()),
                     doc.at("baseline_chf").get<std::vector<double>>(), CurveKind::chf);
  CoxFitReport report;
  if (doc.contains("fit_report")) {
    report.iterations = doc["fit_report"].value("iterations", 0);
    report.gradient_norm = doc["fit_report"].value("gradient_norm", 0.0);
    report.log_partial_likelihood = doc["fit_report"].value("log_partial_likelihood", 0.0);
  }
  return CoxModel(std::move(encoding), std::move(beta), std::move(baseline), report);
}

json rsf_to_json(const RSFModel& model) {
  json doc;
  doc["type"] = "rsf";
  doc["encoding"] = feature_schema_to_json(model.schema());
  doc["baseline_grid"] = model.forest_grid().points();
  doc["baseline_chf"] = model.marginal_chf().values();
  doc["config"] = {{"n_trees", model.config().n_trees},
                   {"mtry", model.config().mtry},
                   {"min_node_size", model.config().min_node_size},
                   {"bootstrap", model.config().bootstrap},
                   {"seed", model.config().seed}};
  if (model.fit_report().has_oob) doc["oob_cindex"] = model.fit_report().oob_cindex;
  json trees = json::array();
  for (const auto& tree : model.trees()) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      json jn;
      jn["feature"] = node.feature;
      if (node.feature >= 0) {
        if (node.level_mask != 0) jn["level_mask"] = node.level_mask;
        else jn["threshold"] = node.threshold;
        jn["left"] = node.left;
        jn["right"] = node.right;
      } else {
        jn["chf"] = node.chf;
      }
      nodes.push_back(std::move(jn));
    }
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  return doc;
}

RSFModel rsf_from_json(const json& doc) {
  FeatureSchema schema = feature_schema_from_json(doc.at("encoding"));
  TimeGrid grid(doc.at("baseline_grid").get<std::vector<double>>());
  RSFConfig config;
  config.n_trees = doc.at("config").value("n_trees", std::size_t{100});
  config.mtry = doc.at("config").value("mtry", std::size_t{0});
  config.min_node_size = doc.at("config").value("min_node_size", std::size_t{15});
  config.bootstrap = doc.at("config").value("bootstrap", true);
  config.seed = doc.at("config").value("seed", std::uint64_t{0});
  std::vector<RSFTree> trees;
  for (const auto& jt : doc.at("trees")) {
    RSFTree tree;
    for (const auto& jn : jt.at("nodes")) {
      RSFNode node;
      node.feature = jn.at("feature").get<int>();
      if (node.feature >= 0) {
        node.level_mask = jn.value("level_mask", std::uint64_t{0});
        node.threshold = jn.value("threshold", 0.0);
        node.left = jn.at("left").get<int>();
        node.right = jn.at("right").get<int>();
      } else {
        node.chf = jn.at("chf").get<std::vector<double>>();
      }
      tree.nodes.push_back(std::move(node));
    }
    trees.push_back(std::move(tree));
  }
  RSFFitReport report;
  if (doc.contains("oob_cindex")) {
    report.oob_cindex = doc["oob_cindex"].get<double>();
    report.has_oob = true;
  }
  StepCurve marginal;
  if (doc.contains("baseline_chf") && !doc["baseline_chf"].is_null()) {
    marginal = StepCurve(grid, doc["baseline_chf"].get<std::vector<double>>(), CurveKind::chf);
  }
  return RSFModel(std::move(schema), std::move(grid), std::move(trees), config, report,
                  std::move(marginal));
}

std::unique_ptr<SurvivalModel> model_from_json(const json& doc) {
  std::string type = doc.at("type").get<std::string>();
  if (type == "cox") return std::make_unique<CoxModel>(cox_from_json(doc));
  if (type == "rsf") return std::make_unique<RSFModel>(rsf_from_json(doc));
  throw std::invalid_argument("unknown model type: " + type);
}

void save_model_json(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << "\n";
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

json eval_report_to_json(const EvalReport& report) {
  json doc;
  doc["brier"] = {{"t", report.times.points()}, {"value", report.brier}};
  doc["ibs"] = report.integrated_brier;
  doc["cindex"] = report.c_index;
  doc["dcal"] = {{"stat", report.d_calibration.statistic},
                 {"bins", report.d_calibration.bin_counts}};
  if (report.brier_dropped > 0) doc["brier_dropped_terms"] = report.brier_dropped;
  return doc;
}

json effect_surface_to_json(const EffectSurface& surface, const FeatureSchema& schema) {
  json doc;
  doc["feature"] = surface.feature;
  doc["method"] = method_name(surface.method);
  doc["marginalized"] = marginal_name(surface.marginal);
  json grid_values = json::array();
  for (std::size_t k = 0; k < surface.n_grid; ++k)
    grid_values.push_back(grid_value_label(surface, schema, k));
  doc["grid"] = grid_values;
  doc["grid_numeric"] = surface.grid.points;
  if (surface.marginal == TimeMarginal::none) doc["times"] = surface.times.points();
  if (surface.reference) doc["reference"] = *surface.reference;
  if (!surface.instances.empty()) doc["instances"] = surface.instances;
  doc["values"] = surface.values;
  doc["shape"] = {surface.n_instances, surface.n_grid, surface.n_times};
  return doc;
}

std::string effect_surface_to_csv(const EffectSurface& surface, const FeatureSchema& schema) {
  std::ostringstream out;
  out << "feature,instance,grid_value,time,value,method\n";
  std::string method = method_name(surface.method);
  bool aggregated = surface.instances.empty();
  for (std::size_t i = 0; i < surface.n_instances; ++i) {
    std::string instance = aggregated ? "" : std::to_string(surface.instances[i]);
    for (std::size_t k = 0; k < surface.n_grid; ++k) {
      std::string grid_value = grid_value_label(surface, schema, k);
      for (std::size_t s = 0; s < surface.n_times; ++s) {
        out << surface.feature << "," << instance << "," << grid_value << ",";
        if (surface.marginal == TimeMarginal::none) out << format_double(surface.times[s]);
        else out << marginal_name(surface.marginal);
        out << "," << format_double(surface.at(i, k, s)) << "," << method << "\n";
      }
    }
  }
  return out.str();
}

json hstat_to_json(const HStatResult& result) {
  json doc;
  doc["kind"] = result.kind;
  doc["feature_a"] = result.feature_a;
  if (!result.feature_b.empty()) doc["feature_b"] = result.feature_b;
  doc["t"] = result.times.points();
  doc["h2"] = result.values;
  doc["marginal"] = result.marginal;
  doc["flag_gt1"] = result.any_gt1;
  return doc;
}

std::string hstat_to_csv(const HStatResult& result) {
  std::ostringstream out;
  out << "kind,feature_a,feature_b,t,h2,flag_gt1\n";
  for (std::size_t s = 0; s < result.values.size(); ++s) {
    out << result.kind << "," << result.feature_a << "," << result.feature_b << ","
        << format_double(result.times[s]) << "," << format_double(result.values[s]) << ","
        << (result.values[s] > 1.0 ? 1 : 0) << "\n";
  }
  out << result.kind << "," << result.feature_a << "," << result.feature_b << ",aggregate,"
      << format_double(result.marginal) << "," << (result.any_gt1 ? 1 : 0) << "\n";
  return out.str();
}

json importance_to_json(const ImportanceResult& result) {
  json doc;
  doc["method"] = result.method;
  doc["mode"] = result.mode == ImportanceMode::difference ? "difference" : "quotient";
  doc["t"] = result.times.points();
  doc["repeats"] = result.repeats;
  json features = json::array();
  for (const auto& fi : result.features) {
    json jf;
    jf["feature"] = fi.feature;
    jf["per_time"] = fi.per_time;
    jf["aggregate"] = fi.aggregate;
    if (!std::isnan(fi.p_value)) jf["p_value"] = fi.p_value;
    if (fi.failed) jf["failed"] = true;
    features.push_back(std::move(jf));
  }
  doc["features"] = std::move(features);
  return doc;
}

std::string importance_to_csv(const ImportanceResult& result) {
  std::ostringstream out;
  std::string mode = result.mode == ImportanceMode::difference ? "difference" : "quotient";
  out << "method,feature,t,value,mode,p_value\n";
  for (const auto& fi : result.features) {
    for (std::size_t s = 0; s < fi.per_time.size(); ++s)
      out << result.method << "," << fi.feature << "," << format_double(result.times[s]) << ","
          << format_double(fi.per_time[s]) << "," << mode << ",\n";
    out << result.method << "," << fi.feature << ",aggregate," << format_double(fi.aggregate)
        << "," << mode << "," << (std::isnan(fi.p_value) ? "" : format_double(fi.p_value))
        << "\n";
  }
  return out.str();
}

json survlime_to_json(const SurvLimeResult& result) {
  json doc;
  json names = json::array();
  for (const auto& c : result.encoding.columns) names.push_back(c.name);
  doc["encoded_columns"] = names;
  doc["coefficients_standardized"] =
      std::vector<double>(result.coefficients.data(),
                          result.coefficients.data() + result.coefficients.size());
  doc["coefficients"] =
      std::vector<double>(result.coefficients_raw.data(),
                          result.coefficients_raw.data() + result.coefficients_raw.size());
  doc["local_importance"] = result.local_importance;
  doc["surrogate_curve"] = curve_to_json(result.surrogate_curve);
  doc["blackbox_curve"] = curve_to_json(result.blackbox_curve);
  doc["fidelity"] = result.fidelity;
  doc["objective"] = result.objective;
  doc["dropped_cells"] = result.dropped_cells;
  doc["ridged"] = result.ridged;
  doc["point_weights"] = result.point_weights;
  json neighborhood = json::array();
  for (Eigen::Index i = 0; i < result.neighborhood.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < result.neighborhood.cols(); ++j)
      row.push_back(result.neighborhood(i, j));
    neighborhood.push_back(std::move(row));
  }
  doc["neighborhood"] = std::move(neighborhood);
  return doc;
}

json survshap_to_json(const SurvShapResult& result) {
  json doc;
  doc["instance"] = result.instance;
  doc["times"] = result.times.points();
  doc["baseline"] = result.baseline;
  doc["estimator"] = result.estimator;
  doc["n_samples"] = result.n_samples;
  if (result.ridged) doc["ridged"] = true;
  json phi = json::array();
  for (Eigen::Index j = 0; j < result.phi.rows(); ++j) {
    json row = json::array();
    for (Eigen::Index s = 0; s < result.phi.cols(); ++s) row.push_back(result.phi(j, s));
    phi.push_back(std::move(row));
  }
  doc["phi"] = std::move(phi);
  return doc;
}

json global_shap_to_json(const GlobalShapSummary& summary) {
  json doc;
  doc["times"] = summary.times.points();
  doc["features"] = summary.features;
  doc["instances"] = summary.instances;
  json curves = json::array();
  for (Eigen::Index j = 0; j < summary.mean_abs_phi.rows(); ++j) {
    json row = json::array();
    for (Eigen::Index s = 0; s < summary.mean_abs_phi.cols(); ++s)
      row.push_back(summary.mean_abs_phi(j, s));
    curves.push_back(std::move(row));
  }
  doc["mean_abs_phi"] = std::move(curves);
  return doc;
}

std::string global_shap_curves_csv(const GlobalShapSummary& summary) {
  std::ostringstream out;
  out << "feature,time,mean_abs_phi\n";
  for (Eigen::Index j = 0; j < summary.mean_abs_phi.rows(); ++j)
    for (std::size_t s = 0; s < summary.times.size(); ++s)
      out << summary.features[static_cast<std::size_t>(j)] << ","
          << format_double(summary.times[s]) << ","
          << format_double(summary.mean_abs_phi(j, static_cast<Eigen::Index>(s))) << "\n";
  return out.str();
}

std::string global_shap_beeswarm_csv(const GlobalShapSummary& summary) {
  std::ostringstream out;
  out << "instance,feature,aggregated_phi,feature_value\n";
  for (std::size_t i = 0; i < summary.instances.size(); ++i)
    for (std::size_t j = 0; j < summary.features.size(); ++j)
      out << summary.instances[i] << "," << summary.features[j] << ","
          << format_double(summary.aggregated_phi(static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)))
          << ","
          << format_double(summary.feature_values(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(j)))
          << "\n";
  return out.str();
}

json counterfactual_to_json(const CounterfactualResult& result, const FeatureSchema& schema) {
  json doc;
  json point;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& col = schema.columns[j];
    double v = result.counterfactual.get(0, j);
    if (col.type == ColumnType::categorical)
      point[col.name] = col.levels[static_cast<std::size_t>(v)];
    else
      point[col.name] = v;
  }
  doc["counterfactual"] = std::move(point);
  doc["expected_time_original"] = result.expected_time_original;
  doc["expected_time_counterfactual"] = result.expected_time_counterfactual;
  doc["distance"] = result.distance;
  doc["loss"] = result.loss;
  doc["loss_trace"] = result.loss_trace;
  doc["converged"] = result.converged;
  return doc;
}

}  // namespace survexplain
