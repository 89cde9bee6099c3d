#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "survexplain/counterfactual.hpp"
#include "survexplain/cox.hpp"
#include "survexplain/effects.hpp"
#include "survexplain/estimators.hpp"
#include "survexplain/importance.hpp"
#include "survexplain/interactions.hpp"
#include "survexplain/metrics.hpp"
#include "survexplain/rsf.hpp"
#include "survexplain/serialize.hpp"
#include "survexplain/survlime.hpp"
#include "survexplain/survshap.hpp"

#include <memory>
#include <optional>
#include <string>

namespace py = pybind11;
using namespace survexplain;

namespace {

struct PyModel {
  std::shared_ptr<SurvivalModel> model;
  std::string kind;
};

TimeGrid resolve_times(const std::optional<std::vector<double>>& times,
                       const SurvivalDataset& data) {
  if (!times) return default_eval_grid(data);
  return TimeGrid(*times);
}

SurvivalDataset dataset_from_arrays(const std::string& schema_json,
                                    const Eigen::MatrixXd& features,
                                    const std::vector<double>& time,
                                    const std::vector<int>& event) {
  FeatureSchema schema = feature_schema_from_json(json::parse(schema_json));
  if (static_cast<std::size_t>(features.cols()) != schema.size())
    throw std::invalid_argument("feature matrix width does not match the schema");
  FeatureTable table(schema, static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      table.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), features(i, j));
  return SurvivalDataset(std::move(table), time, event);
}

py::dict curve_dict(const StepCurve& curve) {
  py::dict out;
  out["times"] = curve.grid().points();
  out["values"] = curve.values();
  return out;
}

py::dict surface_dict(const EffectSurface& surface, const FeatureSchema& schema) {
  py::dict out;
  json doc = effect_surface_to_json(surface, schema);
  out["feature"] = surface.feature;
  out["method"] = doc["method"].get<std::string>();
  out["grid"] = surface.grid.points;
  if (surface.marginal == TimeMarginal::none) out["times"] = surface.times.points();
  out["instances"] = surface.instances;
  std::vector<std::size_t> shape{surface.n_instances, surface.n_grid, surface.n_times};
  out["shape"] = shape;
  out["values"] = surface.values;
  return out;
}

py::dict importance_dict(const ImportanceResult& result) {
  py::dict out;
  out["method"] = result.method;
  out["times"] = result.times.points();
  py::list features;
  for (const auto& fi : result.features) {
    py::dict jf;
    jf["feature"] = fi.feature;
    jf["per_time"] = fi.per_time;
    jf["aggregate"] = fi.aggregate;
    jf["p_value"] = fi.p_value;
    jf["failed"] = fi.failed;
    features.append(jf);
  }
  out["features"] = features;
  return out;
}

}  // namespace

PYBIND11_MODULE(_survexplain, m) {
  m.doc() = "model-agnostic explanations for right-censored survival models";

  py::class_<SurvivalDataset>(m, "Dataset")
      .def_property_readonly("n_rows", &SurvivalDataset::n_rows)
      .def_property_readonly("n_features", &SurvivalDataset::n_features)
      .def_property_readonly("time", &SurvivalDataset::time)
      .def_property_readonly("event", &SurvivalDataset::event)
      .def_property_readonly("feature_names",
                             [](const SurvivalDataset& d) {
                               std::vector<std::string> names;
                               for (const auto& c : d.schema().columns) names.push_back(c.name);
                               return names;
                             })
      .def("features",
           [](const SurvivalDataset& d) {
             Eigen::MatrixXd out(static_cast<Eigen::Index>(d.n_rows()),
                                 static_cast<Eigen::Index>(d.n_features()));
             for (std::size_t i = 0; i < d.n_rows(); ++i)
               for (std::size_t j = 0; j < d.n_features(); ++j)
                 out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                     d.features().get(i, j);
             return out;
           });

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind", [](const PyModel& m_) { return m_.kind; })
      .def("predict_survival",
           [](const PyModel& m_, const SurvivalDataset& data,
              const std::optional<std::vector<double>>& times) {
             return m_.model->predict_survival_matrix(data.features(),
                                                      resolve_times(times, data));
           },
           py::arg("data"), py::arg("times") = std::nullopt)
      .def("predict_chf",
           [](const PyModel& m_, const SurvivalDataset& data,
              const std::optional<std::vector<double>>& times) {
             return m_.model->predict_chf_matrix(data.features(), resolve_times(times, data));
           },
           py::arg("data"), py::arg("times") = std::nullopt)
      .def("to_json", [](const PyModel& m_) {
        if (m_.kind == "cox") return cox_to_json(*dynamic_cast<CoxModel*>(m_.model.get())).dump();
        return rsf_to_json(*dynamic_cast<RSFModel*>(m_.model.get())).dump();
      })
      .def_property_readonly("coefficients", [](const PyModel& m_) {
        auto* cox = dynamic_cast<CoxModel*>(m_.model.get());
        if (!cox) throw std::runtime_error("only cox models expose coefficients");
        return cox->coefficients();
      });

  m.def("dataset_from_arrays", &dataset_from_arrays, py::arg("schema_json"),
        py::arg("features"), py::arg("time"), py::arg("event"));

  m.def("load_csv",
        [](const std::string& path, const std::string& schema_json, bool impute) {
          DatasetSchema schema = DatasetSchema::from_json_text(schema_json);
          LoadOptions options;
          options.impute_missing = impute;
          auto loaded = load_csv(path, schema, options);
          return py::make_tuple(loaded.data, loaded.imputed_cells);
        },
        py::arg("path"), py::arg("schema_json"), py::arg("impute") = false);

  m.def("generate_synthetic",
        [](std::size_t n, std::size_t p, const std::vector<double>& coefs,
           const std::string& baseline, double rate, double shape, double scale,
           double censoring, std::uint64_t seed) {
          SyntheticSpec spec;
          spec.n = n;
          spec.p = p;
          spec.coefficients = coefs;
          spec.baseline =
              baseline == "weibull" ? BaselineFamily::weibull : BaselineFamily::exponential;
          spec.rate = rate;
          spec.shape = shape;
          spec.scale = scale;
          spec.censoring_rate = censoring;
          spec.seed = seed;
          return generate_synthetic(spec);
        },
        py::arg("n"), py::arg("p"), py::arg("coefs"), py::arg("baseline") = "exponential",
        py::arg("rate") = 0.1, py::arg("shape") = 1.0, py::arg("scale") = 10.0,
        py::arg("censoring") = 0.0, py::arg("seed") = 0);

  m.def("split",
        [](const SurvivalDataset& data, double train, double valid, double test,
           std::uint64_t seed) {
          auto parts = split(data, {train, valid, test}, seed);
          return py::make_tuple(parts.train, parts.valid, parts.test);
        },
        py::arg("data"), py::arg("train") = 0.6, py::arg("valid") = 0.2, py::arg("test") = 0.2,
        py::arg("seed") = 0);

  m.def("unique_event_times", [](const SurvivalDataset& data, bool include_censoring) {
    return unique_event_times(data, include_censoring).points();
  }, py::arg("data"), py::arg("include_censoring") = false);

  m.def("kaplan_meier",
        [](const SurvivalDataset& data) { return curve_dict(kaplan_meier(data)); });
  m.def("nelson_aalen",
        [](const SurvivalDataset& data) { return curve_dict(nelson_aalen(data)); });

  m.def("fit_cox",
        [](const SurvivalDataset& data, double tol, int max_iter) {
          CoxFitConfig config;
          config.tolerance = tol;
          config.max_iter = max_iter;
          return PyModel{std::make_shared<CoxModel>(fit_cox(data, config)), "cox"};
        },
        py::arg("data"), py::arg("tol") = 1e-9, py::arg("max_iter") = 100);

  m.def("fit_rsf",
        [](const SurvivalDataset& data, std::size_t n_trees, std::size_t mtry,
           std::size_t min_node_size, bool bootstrap, std::uint64_t seed, int threads) {
          RSFConfig config;
          config.n_trees = n_trees;
          config.mtry = mtry;
          config.min_node_size = min_node_size;
          config.bootstrap = bootstrap;
          config.seed = seed;
          config.threads = threads;
          return PyModel{std::make_shared<RSFModel>(fit_rsf(data, config)), "rsf"};
        },
        py::arg("data"), py::arg("n_trees") = 100, py::arg("mtry") = 0,
        py::arg("min_node_size") = 15, py::arg("bootstrap") = true, py::arg("seed") = 0,
        py::arg("threads") = 0);

  m.def("load_model", [](const std::string& text) {
    json doc = json::parse(text);
    std::string kind = doc.at("type").get<std::string>();
    return PyModel{std::shared_ptr<SurvivalModel>(model_from_json(doc)), kind};
  });

  m.def("evaluate",
        [](const PyModel& model, const SurvivalDataset& data, int bins) {
          EvalReport report = evaluate(*model.model, data, bins);
          py::dict out;
          out["times"] = report.times.points();
          out["brier"] = report.brier;
          out["ibs"] = report.integrated_brier;
          out["cindex"] = report.c_index;
          out["dcal_stat"] = report.d_calibration.statistic;
          out["dcal_bins"] = report.d_calibration.bin_counts;
          return out;
        },
        py::arg("model"), py::arg("data"), py::arg("bins") = 10);

  m.def("ice",
        [](const PyModel& model, const SurvivalDataset& data, const std::string& feature,
           const std::optional<std::vector<double>>& times, const std::string& grid_kind,
           int grid_size, std::optional<double> center_at, std::size_t sample,
           std::uint64_t seed, int threads) {
          GridKind kind = grid_kind == "equidistant" ? GridKind::equidistant
                          : grid_kind == "sample"    ? GridKind::sample
                                                     : GridKind::quantile;
          EffectGrid grid = build_grid(data, feature, kind, grid_size, seed);
          std::vector<std::size_t> rows;
          if (sample > 0) rows = sample_instances(data.n_rows(), sample, seed);
          auto surface = ice_curves(*model.model, data, grid, resolve_times(times, data),
                                    center_at, rows, threads);
          return surface_dict(surface, data.schema());
        },
        py::arg("model"), py::arg("data"), py::arg("feature"), py::arg("times") = std::nullopt,
        py::arg("grid_kind") = "quantile", py::arg("grid_size") = 20,
        py::arg("center_at") = std::nullopt, py::arg("sample") = 100, py::arg("seed") = 0,
        py::arg("threads") = 0);

  m.def("pdp",
        [](const PyModel& model, const SurvivalDataset& data, const std::string& feature,
           const std::optional<std::vector<double>>& times, const std::string& grid_kind,
           int grid_size, std::optional<double> center_at, std::uint64_t seed, int threads) {
          GridKind kind = grid_kind == "equidistant" ? GridKind::equidistant
                          : grid_kind == "sample"    ? GridKind::sample
                                                     : GridKind::quantile;
          EffectGrid grid = build_grid(data, feature, kind, grid_size, seed);
          auto surface = pdp_curves(*model.model, data, grid, resolve_times(times, data),
                                    center_at, {}, threads);
          return surface_dict(surface, data.schema());
        },
        py::arg("model"), py::arg("data"), py::arg("feature"), py::arg("times") = std::nullopt,
        py::arg("grid_kind") = "quantile", py::arg("grid_size") = 20,
        py::arg("center_at") = std::nullopt, py::arg("seed") = 0, py::arg("threads") = 0);

  m.def("ale",
        [](const PyModel& model, const SurvivalDataset& data, const std::string& feature,
           const std::optional<std::vector<double>>& times, int intervals, bool centered,
           int threads) {
          auto surface = ale_curves(*model.model, data, feature, resolve_times(times, data),
                                    intervals, centered, threads);
          return surface_dict(surface, data.schema());
        },
        py::arg("model"), py::arg("data"), py::arg("feature"), py::arg("times") = std::nullopt,
        py::arg("intervals") = 10, py::arg("centered") = true, py::arg("threads") = 0);

  m.def("mplot",
        [](const PyModel& model, const SurvivalDataset& data, const std::string& feature,
           const std::optional<std::vector<double>>& times, const std::string& grid_kind,
           int grid_size, double neighborhood, std::uint64_t seed, int threads) {
          GridKind kind = grid_kind == "equidistant" ? GridKind::equidistant
                          : grid_kind == "sample"    ? GridKind::sample
                                                     : GridKind::quantile;
          EffectGrid grid = build_grid(data, feature, kind, grid_size, seed);
          auto surface =
              m_plot(*model.model, data, grid, resolve_times(times, data), neighborhood, threads);
          return surface_dict(surface, data.schema());
        },
        py::arg("model"), py::arg("data"), py::arg("feature"), py::arg("times") = std::nullopt,
        py::arg("grid_kind") = "quantile", py::arg("grid_size") = 20,
        py::arg("neighborhood") = 0.1, py::arg("seed") = 0, py::arg("threads") = 0);

  m.def("order_categories", [](const SurvivalDataset& data, const std::string& feature) {
    return order_categories(data, feature);
  });

  m.def("hstat",
        [](const PyModel& model, const SurvivalDataset& data, const std::string& feature_a,
           const std::optional<std::string>& feature_b,
           const std::optional<std::vector<double>>& times, std::size_t sample_size,
           const std::string& scale, std::uint64_t seed, int threads) {
          HStatOptions options;
          options.sample_size = sample_size;
          options.seed = seed;
          options.threads = threads;
          options.scale = scale == "log-chf" ? ExplainScale::log_chf : ExplainScale::survival;
          TimeGrid grid = resolve_times(times, data);
          HStatResult result = feature_b
                                   ? h_two_way(*model.model, data, feature_a, *feature_b, grid,
                                               options)
                                   : h_total(*model.model, data, feature_a, grid, options);
          py::dict out;
          out["kind"] = result.kind;
          out["times"] = result.times.points();
          out["h2"] = result.values;
          out["marginal"] = result.marginal;
          out["flag_gt1"] = result.any_gt1;
          return out;
        },
        py::arg("model"), py::arg("data"), py::arg("feature_a"),
        py::arg("feature_b") = std::nullopt, py::arg("times") = std::nullopt,
        py::arg("sample_size") = 200, py::arg("scale") = "survival", py::arg("seed") = 0,
        py::arg("threads") = 0);

  m.def("pfi",
        [](const PyModel& model, const SurvivalDataset& data,
           const std::optional<std::vector<double>>& times, int repeats, std::uint64_t seed,
           int threads) {
          ImportanceOptions options;
          options.repeats = repeats;
          options.seed = seed;
          options.threads = threads;
          return importance_dict(
              pfi(*model.model, data, default_brier_loss(), resolve_times(times, data), options));
        },
        py::arg("model"), py::arg("data"), py::arg("times") = std::nullopt,
        py::arg("repeats") = 10, py::arg("seed") = 0, py::arg("threads") = 0);

  m.def("cpi",
        [](const PyModel& model, const SurvivalDataset& data,
           const std::optional<std::vector<double>>& times, int repeats, std::uint64_t seed,
           int threads) {
          ImportanceOptions options;
          options.repeats = repeats;
          options.seed = seed;
          options.threads = threads;
          return importance_dict(
              cpi(*model.model, data, default_brier_loss(), resolve_times(times, data), options));
        },
        py::arg("model"), py::arg("data"), py::arg("times") = std::nullopt,
        py::arg("repeats") = 10, py::arg("seed") = 0, py::arg("threads") = 0);

  m.def("loco",
        [](const SurvivalDataset& data, const std::string& model_type,
           const std::optional<std::vector<double>>& times, std::uint64_t seed, int threads) {
          ModelSpec spec;
          if (model_type == "rsf") {
            spec.family = ModelSpec::Family::rsf;
            spec.rsf.seed = seed;
            spec.rsf.threads = threads;
          }
          ImportanceOptions options;
          options.seed = seed;
          options.threads = threads;
          return importance_dict(
              loco(spec, data, default_brier_loss(), resolve_times(times, data), options));
        },
        py::arg("data"), py::arg("model_type") = "cox", py::arg("times") = std::nullopt,
        py::arg("seed") = 0, py::arg("threads") = 0);

  m.def("sample_knockoffs",
        [](const SurvivalDataset& data, std::uint64_t seed) {
          return sample_knockoffs(data, seed).encoded;
        },
        py::arg("data"), py::arg("seed") = 0);

  m.def("survlime",
        [](const PyModel& model, const SurvivalDataset& data, std::size_t instance,
           std::size_t n_points, double kernel_radius, std::uint64_t seed) {
          SurvLimeOptions options;
          options.n_points = n_points;
          options.kernel_radius = kernel_radius;
          options.seed = seed;
          auto result = survlime_explain(*model.model, data, data.features(), instance, options);
          py::dict out;
          std::vector<std::string> names;
          for (const auto& c : result.encoding.columns) names.push_back(c.name);
          out["encoded_columns"] = names;
          out["coefficients"] = result.coefficients_raw;
          out["coefficients_standardized"] = result.coefficients;
          out["local_importance"] = result.local_importance;
          out["fidelity"] = result.fidelity;
          out["surrogate_curve"] = curve_dict(result.surrogate_curve);
          out["blackbox_curve"] = curve_dict(result.blackbox_curve);
          return out;
        },
        py::arg("model"), py::arg("data"), py::arg("instance"), py::arg("n_points") = 100,
        py::arg("kernel_radius") = 0.5, py::arg("seed") = 0);

  m.def("survshap",
        [](const PyModel& model, const SurvivalDataset& data, std::size_t instance,
           const std::string& estimator, const std::optional<std::vector<double>>& times,
           int n_permutations, std::size_t background, std::uint64_t seed, int threads) {
          SurvShapOptions options;
          options.n_permutations = n_permutations;
          options.seed = seed;
          options.threads = threads;
          TimeGrid grid = resolve_times(times, data);
          auto bg_rows = sample_instances(data.n_rows(), background, seed);
          FeatureTable bg = data.features().select_rows(bg_rows);
          std::string mode = estimator;
          if (mode == "auto") mode = data.n_features() <= 6 ? "exact" : "sampling";
          SurvShapResult result =
              mode == "kernel"
                  ? survshap_kernel(*model.model, bg, data.features(), instance, grid, options)
                  : survshap_sampling(*model.model, bg, data.features(), instance, grid,
                                      mode == "exact", options);
          py::dict out;
          out["instance"] = result.instance;
          out["times"] = result.times.points();
          out["phi"] = result.phi;
          out["baseline"] = result.baseline;
          out["estimator"] = result.estimator;
          return out;
        },
        py::arg("model"), py::arg("data"), py::arg("instance"), py::arg("estimator") = "auto",
        py::arg("times") = std::nullopt, py::arg("n_permutations") = 200,
        py::arg("background") = 100, py::arg("seed") = 0, py::arg("threads") = 0);

  m.def("counterfactual",
        [](const PyModel& model, const SurvivalDataset& data, std::size_t instance,
           double r_gap, double c_reg, const std::optional<std::vector<double>>& times,
           std::uint64_t seed) {
          CounterfactualOptions options;
          options.required_gap = r_gap;
          options.regularization = c_reg;
          options.seed = seed;
          TimeGrid grid = times ? TimeGrid(*times) : unique_event_times(data);
          auto result =
              counterfactual_explain(*model.model, data, data.features(), instance, grid,
                                     options);
          py::dict out;
          std::vector<double> point(data.n_features());
          for (std::size_t j = 0; j < data.n_features(); ++j)
            point[j] = result.counterfactual.get(0, j);
          out["counterfactual"] = point;
          out["expected_time_original"] = result.expected_time_original;
          out["expected_time_counterfactual"] = result.expected_time_counterfactual;
          out["distance"] = result.distance;
          out["loss"] = result.loss;
          out["converged"] = result.converged;
          return out;
        },
        py::arg("model"), py::arg("data"), py::arg("instance"), py::arg("r_gap"),
        py::arg("c_reg") = 1.0, py::arg("times") = std::nullopt, py::arg("seed") = 0);

  m.attr("__version__") = "0.1.0";
}
