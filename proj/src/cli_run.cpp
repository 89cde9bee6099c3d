#include "survexplain/cli_run.hpp"

#include "survexplain/estimators.hpp"
#include "survexplain/parallel.hpp"
#include "survexplain/serialize.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <numeric>
#include <fstream>
#include <iostream>
#include <sstream>

namespace survexplain {

namespace {

namespace fs = std::filesystem;

struct IoArgs {
  std::string data_path;
  std::string schema_path;
  std::string model_path;
  std::string out_dir;
  std::string times = "auto";
  std::uint64_t seed = 0;
  int threads = 0;
};

void add_data_options(CLI::App* cmd, IoArgs& io) {
  cmd->add_option("--data", io.data_path, "dataset CSV")->required();
  cmd->add_option("--schema", io.schema_path, "schema JSON")->required();
}

void add_common_options(CLI::App* cmd, IoArgs& io) {
  cmd->add_option("--out", io.out_dir, "output directory")->required();
  cmd->add_option("--threads", io.threads, "worker pool cap");
}

SurvivalDataset load_data(const IoArgs& io) {
  std::ifstream in(io.schema_path);
  if (!in) throw std::runtime_error("cannot open " + io.schema_path);
  std::stringstream buf;
  buf << in.rdbuf();
  DatasetSchema schema = DatasetSchema::from_json_text(buf.str());
  return load_csv(io.data_path, schema).data;
}

TimeGrid resolve_times(const std::string& spec, const SurvivalDataset& data) {
  if (spec == "auto") return default_eval_grid(data);
  std::vector<double> points;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) points.push_back(std::stod(token));
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return TimeGrid(std::move(points));
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) values.push_back(std::stod(token));
  }
  return values;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// JSON artifacts carry the resolved configuration next to the result; CSV
// artifacts get the same configuration on a leading comment line.
void write_json_artifact(const fs::path& path, const json& config, const json& result) {
  json doc;
  doc["config"] = config;
  doc["result"] = result;
  write_text(path, doc.dump(2) + "\n");
}

void write_csv_artifact(const fs::path& path, const json& config, const std::string& csv) {
  write_text(path, "# config: " + config.dump() + "\n" + csv);
}

json io_config(const std::string& command, const IoArgs& io) {
  json config;
  config["command"] = command;
  if (!io.data_path.empty()) config["data"] = io.data_path;
  if (!io.schema_path.empty()) config["schema"] = io.schema_path;
  if (!io.model_path.empty()) config["model"] = io.model_path;
  config["out"] = io.out_dir;
  config["seed"] = io.seed;
  config["threads"] = io.threads;
  config["times"] = io.times;
  return config;
}

std::vector<double> observed_time_weights(const SurvivalDataset& data, const TimeGrid& times) {
  std::vector<double> weights(times.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    if (data.event()[i] != 1) continue;
    for (std::size_t s = 0; s < times.size(); ++s) {
      if (data.time()[i] == times[s]) {
        weights[s] += 1.0;
        total += 1.0;
        break;
      }
    }
  }
  if (total == 0.0)
    throw std::runtime_error("no observed event times match the evaluation grid");
  return weights;
}

std::optional<double> resolve_center(const std::string& text, const EffectGrid& grid) {
  if (text.empty()) return std::nullopt;
  if (text == "min") return grid.points.front();
  if (text == "max") return grid.points.back();
  return std::stod(text);
}

GridKind parse_grid_kind(const std::string& text) {
  if (text == "equidistant") return GridKind::equidistant;
  if (text == "quantile") return GridKind::quantile;
  if (text == "sample") return GridKind::sample;
  throw std::runtime_error("unknown grid kind: " + text);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"model-agnostic explanations for right-censored survival models"};
  app.require_subcommand(1);
  std::function<void()> action;

  // ---- synth ----------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  {
    auto io = std::make_shared<IoArgs>();
    auto spec = std::make_shared<SyntheticSpec>();
    auto coefs = std::make_shared<std::string>();
    auto baseline = std::make_shared<std::string>("exponential");
    auto interactions = std::make_shared<std::string>();
    synth->add_option("--n", spec->n, "rows")->required();
    synth->add_option("--p", spec->p, "features")->required();
    synth->add_option("--coefs", *coefs, "comma-separated true coefficients")->required();
    synth->add_option("--baseline", *baseline, "exponential|weibull");
    synth->add_option("--rate", spec->rate, "exponential rate");
    synth->add_option("--shape", spec->shape, "weibull shape");
    synth->add_option("--scale", spec->scale, "weibull scale");
    synth->add_option("--censoring", spec->censoring_rate, "target censoring fraction");
    synth->add_option("--interactions", *interactions, "a:b:coef list, semicolon separated");
    synth->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(synth, *io);
    synth->callback([=, &action]() {
      action = [=]() {
        SyntheticSpec s = *spec;
        s.coefficients = parse_double_list(*coefs);
        s.seed = io->seed;
        if (*baseline == "weibull") s.baseline = BaselineFamily::weibull;
        else if (*baseline == "exponential") s.baseline = BaselineFamily::exponential;
        else throw std::runtime_error("unknown baseline: " + *baseline);
        if (!interactions->empty()) {
          std::stringstream ss(*interactions);
          std::string term;
          while (std::getline(ss, term, ';')) {
            InteractionTerm t;
            if (std::sscanf(term.c_str(), "%zu:%zu:%lf", &t.a, &t.b, &t.coefficient) != 3)
              throw std::runtime_error("bad interaction term: " + term);
            s.interactions.push_back(t);
          }
        }
        SurvivalDataset data = generate_synthetic(s);
        fs::create_directories(io->out_dir);
        json config = io_config("synth", *io);
        config["n"] = s.n;
        config["p"] = s.p;
        config["coefs"] = s.coefficients;
        config["baseline"] = *baseline;
        config["censoring"] = s.censoring_rate;
        fs::path csv_path = fs::path(io->out_dir) / "synthetic.csv";
        fs::path tmp_path = fs::path(io->out_dir) / "synthetic.csv.tmp";
        save_csv(data, tmp_path.string());
        {
          std::ifstream body(tmp_path, std::ios::binary);
          std::ofstream out(csv_path, std::ios::binary);
          out << "# config: " << config.dump() << "\n" << body.rdbuf();
        }
        fs::remove(tmp_path);
        write_text(fs::path(io->out_dir) / "schema.json",
                   synthetic_schema(s.p).to_json_text() + "\n");
        json result;
        result["rows"] = data.n_rows();
        result["events"] = data.n_events();
        write_json_artifact(fs::path(io->out_dir) / "synth_run.json", config, result);
      };
    });
  }

  // ---- fit ------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "fit a survival model");
  {
    auto io = std::make_shared<IoArgs>();
    auto model_type = std::make_shared<std::string>();
    auto cox_cfg = std::make_shared<CoxFitConfig>();
    auto rsf_cfg = std::make_shared<RSFConfig>();
    auto no_bootstrap = std::make_shared<bool>(false);
    add_data_options(fit, *io);
    fit->add_option("--model-type", *model_type, "cox|rsf")->required();
    fit->add_option("--tol", cox_cfg->tolerance, "score tolerance (cox)");
    fit->add_option("--max-iter", cox_cfg->max_iter, "newton iteration cap (cox)");
    fit->add_option("--n-trees", rsf_cfg->n_trees, "trees (rsf)");
    fit->add_option("--mtry", rsf_cfg->mtry, "features per split, 0=sqrt(p) (rsf)");
    fit->add_option("--min-node-size", rsf_cfg->min_node_size, "terminal node floor (rsf)");
    fit->add_flag("--no-bootstrap", *no_bootstrap, "grow every tree on the full sample (rsf)");
    auto* seed_opt = fit->add_option("--seed", io->seed, "rng seed (required for rsf)");
    add_common_options(fit, *io);
    fit->callback([=, &action]() {
      action = [=]() {
        SurvivalDataset data = load_data(*io);
        fs::create_directories(io->out_dir);
        json config = io_config("fit", *io);
        config["model_type"] = *model_type;
        json doc;
        if (*model_type == "cox") {
          config["tol"] = cox_cfg->tolerance;
          config["max_iter"] = cox_cfg->max_iter;
          doc = cox_to_json(fit_cox(data, *cox_cfg));
        } else if (*model_type == "rsf") {
          if (seed_opt->count() == 0)
            throw std::runtime_error("--seed is required for stochastic fits");
          RSFConfig cfg = *rsf_cfg;
          cfg.bootstrap = !*no_bootstrap;
          cfg.seed = io->seed;
          cfg.threads = io->threads;
          config["n_trees"] = cfg.n_trees;
          config["mtry"] = cfg.mtry;
          config["min_node_size"] = cfg.min_node_size;
          doc = rsf_to_json(fit_rsf(data, cfg));
        } else {
          throw std::runtime_error("unknown model type: " + *model_type);
        }
        doc["run_config"] = config;
        save_model_json((fs::path(io->out_dir) / "model.json").string(), doc);
      };
    });
  }

  // ---- evaluate ---------------------------------------------------------
  auto* evaluate_cmd = app.add_subcommand("evaluate", "time-dependent performance report");
  {
    auto io = std::make_shared<IoArgs>();
    auto bins = std::make_shared<int>(10);
    add_data_options(evaluate_cmd, *io);
    evaluate_cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    evaluate_cmd->add_option("--bins", *bins, "calibration bins");
    add_common_options(evaluate_cmd, *io);
    evaluate_cmd->callback([=, &action]() {
      action = [=]() {
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        EvalReport report = evaluate(*model, data, *bins);
        fs::create_directories(io->out_dir);
        json config = io_config("evaluate", *io);
        config["bins"] = *bins;
        write_json_artifact(fs::path(io->out_dir) / "evaluation.json", config,
                            eval_report_to_json(report));
      };
    });
  }

  // ---- explain ----------------------------------------------------------
  auto* explain = app.add_subcommand("explain", "model-agnostic explanations");
  explain->require_subcommand(1);

  auto add_effect_cmd = [&](const std::string& name, const std::string& help) {
    auto* cmd = explain->add_subcommand(name, help);
    return cmd;
  };

  // ice / pdp share flags
  for (const std::string name : {"ice", "pdp"}) {
    auto* cmd = add_effect_cmd(name, name == "ice" ? "individual conditional expectations"
                                                   : "partial dependence");
    auto io = std::make_shared<IoArgs>();
    auto feature = std::make_shared<std::string>();
    auto grid_kind = std::make_shared<std::string>("quantile");
    auto grid_size = std::make_shared<int>(20);
    auto center = std::make_shared<std::string>();
    auto sample_cap = std::make_shared<std::size_t>(name == "ice" ? 100 : 0);
    auto marginalize = std::make_shared<std::string>("none");
    auto time_weights = std::make_shared<std::string>("unique");
    bool is_ice = name == "ice";
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--feature", *feature, "feature of interest")->required();
    cmd->add_option("--grid-kind", *grid_kind, "equidistant|quantile|sample");
    cmd->add_option("--grid-size", *grid_size, "grid points");
    cmd->add_option("--center-at", *center, "reference value, or min|max");
    cmd->add_option("--sample", *sample_cap, "instance subsample cap (0 = all)");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--marginalize", *marginalize, "none|mean|sum");
    cmd->add_option("--time-weights", *time_weights, "unique|observed");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        TimeGrid times = resolve_times(io->times, data);
        EffectGrid grid = build_grid(data, *feature, parse_grid_kind(*grid_kind), *grid_size,
                                     io->seed);
        auto center_at = resolve_center(*center, grid);
        std::vector<std::size_t> rows;
        if (*sample_cap > 0) rows = sample_instances(data.n_rows(), *sample_cap, io->seed);
        EffectSurface surface =
            is_ice ? ice_curves(*model, data, grid, times, center_at, rows, io->threads)
                   : pdp_curves(*model, data, grid, times, center_at, rows, io->threads);
        if (*marginalize != "none") {
          std::vector<double> weights;
          if (*time_weights == "observed") weights = observed_time_weights(data, times);
          surface = marginalize_time(
              surface, *marginalize == "mean" ? TimeMarginal::mean_time : TimeMarginal::sum_time,
              weights);
        }
        fs::create_directories(io->out_dir);
        json config = io_config("explain " + name, *io);
        config["feature"] = *feature;
        config["grid_kind"] = *grid_kind;
        config["grid_size"] = *grid_size;
        if (center_at) config["center_at"] = *center_at;
        config["sample"] = *sample_cap;
        config["marginalize"] = *marginalize;
        write_csv_artifact(fs::path(io->out_dir) / (name + ".csv"), config,
                           effect_surface_to_csv(surface, data.schema()));
        write_json_artifact(fs::path(io->out_dir) / (name + ".json"), config,
                            effect_surface_to_json(surface, data.schema()));
      };
    });
  }

  // ale
  {
    auto* cmd = add_effect_cmd("ale", "accumulated local effects");
    auto io = std::make_shared<IoArgs>();
    auto feature = std::make_shared<std::string>();
    auto intervals = std::make_shared<int>(10);
    auto uncentered = std::make_shared<bool>(false);
    auto marginalize = std::make_shared<std::string>("none");
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--feature", *feature, "feature of interest")->required();
    cmd->add_option("--intervals", *intervals, "quantile intervals");
    cmd->add_flag("--uncentered", *uncentered, "skip mean-centering");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--marginalize", *marginalize, "none|mean|sum (inside the differences)");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        TimeGrid times = resolve_times(io->times, data);
        EffectSurface surface;
        if (*marginalize == "none") {
          surface = ale_curves(*model, data, *feature, times, *intervals, !*uncentered,
                               io->threads);
        } else {
          surface = ale_t(*model, data, *feature, times,
                          *marginalize == "mean" ? TimeMarginal::mean_time
                                                 : TimeMarginal::sum_time,
                          *intervals, !*uncentered, io->threads);
        }
        fs::create_directories(io->out_dir);
        json config = io_config("explain ale", *io);
        config["feature"] = *feature;
        config["intervals"] = *intervals;
        config["centered"] = !*uncentered;
        config["marginalize"] = *marginalize;
        write_csv_artifact(fs::path(io->out_dir) / "ale.csv", config,
                           effect_surface_to_csv(surface, data.schema()));
        write_json_artifact(fs::path(io->out_dir) / "ale.json", config,
                            effect_surface_to_json(surface, data.schema()));
      };
    });
  }

  // mplot
  {
    auto* cmd = add_effect_cmd("mplot", "conditional marginal effect plot");
    auto io = std::make_shared<IoArgs>();
    auto feature = std::make_shared<std::string>();
    auto grid_kind = std::make_shared<std::string>("quantile");
    auto grid_size = std::make_shared<int>(20);
    auto fraction = std::make_shared<double>(0.1);
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--feature", *feature, "feature of interest")->required();
    cmd->add_option("--grid-kind", *grid_kind, "equidistant|quantile|sample");
    cmd->add_option("--grid-size", *grid_size, "grid points");
    cmd->add_option("--neighborhood", *fraction, "rank-window fraction");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        TimeGrid times = resolve_times(io->times, data);
        EffectGrid grid = build_grid(data, *feature, parse_grid_kind(*grid_kind), *grid_size,
                                     io->seed);
        EffectSurface surface = m_plot(*model, data, grid, times, *fraction, io->threads);
        fs::create_directories(io->out_dir);
        json config = io_config("explain mplot", *io);
        config["feature"] = *feature;
        config["neighborhood"] = *fraction;
        write_csv_artifact(fs::path(io->out_dir) / "mplot.csv", config,
                           effect_surface_to_csv(surface, data.schema()));
        write_json_artifact(fs::path(io->out_dir) / "mplot.json", config,
                            effect_surface_to_json(surface, data.schema()));
      };
    });
  }

  // hstat
  {
    auto* cmd = add_effect_cmd("hstat", "interaction strength statistics");
    auto io = std::make_shared<IoArgs>();
    auto feature = std::make_shared<std::string>();
    auto feature_b = std::make_shared<std::string>();
    auto opts = std::make_shared<HStatOptions>();
    auto scale = std::make_shared<std::string>("survival");
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--feature", *feature, "first feature")->required();
    cmd->add_option("--feature-b", *feature_b, "second feature (omit for total interaction)");
    cmd->add_option("--sample-size", opts->sample_size, "evaluation rows");
    cmd->add_option("--scale", *scale, "survival|log-chf output scale");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        TimeGrid times = resolve_times(io->times, data);
        HStatOptions o = *opts;
        o.seed = io->seed;
        o.threads = io->threads;
        if (*scale == "log-chf") o.scale = ExplainScale::log_chf;
        else if (*scale != "survival") throw std::runtime_error("unknown scale: " + *scale);
        HStatResult result =
            feature_b->empty() ? h_total(*model, data, *feature, times, o)
                               : h_two_way(*model, data, *feature, *feature_b, times, o);
        fs::create_directories(io->out_dir);
        json config = io_config("explain hstat", *io);
        config["feature"] = *feature;
        if (!feature_b->empty()) config["feature_b"] = *feature_b;
        config["sample_size"] = o.sample_size;
        config["scale"] = *scale;
        write_csv_artifact(fs::path(io->out_dir) / "hstat.csv", config, hstat_to_csv(result));
        write_json_artifact(fs::path(io->out_dir) / "hstat.json", config, hstat_to_json(result));
      };
    });
  }

  // pfi / cpi
  for (const std::string name : {"pfi", "cpi"}) {
    auto* cmd = add_effect_cmd(name, name == "pfi" ? "permutation feature importance"
                                                   : "conditional predictive impact");
    auto io = std::make_shared<IoArgs>();
    auto opts = std::make_shared<ImportanceOptions>();
    auto mode = std::make_shared<std::string>("difference");
    bool is_pfi = name == "pfi";
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--repeats", opts->repeats, "permutation/knockoff repeats");
    cmd->add_option("--mode", *mode, "difference|quotient");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        TimeGrid times = resolve_times(io->times, data);
        ImportanceOptions o = *opts;
        o.seed = io->seed;
        o.threads = io->threads;
        o.mode = *mode == "quotient" ? ImportanceMode::quotient : ImportanceMode::difference;
        ImportanceResult result = is_pfi
                                      ? pfi(*model, data, default_brier_loss(), times, o)
                                      : cpi(*model, data, default_brier_loss(), times, o);
        fs::create_directories(io->out_dir);
        json config = io_config("explain " + name, *io);
        config["repeats"] = o.repeats;
        config["mode"] = *mode;
        write_csv_artifact(fs::path(io->out_dir) / (name + ".csv"), config,
                           importance_to_csv(result));
        write_json_artifact(fs::path(io->out_dir) / (name + ".json"), config,
                            importance_to_json(result));
      };
    });
  }

  // loco
  {
    auto* cmd = add_effect_cmd("loco", "leave-one-covariate-out importance");
    auto io = std::make_shared<IoArgs>();
    auto model_type = std::make_shared<std::string>("cox");
    auto rsf_cfg = std::make_shared<RSFConfig>();
    auto mode = std::make_shared<std::string>("difference");
    add_data_options(cmd, *io);
    cmd->add_option("--model-type", *model_type, "refit family: cox|rsf");
    cmd->add_option("--n-trees", rsf_cfg->n_trees, "trees (rsf)");
    cmd->add_option("--min-node-size", rsf_cfg->min_node_size, "terminal node floor (rsf)");
    cmd->add_option("--mode", *mode, "difference|quotient");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        TimeGrid times = resolve_times(io->times, data);
        ModelSpec spec;
        if (*model_type == "rsf") {
          spec.family = ModelSpec::Family::rsf;
          spec.rsf = *rsf_cfg;
          spec.rsf.seed = io->seed;
          spec.rsf.threads = io->threads;
        } else if (*model_type != "cox") {
          throw std::runtime_error("unknown model type: " + *model_type);
        }
        ImportanceOptions o;
        o.seed = io->seed;
        o.threads = io->threads;
        o.mode = *mode == "quotient" ? ImportanceMode::quotient : ImportanceMode::difference;
        ImportanceResult result = loco(spec, data, default_brier_loss(), times, o);
        fs::create_directories(io->out_dir);
        json config = io_config("explain loco", *io);
        config["model_type"] = *model_type;
        config["mode"] = *mode;
        write_csv_artifact(fs::path(io->out_dir) / "loco.csv", config, importance_to_csv(result));
        write_json_artifact(fs::path(io->out_dir) / "loco.json", config,
                            importance_to_json(result));
      };
    });
  }

  // survlime
  {
    auto* cmd = add_effect_cmd("survlime", "local Cox surrogate explanation");
    auto io = std::make_shared<IoArgs>();
    auto instance = std::make_shared<std::size_t>(0);
    auto opts = std::make_shared<SurvLimeOptions>();
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--instance", *instance, "row index to explain")->required();
    cmd->add_option("--neighborhood-size", opts->n_points, "generated points");
    cmd->add_option("--kernel-radius", opts->kernel_radius, "kernel radius");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        SurvLimeOptions o = *opts;
        o.seed = io->seed;
        o.threads = io->threads;
        if (*instance >= data.n_rows()) throw std::runtime_error("instance index out of range");
        SurvLimeResult result = survlime_explain(*model, data, data.features(), *instance, o);
        fs::create_directories(io->out_dir);
        json config = io_config("explain survlime", *io);
        config["instance"] = *instance;
        config["neighborhood_size"] = o.n_points;
        config["kernel_radius"] = o.kernel_radius;
        write_json_artifact(fs::path(io->out_dir) / "survlime.json", config,
                            survlime_to_json(result));
      };
    });
  }

  // survshap
  {
    auto* cmd = add_effect_cmd("survshap", "time-dependent attribution curves");
    auto io = std::make_shared<IoArgs>();
    auto instance = std::make_shared<long long>(-1);
    auto all = std::make_shared<bool>(false);
    auto estimator = std::make_shared<std::string>("auto");
    auto opts = std::make_shared<SurvShapOptions>();
    auto background_cap = std::make_shared<std::size_t>(100);
    auto max_instances = std::make_shared<std::size_t>(0);
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--instance", *instance, "row index to explain");
    cmd->add_flag("--all", *all, "aggregate attributions over instances");
    cmd->add_option("--estimator", *estimator, "auto|exact|sampling|kernel");
    cmd->add_option("--n-perms", opts->n_permutations, "sampled permutations");
    cmd->add_option("--n-coalitions", opts->n_coalitions, "sampled coalitions (kernel)");
    cmd->add_option("--background", *background_cap, "background row cap");
    cmd->add_option("--max-instances", *max_instances, "instance cap for --all (0 = all)");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        TimeGrid times = resolve_times(io->times, data);
        SurvShapOptions o = *opts;
        o.seed = io->seed;
        o.threads = io->threads;
        auto bg_rows = sample_instances(data.n_rows(), *background_cap, io->seed);
        FeatureTable background = data.features().select_rows(bg_rows);
        auto explain_one = [&](std::size_t row) {
          std::string mode = *estimator;
          if (mode == "auto") mode = data.n_features() <= 6 ? "exact" : "sampling";
          if (mode == "exact")
            return survshap_sampling(*model, background, data.features(), row, times, true, o);
          if (mode == "sampling")
            return survshap_sampling(*model, background, data.features(), row, times, false, o);
          if (mode == "kernel")
            return survshap_kernel(*model, background, data.features(), row, times, o);
          throw std::runtime_error("unknown estimator: " + mode);
        };
        fs::create_directories(io->out_dir);
        json config = io_config("explain survshap", *io);
        config["estimator"] = *estimator;
        config["background"] = *background_cap;
        if (*all) {
          std::vector<std::size_t> rows(data.n_rows());
          std::iota(rows.begin(), rows.end(), std::size_t{0});
          if (*max_instances > 0 && rows.size() > *max_instances)
            rows = sample_instances(data.n_rows(), *max_instances, io->seed);
          std::vector<SurvShapResult> results;
          results.reserve(rows.size());
          for (std::size_t row : rows) results.push_back(explain_one(row));
          GlobalShapSummary summary = aggregate_global(results, data);
          config["instances"] = rows.size();
          write_json_artifact(fs::path(io->out_dir) / "survshap_global.json", config,
                              global_shap_to_json(summary));
          write_csv_artifact(fs::path(io->out_dir) / "survshap_curves.csv", config,
                             global_shap_curves_csv(summary));
          write_csv_artifact(fs::path(io->out_dir) / "survshap_beeswarm.csv", config,
                             global_shap_beeswarm_csv(summary));
        } else {
          if (*instance < 0) throw std::runtime_error("--instance or --all is required");
          auto row = static_cast<std::size_t>(*instance);
          if (row >= data.n_rows()) throw std::runtime_error("instance index out of range");
          config["instance"] = row;
          SurvShapResult result = explain_one(row);
          write_json_artifact(fs::path(io->out_dir) / "survshap.json", config,
                              survshap_to_json(result));
        }
      };
    });
  }

  // counterfactual
  {
    auto* cmd = add_effect_cmd("counterfactual", "hinge-loss counterfactual search");
    auto io = std::make_shared<IoArgs>();
    auto instance = std::make_shared<std::size_t>(0);
    auto opts = std::make_shared<CounterfactualOptions>();
    add_data_options(cmd, *io);
    cmd->add_option("--model", io->model_path, "fitted model JSON")->required();
    cmd->add_option("--instance", *instance, "row index to explain")->required();
    cmd->add_option("--r-gap", opts->required_gap, "required expected-time increase")
        ->required();
    cmd->add_option("--c-reg", opts->regularization, "distance regularization strength");
    cmd->add_option("--particles", opts->pso.particles, "swarm size");
    cmd->add_option("--pso-iters", opts->pso.iterations, "swarm iterations");
    cmd->add_option("--times", io->times, "auto or comma-separated times");
    cmd->add_option("--seed", io->seed, "rng seed")->required();
    add_common_options(cmd, *io);
    cmd->callback([=, &action]() {
      action = [=]() {
        set_thread_cap(io->threads);
        SurvivalDataset data = load_data(*io);
        auto model = model_from_json(load_json_file(io->model_path));
        TimeGrid times = resolve_times(io->times, data);
        CounterfactualOptions o = *opts;
        o.seed = io->seed;
        o.threads = io->threads;
        if (*instance >= data.n_rows()) throw std::runtime_error("instance index out of range");
        CounterfactualResult result =
            counterfactual_explain(*model, data, data.features(), *instance, times, o);
        fs::create_directories(io->out_dir);
        json config = io_config("explain counterfactual", *io);
        config["instance"] = *instance;
        config["r_gap"] = o.required_gap;
        config["c_reg"] = o.regularization;
        write_json_artifact(fs::path(io->out_dir) / "counterfactual.json", config,
                            counterfactual_to_json(result, data.schema()));
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (action) action();
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"message", e.what()}, {"type", "computation"}};
    std::cerr << err.dump() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace survexplain
