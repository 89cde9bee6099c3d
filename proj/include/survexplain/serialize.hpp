#pragma once

#include "survexplain/counterfactual.hpp"
#include "survexplain/effects.hpp"
#include "survexplain/importance.hpp"
#include "survexplain/interactions.hpp"
#include "survexplain/metrics.hpp"
#include "survexplain/survlime.hpp"
#include "survexplain/survshap.hpp"

#include <json.hpp>

#include <memory>
#include <string>

namespace survexplain {

using json = nlohmann::json;

json schema_to_json(const DatasetSchema& schema);
json feature_schema_to_json(const FeatureSchema& schema);
FeatureSchema feature_schema_from_json(const json& doc);

json cox_to_json(const CoxModel& model);
CoxModel cox_from_json(const json& doc);
json rsf_to_json(const RSFModel& model);
RSFModel rsf_from_json(const json& doc);

// {"type": "cox"|"rsf", ...}
std::unique_ptr<SurvivalModel> model_from_json(const json& doc);
void save_model_json(const std::string& path, const json& doc);
json load_json_file(const std::string& path);

json eval_report_to_json(const EvalReport& report);

json effect_surface_to_json(const EffectSurface& surface, const FeatureSchema& schema);
// long format: feature,instance,grid_value,time,value,method
std::string effect_surface_to_csv(const EffectSurface& surface, const FeatureSchema& schema);

json hstat_to_json(const HStatResult& result);
std::string hstat_to_csv(const HStatResult& result);

json importance_to_json(const ImportanceResult& result);
std::string importance_to_csv(const ImportanceResult& result);

json survlime_to_json(const SurvLimeResult& result);
json survshap_to_json(const SurvShapResult& result);
json global_shap_to_json(const GlobalShapSummary& summary);
std::string global_shap_curves_csv(const GlobalShapSummary& summary);
std::string global_shap_beeswarm_csv(const GlobalShapSummary& summary);
json counterfactual_to_json(const CounterfactualResult& result, const FeatureSchema& schema);

// fixed shortest-round-trip formatting so reruns are byte-identical
std::string format_double(double v);

}  // namespace survexplain
