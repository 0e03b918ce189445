#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "silrrt/environment.hpp"
#include "silrrt/estimator.hpp"
#include "silrrt/planner.hpp"
#include "silrrt/sampler_model.hpp"
#include "silrrt/training.hpp"
#include "silrrt/wsil.hpp"

namespace silrrt {

using Json = nlohmann::ordered_json;

/// Canonical text: keys in insertion order, every floating-point number with 17 significant digits.
std::string dump_json(const Json& j, int indent = 2);
/// printf("%.17g"), with ".0" appended when the result would read back as an integer.
std::string format_double(double v);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Json state_to_json(const State& s);
State state_from_json(const Json& j);
Json path_to_json(const std::vector<State>& path);
std::vector<State> path_from_json(const Json& j);

/// {space, bounds, obstacles, agent, start, goal, goal_radius, seed, angular_weight}; angles in radians.
Json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j);
void save_scenario(const std::filesystem::path& path, const Scenario& s);
/// Accepts a scenario file, a file holding an array of scenarios, or a directory of scenario files (name order).
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);

Json plan_result_to_json(const PlanResult& r, bool include_trees = true);
PlanResult plan_result_from_json(const Json& j);

// Config objects read from JSON. Missing keys keep their defaults; unknown keys throw FormatError.
Json to_json(const PlannerConfig& c);
PlannerConfig planner_config_from_json(const Json& j, PlannerConfig base = {});
Json to_json(const SamplerConfig& c);
SamplerConfig sampler_config_from_json(const Json& j, SamplerConfig base = {});
Json to_json(const EstimatorConfig& c);
EstimatorConfig estimator_config_from_json(const Json& j, EstimatorConfig base = {});
Json to_json(const PretrainConfig& c);
PretrainConfig pretrain_config_from_json(const Json& j, PretrainConfig base = {});
Json to_json(const WsilConfig& c);
WsilConfig wsil_config_from_json(const Json& j, WsilConfig base = {});

Json record_to_json(const DemonstrationRecord& r);
DemonstrationRecord record_from_json(const Json& j);
void save_buffer(const std::filesystem::path& path, const ReplayBuffer& buffer);
void load_buffer(const std::filesystem::path& path, ReplayBuffer& buffer);

std::string to_csv(const std::vector<PretrainLogRow>& log);
std::string csv_header(const WsilLogRow&);
std::string to_csv_row(const WsilLogRow& row);

}  // namespace silrrt
