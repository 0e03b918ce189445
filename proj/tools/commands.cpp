#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "silrrt/bench.hpp"
#include "silrrt/checkpoint.hpp"
#include "silrrt/error.hpp"
#include "silrrt/estimator.hpp"
#include "silrrt/io.hpp"
#include "silrrt/optim.hpp"
#include "silrrt/training.hpp"
#include "silrrt/wsil.hpp"

namespace silrrt::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Json optional_section(const Json& j, const char* key) { return j.contains(key) ? j.at(key) : Json::object(); }

void check_sections(const Json& j, std::initializer_list<const char*> allowed, const std::string& file) {
  if (!j.is_object()) throw FormatError(file + ": config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw FormatError(file + ": unknown config section '" + k + "'");
  }
}

Checkpoint load_model_checkpoint(const std::string& path) {
  if (path.empty()) throw FormatError("a checkpoint is required");
  if (!fs::exists(path)) throw FormatError("checkpoint " + path + " does not exist");
  try {
    return load_checkpoint(path);
  } catch (const IoError& e) {
    throw FormatError(e.what());
  }
}

void require_space_match(int model_state_dim, int model_point_dim, const StateSpace& space, const std::string& what) {
  if (model_state_dim != space.dim() || model_point_dim != space.ambient_dim()) {
    throw FormatError(what + " was built for a different state space");
  }
}

std::shared_ptr<const SamplerModel> load_sampler(const std::string& path) {
  return std::make_shared<const SamplerModel>(SamplerModel::from_checkpoint(load_model_checkpoint(path)));
}

}  // namespace

int gen_data(const GenDataArgs& a) {
  GenDataConfig cfg;
  if (!a.manifest.empty()) {
    cfg = gen_data_config_from_json(read_json_file(a.manifest).at("config"));
  } else {
    cfg.space = space_kind_from_string(a.env);
    cfg.workspaces = a.workspaces;
    cfg.scenarios_per = a.scenarios_per;
    cfg.test_workspaces = a.test_workspaces;
    cfg.obstacles = a.obstacles;
    cfg.seed = a.seed;
    cfg.planner.max_samples = a.max_samples;
  }
  const Dataset ds = generate_dataset(cfg, default_thread_count());
  write_dataset(a.out, ds);
  std::printf("generated %zu scenarios; collected %zu/%d training paths (%.1f%% success)\n", ds.scenarios.size(),
              ds.entries.size(), ds.attempted, 100.0 * ds.collection_success_rate());
  return 0;
}

int pretrain(const PretrainArgs& a) {
  const Dataset ds = read_dataset(a.data);
  const StateSpace& space = ds.scenarios.at(0).scenario.space;
  SamplerConfig mcfg;
  mcfg.state_dim = space.dim();
  mcfg.point_dim = space.ambient_dim();
  PretrainConfig pcfg;
  pcfg.iterations = a.iters;
  pcfg.seed = a.seed;
  bool explicit_model = false;
  if (!a.config.empty()) {
    Json j = read_json_file(a.config);
    check_sections(j, {"sampler", "pretrain"}, a.config);
    explicit_model = j.contains("sampler");
    mcfg = sampler_config_from_json(optional_section(j, "sampler"), mcfg);
    pcfg = pretrain_config_from_json(optional_section(j, "pretrain"), pcfg);
    pcfg.iterations = a.iters;
    pcfg.seed = a.seed;
  }
  require_space_match(mcfg.state_dim, mcfg.point_dim, space, "sampler config");

  std::unique_ptr<SamplerModel> model;
  ad::AdamState opt;
  long long done = 0;
  if (!a.resume.empty()) {
    const Checkpoint ckpt = load_model_checkpoint(a.resume);
    model = std::make_unique<SamplerModel>(SamplerModel::from_checkpoint(ckpt));
    if (explicit_model && !(model->config() == mcfg)) {
      throw FormatError("sampler config does not match the architecture in " + a.resume);
    }
    require_space_match(model->config().state_dim, model->config().point_dim, space, "checkpoint " + a.resume);
    auto params = model->params().pointers();
    load_optimizer_entries(ckpt, opt, params);
    if (ckpt.hyperparameters.contains("pretrain_iterations")) {
      done = hyperparameter_int(ckpt.hyperparameters, "pretrain_iterations");
    }
    if (a.iters == 0) {
      save_checkpoint(a.out_checkpoint, ckpt);
      write_text_file(a.log.empty() ? a.out_checkpoint + ".log.csv" : a.log, to_csv(std::vector<PretrainLogRow>{}));
      std::printf("0 iterations: checkpoint passed through unchanged\n");
      return 0;
    }
  } else {
    model = std::make_unique<SamplerModel>(mcfg, derive_seed(a.seed, 0x6d6f64656cULL));
  }
  const TaskSet tasks = dataset_tasks(ds);
  const auto demos = dataset_demonstrations(ds);
  pcfg.seed = derive_seed(a.seed, static_cast<std::uint64_t>(done));
  auto log = pretrain(*model, tasks, demos, pcfg, opt);
  for (auto& row : log) row.iteration += static_cast<int>(done);

  Checkpoint out = model->to_checkpoint();
  out.hyperparameters["pretrain_iterations"] = std::to_string(done + pcfg.iterations);
  auto params = model->params().pointers();
  for (auto& e : optimizer_entries(opt, params)) out.entries.push_back(std::move(e));
  save_checkpoint(a.out_checkpoint, out);
  write_text_file(a.log.empty() ? a.out_checkpoint + ".log.csv" : a.log, to_csv(log));
  if (!log.empty()) {
    std::printf("pretrained %d iterations on %zu paths; final loss %.4f\n", pcfg.iterations, demos.size(),
                log.back().loss);
  }
  return 0;
}

int finetune(const FinetuneArgs& a) {
  const Dataset ds = read_dataset(a.data_scenarios);
  const StateSpace& space = ds.scenarios.at(0).scenario.space;
  WsilConfig wcfg;
  PlannerConfig pcfg;
  EstimatorConfig ecfg;
  ecfg.state_dim = space.dim();
  ecfg.point_dim = space.ambient_dim();
  if (!a.wsil_config.empty()) {
    Json j = read_json_file(a.wsil_config);
    check_sections(j, {"wsil", "estimator", "planner"}, a.wsil_config);
    wcfg = wsil_config_from_json(optional_section(j, "wsil"), wcfg);
    ecfg = estimator_config_from_json(optional_section(j, "estimator"), ecfg);
    pcfg = planner_config_from_json(optional_section(j, "planner"), pcfg);
  }
  if (!a.planner_config.empty()) pcfg = planner_config_from_json(read_json_file(a.planner_config), pcfg);
  if (a.iters >= 0) wcfg.iterations = a.iters;
  if (a.max_samples > 0) pcfg.max_samples = a.max_samples;

  SamplerModel sampler = SamplerModel::from_checkpoint(load_model_checkpoint(a.checkpoint));
  require_space_match(sampler.config().state_dim, sampler.config().point_dim, space, "checkpoint " + a.checkpoint);
  std::unique_ptr<EstimatorModel> estimator;
  if (!a.estimator_checkpoint.empty()) {
    estimator = std::make_unique<EstimatorModel>(EstimatorModel::from_checkpoint(load_model_checkpoint(a.estimator_checkpoint)));
  } else {
    estimator = std::make_unique<EstimatorModel>(ecfg, derive_seed(a.seed, 0x657374ULL));
  }
  require_space_match(estimator->config().state_dim, estimator->config().point_dim, space, "estimator");

  std::vector<Scenario> train;
  for (const auto& s : ds.scenarios) {
    if (s.split == "train") train.push_back(s.scenario);
  }
  if (train.empty()) throw FormatError("dataset has no training scenarios");
  const TaskSet tasks = TaskSet::build(std::move(train));
  WsilState state(wcfg);
  if (!a.buffer_in.empty()) load_buffer(a.buffer_in, state.buffer);

  const std::string log_path = a.log.empty() ? a.out_checkpoint + ".wsil.csv" : a.log;
  std::string csv = csv_header(WsilLogRow{});
  Rng rng(derive_seed(a.seed, 0x7773696cULL));
  auto log = run_wsil(tasks, sampler, *estimator, wcfg, pcfg, state, rng, {});
  int successes = 0;
  for (const auto& r : log) {
    csv += to_csv_row(r);
    successes += r.success ? 1 : 0;
  }
  Checkpoint out = sampler.to_checkpoint();
  out.hyperparameters["wsil_iterations"] = std::to_string(wcfg.iterations);
  save_checkpoint(a.out_checkpoint, out);
  save_checkpoint(a.out_estimator.empty() ? a.out_checkpoint + ".estimator" : a.out_estimator,
                  estimator->to_checkpoint());
  write_text_file(log_path, csv);
  if (!a.buffer_out.empty()) save_buffer(a.buffer_out, state.buffer);
  std::printf("fine-tuned %d iterations; %d successful collections; buffer %zu; final K %.4g\n", wcfg.iterations,
              successes, state.buffer.size(), state.K);
  return 0;
}

int evaluate(const EvaluateArgs& a) {
  TaskSet tasks;
  std::vector<int> ids;
  if (fs::is_directory(a.scenarios) && fs::exists(fs::path(a.scenarios) / "manifest.json")) {
    const Dataset ds = read_dataset(a.scenarios);
    tasks = dataset_tasks(ds);
    ids = a.split == "all" ? std::vector<int>{} : ds.split_ids(a.split);
    if (a.split == "all") {
      for (const auto& s : ds.scenarios) ids.push_back(s.id);
    }
  } else {
    tasks = TaskSet::build(load_scenarios(a.scenarios));
    for (std::size_t i = 0; i < tasks.scenarios.size(); ++i) ids.push_back(static_cast<int>(i));
  }
  if (ids.empty()) throw FormatError("no scenarios to evaluate");
  const StateSpace& space = tasks.scenarios.at(static_cast<std::size_t>(ids[0])).space;

  std::vector<PlannerSpec> specs;
  for (const auto& name : split_list(a.planners)) {
    PlannerSpec s;
    s.name = name;
    if (name == "rrtstar") {
      s.kind = PlannerKind::UniformRrtStar;
    } else if (name == "rrt") {
      s.kind = PlannerKind::UniformRrt;
    } else if (name == "birrtstar") {
      s.kind = PlannerKind::UniformBiRrtStar;
    } else if (name == "silrrt" || name == "silrrt-wsil") {
      s.kind = PlannerKind::LearnedBiRrtStar;
      const std::string& path = name == "silrrt" ? a.checkpoint : a.wsil_checkpoint;
      if (path.empty()) throw FormatError("planner '" + name + "' needs a checkpoint");
      s.model = load_sampler(path);
      require_space_match(s.model->config().state_dim, s.model->config().point_dim, space, "checkpoint " + path);
    } else {
      throw FormatError("unknown planner '" + name + "'");
    }
    specs.push_back(std::move(s));
  }
  if (specs.empty()) throw FormatError("no planners requested");

  EvalConfig cfg;
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.max_samples = a.max_samples;
  cfg.threads = default_thread_count();
  cfg.preset = a.preset;
  if (!a.planner_config.empty()) cfg.planner = planner_config_from_json(read_json_file(a.planner_config));

  const auto rows = silrrt::evaluate(tasks, ids, specs, cfg);
  const auto summary = summarize(rows, std::string(to_string(space.kind())), cfg.trials, cfg.preset);
  write_text_file(a.out_csv, eval_rows_csv(rows));
  std::string report = a.report_csv;
  if (report.empty()) {
    fs::path p(a.out_csv);
    report = (p.parent_path() / (p.stem().string() + "_report.csv")).string();
  }
  write_text_file(report, eval_summary_csv(summary));
  if (!a.results_dir.empty()) {
    for (const auto& r : rows) {
      Json j;
      j["planner"] = r.planner;
      j["scenario"] = r.scenario;
      j["trial"] = r.trial;
      j["seed"] = r.seed;
      PlannerConfig pc = cfg.planner;
      pc.max_samples = r.max_samples;
      j["config"] = to_json(pc);
      j["result"] = plan_result_to_json(r.result);
      char name[96];
      std::snprintf(name, sizeof name, "%s_s%05d_t%02d.json", r.planner.c_str(), r.scenario, r.trial);
      write_text_file(fs::path(a.results_dir) / name, dump_json(j));
    }
  }
  for (const auto& s : summary) {
    std::printf("%-12s success %6.2f%%  samples %7.2f +- %7.2f  length %7.3f +- %6.3f  time %.4fs\n",
                s.planner.c_str(), s.success_rate, s.samples.mean, s.samples.std, s.path_length.mean,
                s.path_length.std, s.time.mean);
  }
  return 0;
}

int render(const RenderArgs& a) {
  auto scenarios = load_scenarios(a.scenario);
  if (scenarios.size() != 1) throw FormatError("render expects exactly one scenario");
  std::optional<PlanResult> result;
  if (!a.result.empty()) {
    Json j = read_json_file(a.result);
    result = plan_result_from_json(j.contains("result") ? j.at("result") : j);
  }
  write_text_file(a.out, render_svg(scenarios.front(), result ? &*result : nullptr, !a.no_cloud));
  return 0;
}

}  // namespace silrrt::cli
