#include <CLI11.hpp>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "silrrt/error.hpp"

int main(int argc, char** argv) {
  using namespace silrrt::cli;
  CLI::App app{"Learned-sampler RRT* workbench"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate workspaces, scenarios and RRT* demonstrations");
  gen->add_option("--env", gd.env, "2d | rigid | 3d | snake")->capture_default_str();
  gen->add_option("--workspaces", gd.workspaces, "Training workspaces")->capture_default_str();
  gen->add_option("--scenarios-per", gd.scenarios_per, "Scenarios per workspace")->capture_default_str();
  gen->add_option("--test-workspaces", gd.test_workspaces, "Held-out workspaces (test split)")->capture_default_str();
  gen->add_option("--obstacles", gd.obstacles, "Obstacles per workspace")->capture_default_str();
  gen->add_option("--seed", gd.seed, "Master seed")->capture_default_str();
  gen->add_option("--max-samples", gd.max_samples, "RRT* budget per collection query")->capture_default_str();
  gen->add_option("--manifest", gd.manifest, "Regenerate from an existing manifest.json");
  gen->add_option("--out", gd.out, "Output dataset directory")->required();

  PretrainArgs pt;
  auto* pre = app.add_subcommand("pretrain", "Negative log-likelihood pretraining of the sampler");
  pre->add_option("--data", pt.data, "Dataset directory")->required();
  pre->add_option("--config", pt.config, "JSON with optional 'sampler' and 'pretrain' sections");
  pre->add_option("--iters", pt.iters, "Optimizer steps")->capture_default_str();
  pre->add_option("--seed", pt.seed, "Seed")->capture_default_str();
  pre->add_option("--resume", pt.resume, "Continue from this checkpoint");
  pre->add_option("--out-checkpoint", pt.out_checkpoint, "Output checkpoint")->required();
  pre->add_option("--log", pt.log, "Training log CSV (default <out>.log.csv)");

  FinetuneArgs ft;
  auto* fin = app.add_subcommand("finetune", "Weighted self-imitation fine-tuning");
  fin->add_option("--data-scenarios", ft.data_scenarios, "Dataset directory (training split is used)")->required();
  fin->add_option("--checkpoint", ft.checkpoint, "Pretrained sampler checkpoint")->required();
  fin->add_option("--estimator-checkpoint", ft.estimator_checkpoint, "Start from this estimator");
  fin->add_option("--wsil-config", ft.wsil_config, "JSON with optional 'wsil', 'estimator', 'planner' sections");
  fin->add_option("--planner-config", ft.planner_config, "Planner JSON");
  fin->add_option("--iters", ft.iters, "Override the iteration count");
  fin->add_option("--max-samples", ft.max_samples, "Override the planner budget");
  fin->add_option("--seed", ft.seed, "Seed")->capture_default_str();
  fin->add_option("--out-checkpoint", ft.out_checkpoint, "Output sampler checkpoint")->required();
  fin->add_option("--out-estimator", ft.out_estimator, "Output estimator checkpoint (default <out>.estimator)");
  fin->add_option("--log", ft.log, "Training log CSV (default <out>.wsil.csv)");
  fin->add_option("--buffer-in", ft.buffer_in, "Restore the replay buffer from a dump");
  fin->add_option("--buffer-out", ft.buffer_out, "Dump the replay buffer");

  EvaluateArgs ev;
  auto* eva = app.add_subcommand("evaluate", "Benchmark planners on held-out scenarios");
  eva->add_option("--scenarios", ev.scenarios, "Dataset directory, scenario file or directory")->required();
  eva->add_option("--split", ev.split, "Dataset split: test | train | all")->capture_default_str();
  eva->add_option("--planners", ev.planners, "rrtstar,silrrt,silrrt-wsil,birrtstar,rrt")->capture_default_str();
  eva->add_option("--checkpoint", ev.checkpoint, "Sampler checkpoint for silrrt");
  eva->add_option("--wsil-checkpoint", ev.wsil_checkpoint, "Sampler checkpoint for silrrt-wsil");
  eva->add_option("--planner-config", ev.planner_config, "Planner JSON");
  eva->add_option("--max-samples", ev.max_samples, "Budget (0: 200, or 400 for uniform RRT* in 3D)")
      ->capture_default_str();
  eva->add_option("--trials", ev.trials, "Trials per scenario")->capture_default_str();
  eva->add_option("--seed", ev.seed, "Master seed")->capture_default_str();
  eva->add_option("--out-csv", ev.out_csv, "Per-query CSV")->required();
  eva->add_option("--report-csv", ev.report_csv, "Summary CSV (default <out>_report.csv)");
  eva->add_option("--results-dir", ev.results_dir, "Write one PlanResult JSON per query here");
  eva->add_option("--preset", ev.preset, "Preset label recorded in the report")->capture_default_str();

  RenderArgs rd;
  auto* ren = app.add_subcommand("render", "Render a scenario and optional plan result as SVG");
  ren->add_option("--scenario", rd.scenario, "Scenario file")->required();
  ren->add_option("--result", rd.result, "PlanResult JSON");
  ren->add_option("--out", rd.out, "Output SVG")->required();
  ren->add_flag("--no-cloud", rd.no_cloud, "Skip the point cloud");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    if (*gen) return gen_data(gd);
    if (*pre) return pretrain(pt);
    if (*fin) return finetune(ft);
    if (*eva) return evaluate(ev);
    if (*ren) return render(rd);
  } catch (const silrrt::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const silrrt::UnsupportedError& e) {
    std::fprintf(stderr, "unsupported: %s\n", e.what());
    return 4;
  } catch (const silrrt::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const silrrt::ContractViolation& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const silrrt::GenerationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
