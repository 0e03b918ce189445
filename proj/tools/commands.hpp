#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace silrrt::cli {

struct GenDataArgs {
  std::string env = "2d";
  int workspaces = 20;
  int scenarios_per = 25;
  int test_workspaces = 0;
  int obstacles = 5;
  std::uint64_t seed = 1;
  int max_samples = 2000;
  std::string manifest;
  std::string out;
};

struct PretrainArgs {
  std::string data;
  std::string config;
  int iters = 2000;
  std::uint64_t seed = 0;
  std::string resume;
  std::string out_checkpoint;
  std::string log;
};

struct FinetuneArgs {
  std::string data_scenarios;
  std::string checkpoint;
  std::string estimator_checkpoint;
  std::string wsil_config;
  std::string planner_config;
  int iters = -1;
  int max_samples = 0;
  std::uint64_t seed = 0;
  std::string out_checkpoint;
  std::string out_estimator;
  std::string log;
  std::string buffer_in;
  std::string buffer_out;
};

struct EvaluateArgs {
  std::string scenarios;
  std::string split = "test";
  std::string planners = "rrtstar,silrrt";
  std::string checkpoint;
  std::string wsil_checkpoint;
  std::string planner_config;
  int max_samples = 0;
  int trials = 3;
  std::uint64_t seed = 1;
  std::string out_csv;
  std::string report_csv;
  std::string results_dir;
  std::string preset = "desk";
};

struct RenderArgs {
  std::string scenario;
  std::string result;
  std::string out;
  bool no_cloud = false;
};

int gen_data(const GenDataArgs& a);
int pretrain(const PretrainArgs& a);
int finetune(const FinetuneArgs& a);
int evaluate(const EvaluateArgs& a);
int render(const RenderArgs& a);

}  // namespace silrrt::cli
