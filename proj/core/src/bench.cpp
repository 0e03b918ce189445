#include "silrrt/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "silrrt/error.hpp"

namespace silrrt {

namespace fs = std::filesystem;

int default_thread_count() {
  if (const char* env = std::getenv("SILRRT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<int> Dataset::split_ids(const std::string& split) const {
  std::vector<int> out;
  for (const auto& s : scenarios) {
    if (s.split == split) out.push_back(s.id);
  }
  return out;
}

Dataset generate_dataset(const GenDataConfig& config, int threads) {
  require(config.workspaces >= 0 && config.test_workspaces >= 0 && config.scenarios_per >= 1,
          "workspace and scenario counts must be non-negative");
  config.planner.validate();
  Dataset ds;
  ds.config = config;
  const StateSpace probe(config.space, default_workspace_bounds(config.space == SpaceKind::Point3D ? 3 : 2));
  const AgentGeometry agent = AgentGeometry::default_for(config.space);
  const int total_ws = config.workspaces + config.test_workspaces;
  for (int w = 0; w < total_ws; ++w) {
    Rng ws_rng(derive_seed(config.seed, 0x776f726b ^ 0ULL, static_cast<std::uint64_t>(w)));
    WorkspaceConfig wc;
    wc.ambient_dim = probe.ambient_dim();
    wc.n_obstacles = config.obstacles;
    wc.half_extent_range = config.half_extent_range;
    const Workspace ws = generate_workspace(ws_rng, wc);
    const std::string split = w < config.workspaces ? "train" : "test";
    for (int s = 0; s < config.scenarios_per; ++s) {
      const int id = w * config.scenarios_per + s;
      const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(s));
      ds.scenarios.push_back(
          {id, w, split, generate_scenario(seed, ws, config.space, agent, config.goal_radius, config.angular_weight)});
    }
  }
  const std::vector<int> train = ds.split_ids("train");
  std::vector<PlanResult> results(train.size());
  parallel_for(train.size(), threads, [&](std::size_t i) {
    const DatasetScenario& d = ds.scenarios[static_cast<std::size_t>(train[i])];
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(d.workspace),
                        static_cast<std::uint64_t>(d.id % config.scenarios_per), 1));
    UniformSampler uniform(config.planner.goal_bias);
    results[i] = rrt_star(d.scenario, uniform, config.planner, rng);
  });
  ds.attempted = static_cast<int>(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!results[i].success) continue;
    ds.entries.push_back({train[i], std::move(results[i].path), results[i].path_length, results[i].samples_generated});
  }
  return ds;
}

Json to_json(const GenDataConfig& c) {
  return Json{{"space", std::string(to_string(c.space))},
              {"workspaces", c.workspaces},
              {"scenarios_per", c.scenarios_per},
              {"test_workspaces", c.test_workspaces},
              {"obstacles", c.obstacles},
              {"half_extent_range", Json::array({c.half_extent_range.lo, c.half_extent_range.hi})},
              {"goal_radius", c.goal_radius},
              {"angular_weight", c.angular_weight},
              {"seed", c.seed},
              {"planner", to_json(c.planner)}};
}

GenDataConfig gen_data_config_from_json(const Json& j) {
  try {
    GenDataConfig c;
    c.space = space_kind_from_string(j.at("space").get<std::string>());
    c.workspaces = j.at("workspaces").get<int>();
    c.scenarios_per = j.at("scenarios_per").get<int>();
    c.test_workspaces = j.at("test_workspaces").get<int>();
    c.obstacles = j.at("obstacles").get<int>();
    c.half_extent_range = {j.at("half_extent_range").at(0).get<double>(), j.at("half_extent_range").at(1).get<double>()};
    c.goal_radius = j.at("goal_radius").get<double>();
    c.angular_weight = j.at("angular_weight").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.planner = planner_config_from_json(j.at("planner"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset manifest: ") + e.what());
  }
}

namespace {

std::string scenario_file(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scenarios/%05d.json", id);
  return buf;
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& ds) {
  std::error_code ec;
  fs::create_directories(dir / "scenarios", ec);
  if (ec) throw IoError("cannot create " + (dir / "scenarios").string() + ": " + ec.message());
  Json scenarios = Json::array();
  for (const auto& s : ds.scenarios) {
    const std::string file = scenario_file(s.id);
    save_scenario(dir / file, s.scenario);
    scenarios.push_back(Json{{"id", s.id}, {"workspace", s.workspace}, {"split", s.split}, {"file", file}});
  }
  Json manifest;
  manifest["format"] = "silrrt-dataset";
  manifest["version"] = 1;
  manifest["config"] = to_json(ds.config);
  manifest["collection"] = Json{{"planner", "rrtstar"},
                                {"attempted", ds.attempted},
                                {"succeeded", ds.entries.size()},
                                {"success_rate", ds.collection_success_rate()}};
  manifest["scenarios"] = std::move(scenarios);
  write_text_file(dir / "manifest.json", dump_json(manifest));
  Json entries = Json::array();
  for (const auto& e : ds.entries) {
    entries.push_back(Json{{"scenario", e.scenario},
                           {"file", scenario_file(e.scenario)},
                           {"c_real", e.c_real},
                           {"samples_generated", e.samples_generated},
                           {"path", path_to_json(e.path)}});
  }
  write_text_file(dir / "entries.json", dump_json(entries));
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw IoError("no manifest.json in " + dir.string());
  Json manifest = read_json_file(dir / "manifest.json");
  try {
    if (manifest.at("format") != "silrrt-dataset" || manifest.at("version") != 1) {
      throw FormatError("unsupported dataset format");
    }
    Dataset ds;
    ds.config = gen_data_config_from_json(manifest.at("config"));
    ds.attempted = manifest.at("collection").at("attempted").get<int>();
    for (const auto& s : manifest.at("scenarios")) {
      auto loaded = load_scenarios(dir / s.at("file").get<std::string>());
      if (loaded.size() != 1) throw FormatError("dataset scenario files hold one scenario each");
      ds.scenarios.push_back({s.at("id").get<int>(), s.at("workspace").get<int>(), s.at("split").get<std::string>(),
                              std::move(loaded.front())});
      if (ds.scenarios.back().id != static_cast<int>(ds.scenarios.size()) - 1) {
        throw FormatError("dataset scenario ids must be consecutive from 0");
      }
    }
    for (const auto& e : read_json_file(dir / "entries.json")) {
      DatasetEntry entry{e.at("scenario").get<int>(), path_from_json(e.at("path")), e.at("c_real").get<double>(),
                         e.at("samples_generated").get<int>()};
      if (entry.scenario < 0 || static_cast<std::size_t>(entry.scenario) >= ds.scenarios.size()) {
        throw FormatError("dataset entry refers to an unknown scenario");
      }
      ds.entries.push_back(std::move(entry));
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset: ") + e.what());
  }
}

TaskSet dataset_tasks(const Dataset& ds) {
  std::vector<Scenario> scenarios;
  for (const auto& s : ds.scenarios) scenarios.push_back(s.scenario);
  return TaskSet::build(std::move(scenarios));
}

std::vector<Demonstration> dataset_demonstrations(const Dataset& ds) {
  std::vector<Demonstration> out;
  for (const auto& e : ds.entries) out.push_back({e.scenario, e.path});
  return out;
}

std::uint64_t query_seed(std::uint64_t master, int scenario, int trial) {
  return derive_seed(master, static_cast<std::uint64_t>(scenario), static_cast<std::uint64_t>(trial));
}

PlanResult plan_once(const PlannerSpec& spec, const Scenario& scenario, const ad::Matrix* cloud,
                     const PlannerConfig& config, Rng& rng) {
  switch (spec.kind) {
    case PlannerKind::UniformRrtStar: {
      UniformSampler u(config.goal_bias);
      return rrt_star(scenario, u, config, rng);
    }
    case PlannerKind::UniformRrt: {
      UniformSampler u(config.goal_bias);
      return rrt(scenario, u, config, rng);
    }
    case PlannerKind::UniformBiRrtStar: {
      UniformSampler f(config.goal_bias), b(config.goal_bias);
      return bi_rrt_star(scenario, f, b, config, rng);
    }
    case PlannerKind::LearnedBiRrtStar: {
      require(spec.model != nullptr && cloud != nullptr, "learned planner needs a model and a point cloud");
      auto latents = std::make_shared<const ad::Matrix>(spec.model->encode(*cloud));
      LearnedSampler f(spec.model, latents), b(spec.model, latents);
      return bi_rrt_star(scenario, f, b, config, rng);
    }
  }
  throw ContractViolation("unknown planner kind");
}

std::vector<EvalRow> evaluate(const TaskSet& tasks, const std::vector<int>& scenario_ids,
                              const std::vector<PlannerSpec>& planners, const EvalConfig& config) {
  require(config.trials >= 1, "at least one trial is required");
  std::vector<EvalRow> rows;
  for (const auto& p : planners) {
    for (int id : scenario_ids) {
      require(id >= 0 && static_cast<std::size_t>(id) < tasks.scenarios.size(), "unknown scenario id");
      for (int t = 0; t < config.trials; ++t) {
        EvalRow r;
        r.planner = p.name;
        r.scenario = id;
        r.trial = t;
        r.seed = query_seed(config.seed, id, t);
        const SpaceKind kind = tasks.scenarios[static_cast<std::size_t>(id)].space.kind();
        r.max_samples = config.max_samples > 0
                            ? config.max_samples
                            : default_max_samples(kind, p.kind == PlannerKind::UniformRrtStar);
        rows.push_back(std::move(r));
      }
    }
  }
  std::vector<std::size_t> spec_of(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    spec_of[i] = i / (scenario_ids.size() * static_cast<std::size_t>(config.trials));
  }
  parallel_for(rows.size(), config.threads, [&](std::size_t i) {
    EvalRow& r = rows[i];
    const PlannerSpec& spec = planners[spec_of[i]];
    PlannerConfig pc = config.planner;
    pc.max_samples = r.max_samples;
    Rng rng(r.seed);
    const auto sid = static_cast<std::size_t>(r.scenario);
    r.result = plan_once(spec, tasks.scenarios[sid], &tasks.cloud_for(sid), pc, rng);
  });
  return rows;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m;
}

std::vector<EvalSummary> summarize(const std::vector<EvalRow>& rows, const std::string& env, int trials,
                                   const std::string& preset) {
  std::vector<EvalSummary> out;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.planner) == order.end()) order.push_back(r.planner);
  }
  for (const auto& name : order) {
    EvalSummary s;
    s.planner = name;
    s.env = env;
    s.trials = trials;
    s.preset = preset;
    std::vector<double> samples, lengths, times;
    for (const auto& r : rows) {
      if (r.planner != name) continue;
      ++s.queries;
      if (!r.result.success) continue;
      ++s.successes;
      samples.push_back(r.result.samples_generated);
      lengths.push_back(r.result.path_length);
      times.push_back(r.result.wall_time);
    }
    s.success_rate = s.queries == 0 ? 0.0 : 100.0 * s.successes / s.queries;
    s.samples = mean_std(samples);
    s.path_length = mean_std(lengths);
    s.time = mean_std(times);
    out.push_back(std::move(s));
  }
  return out;
}

std::string eval_rows_csv(const std::vector<EvalRow>& rows) {
  std::string out =
      "planner,scenario,trial,seed,max_samples,success,samples_generated,path_length,collision_checks,attempts,"
      "wall_time\n";
  for (const auto& r : rows) {
    out += r.planner + "," + std::to_string(r.scenario) + "," + std::to_string(r.trial) + "," + std::to_string(r.seed) +
           "," + std::to_string(r.max_samples) + "," + (r.result.success ? "1" : "0") + "," +
           std::to_string(r.result.samples_generated) + "," + format_double(r.result.path_length) + "," +
           std::to_string(r.result.collision_checks) + "," + std::to_string(r.result.attempts) + "," +
           format_double(r.result.wall_time) + "\n";
  }
  return out;
}

std::string eval_summary_csv(const std::vector<EvalSummary>& summary) {
  std::string out =
      "planner,env,preset,population,trials,queries,successes,success_rate,samples_mean,samples_std,"
      "path_length_mean,path_length_std,wall_time_mean,wall_time_std\n";
  for (const auto& s : summary) {
    out += s.planner + "," + s.env + "," + s.preset + "," + s.population + "," + std::to_string(s.trials) + "," +
           std::to_string(s.queries) + "," + std::to_string(s.successes) + "," + format_double(s.success_rate) + "," +
           format_double(s.samples.mean) + "," + format_double(s.samples.std) + "," +
           format_double(s.path_length.mean) + "," + format_double(s.path_length.std) + "," +
           format_double(s.time.mean) + "," + format_double(s.time.std) + "\n";
  }
  return out;
}

namespace {

constexpr double kPxPerUnit = 20.0;
constexpr double kMargin = 10.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// One axis-pair view of the workspace placed at horizontal offset `x0`.
struct View {
  int ax = 0;
  int ay = 1;
  double x0 = 0.0;
  Interval bx, by;

  double px(double x) const { return x0 + kMargin + (x - bx.lo) * kPxPerUnit; }
  double py(double y) const { return kMargin + (by.hi - y) * kPxPerUnit; }
  double width() const { return bx.width() * kPxPerUnit + 2 * kMargin; }
  double height() const { return by.width() * kPxPerUnit + 2 * kMargin; }
  std::string pt(std::span<const double> s) const {
    return fmt(px(s[static_cast<std::size_t>(ax)])) + "," + fmt(py(s[static_cast<std::size_t>(ay)]));
  }
};

void draw_view(std::string& out, const View& v, const Scenario& scn, const PointCloud* cloud, const PlanResult* r) {
  out += "<g class=\"view\">\n";
  out += "<rect class=\"bounds\" x=\"" + fmt(v.px(v.bx.lo)) + "\" y=\"" + fmt(v.py(v.by.hi)) + "\" width=\"" +
         fmt(v.bx.width() * kPxPerUnit) + "\" height=\"" + fmt(v.by.width() * kPxPerUnit) +
         "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const auto& o : scn.workspace.obstacles) {
    const auto ax = static_cast<std::size_t>(v.ax);
    const auto ay = static_cast<std::size_t>(v.ay);
    out += "<rect class=\"obstacle\" x=\"" + fmt(v.px(o.center[ax] - o.half_extents[ax])) + "\" y=\"" +
           fmt(v.py(o.center[ay] + o.half_extents[ay])) + "\" width=\"" + fmt(2 * o.half_extents[ax] * kPxPerUnit) +
           "\" height=\"" + fmt(2 * o.half_extents[ay] * kPxPerUnit) + "\" fill=\"#888\" fill-opacity=\"0.6\"/>\n";
  }
  if (cloud != nullptr && !scn.workspace.obstacles.empty()) {
    for (std::size_t i = 0; i < cloud->size(); ++i) {
      auto p = cloud->point(i);
      out += "<circle class=\"cloud\" cx=\"" + fmt(v.px(p[static_cast<std::size_t>(v.ax)])) + "\" cy=\"" +
             fmt(v.py(p[static_cast<std::size_t>(v.ay)])) + "\" r=\"1\" fill=\"#c33\"/>\n";
    }
  }
  if (r != nullptr) {
    for (const auto& tree : r->trees) {
      for (std::size_t i = 1; i < tree.size(); ++i) {
        const auto& n = tree.node(static_cast<int>(i));
        const auto& p = tree.node(n.parent).state;
        const auto a = v.pt(p.coords()), b = v.pt(n.state.coords());
        const auto ca = a.find(','), cb = b.find(',');
        out += "<line class=\"edge\" x1=\"" + a.substr(0, ca) + "\" y1=\"" + a.substr(ca + 1) + "\" x2=\"" +
               b.substr(0, cb) + "\" y2=\"" + b.substr(cb + 1) + "\" stroke=\"#36c\" stroke-width=\"0.7\"/>\n";
      }
    }
    if (r->success && !r->path.empty()) {
      if (scn.agent.kind != AgentKind::PointMass) {
        for (const auto& s : r->path) {
          for (const auto& rect : agent_footprint(scn, s)) {
            std::string pts;
            for (const auto& c : rect.corners()) pts += (pts.empty() ? "" : " ") + v.pt(c);
            out += "<polygon class=\"agent\" points=\"" + pts + "\" fill=\"#3a3\" fill-opacity=\"0.25\"/>\n";
          }
        }
      }
      std::string pts;
      for (const auto& s : r->path) pts += (pts.empty() ? "" : " ") + v.pt(s.coords());
      out += "<polyline class=\"path\" points=\"" + pts + "\" fill=\"none\" stroke=\"#e80\" stroke-width=\"2.5\"/>\n";
    }
  }
  const double rad = scn.goal_radius * kPxPerUnit;
  out += "<circle class=\"goal-region\" cx=\"" + fmt(v.px(scn.goal[static_cast<std::size_t>(v.ax)])) + "\" cy=\"" +
         fmt(v.py(scn.goal[static_cast<std::size_t>(v.ay)])) + "\" r=\"" + fmt(rad) +
         "\" fill=\"none\" stroke=\"#0a0\" stroke-width=\"1.5\"/>\n";
  out += "<circle class=\"start\" cx=\"" + fmt(v.px(scn.start[static_cast<std::size_t>(v.ax)])) + "\" cy=\"" +
         fmt(v.py(scn.start[static_cast<std::size_t>(v.ay)])) + "\" r=\"4\" fill=\"#00c\"/>\n";
  out += "<circle class=\"goal\" cx=\"" + fmt(v.px(scn.goal[static_cast<std::size_t>(v.ax)])) + "\" cy=\"" +
         fmt(v.py(scn.goal[static_cast<std::size_t>(v.ay)])) + "\" r=\"4\" fill=\"#0a0\"/>\n";
  out += "</g>\n";
}

}  // namespace

std::string render_svg(const Scenario& scn, const PlanResult* result, bool draw_cloud) {
  const int amb = scn.space.ambient_dim();
  if (amb != scn.workspace.dim() || (amb != 2 && amb != 3)) throw UnsupportedError("cannot render this workspace");
  if (result != nullptr) {
    for (const auto& s : result->path) {
      if (s.size() != static_cast<std::size_t>(scn.space.dim())) throw UnsupportedError("result does not match scenario");
    }
    for (const auto& t : result->trees) {
      if (t.node(0).state.size() != static_cast<std::size_t>(scn.space.dim())) {
        throw UnsupportedError("result trees do not match scenario");
      }
    }
  }
  std::vector<View> views;
  const auto& b = scn.workspace.bounds;
  if (amb == 2) {
    views.push_back({0, 1, 0.0, b[0], b[1]});
  } else {
    views.push_back({0, 1, 0.0, b[0], b[1]});
    views.push_back({0, 2, 0.0, b[0], b[2]});
    views.push_back({1, 2, 0.0, b[1], b[2]});
  }
  double x = 0.0, h = 0.0;
  for (auto& v : views) {
    v.x0 = x;
    x += v.width();
    h = std::max(h, v.height());
  }
  std::optional<PointCloud> cloud;
  if (draw_cloud) cloud = workspace_point_cloud(scn.workspace);
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(x) + "\" height=\"" + fmt(h) +
                    "\" viewBox=\"0 0 " + fmt(x) + " " + fmt(h) + "\">\n";
  for (const auto& v : views) draw_view(out, v, scn, cloud ? &*cloud : nullptr, result);
  out += "</svg>\n";
  return out;
}

}  // namespace silrrt
