#include "silrrt/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "silrrt/error.hpp"

namespace silrrt {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (!std::isfinite(v)) throw FormatError("cannot serialise a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace {

void dump_to(std::string& out, const Json& j, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(k).dump();
        out += indent < 0 ? ":" : ": ";
        dump_to(out, v, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += flat && indent >= 0 ? ", " : ",";
        if (!flat) newline(depth + 1);
        dump_to(out, j[i], indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: out += format_double(j.get<double>()); return;
    default: out += j.dump(); return;
  }
}

double num(const Json& j, const char* what) {
  if (!j.is_number()) throw FormatError(std::string(what) + " must be a number");
  return j.get<double>();
}

std::vector<double> num_array(const Json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(num(e, what));
  return out;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j.at(key);
}

using Setter = std::function<void(const Json&)>;

void apply_fields(const Json& j, const std::map<std::string, Setter>& setters, const char* what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    auto it = setters.find(k);
    if (it == setters.end()) throw FormatError(std::string("unknown ") + what + " config key '" + k + "'");
    try {
      it->second(v);
    } catch (const nlohmann::json::exception&) {
      throw FormatError(std::string(what) + " config key '" + k + "' has the wrong type");
    }
  }
}

Setter set_int(int& dst) {
  return [&dst](const Json& v) {
    if (!v.is_number_integer()) throw FormatError("expected an integer");
    dst = v.get<int>();
  };
}
Setter set_double(double& dst) {
  return [&dst](const Json& v) { dst = num(v, "value"); };
}
Setter set_bool(bool& dst) {
  return [&dst](const Json& v) {
    if (!v.is_boolean()) throw FormatError("expected a boolean");
    dst = v.get<bool>();
  };
}
Setter set_u64(std::uint64_t& dst) {
  return [&dst](const Json& v) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw FormatError("expected a non-negative integer");
    }
    dst = v.get<std::uint64_t>();
  };
}

Json adam_json(const ad::AdamConfig& a) {
  return Json{{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}
Setter set_adam(ad::AdamConfig& a) {
  return [&a](const Json& v) {
    apply_fields(v, {{"lr", set_double(a.lr)}, {"beta1", set_double(a.beta1)}, {"beta2", set_double(a.beta2)},
                     {"eps", set_double(a.eps)}},
                 "adam");
  };
}

std::string agent_kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::PointMass: return "point_mass";
    case AgentKind::Rectangle: return "rectangle";
    case AgentKind::SnakeLinks: return "snake";
  }
  return "point_mass";
}

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump_to(out, j, indent, 0);
  if (indent >= 0) out += '\n';
  return out;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

Json state_to_json(const State& s) {
  Json a = Json::array();
  for (double c : s.coords()) a.push_back(c);
  return a;
}

State state_from_json(const Json& j) { return State(num_array(j, "state")); }

Json path_to_json(const std::vector<State>& path) {
  Json a = Json::array();
  for (const auto& s : path) a.push_back(state_to_json(s));
  return a;
}

std::vector<State> path_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("path must be an array of states");
  std::vector<State> out;
  for (const auto& s : j) out.push_back(state_from_json(s));
  return out;
}

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["space"] = std::string(to_string(s.space.kind()));
  Json bounds = Json::array();
  for (const auto& iv : s.workspace.bounds) bounds.push_back(Json::array({iv.lo, iv.hi}));
  j["bounds"] = std::move(bounds);
  Json obstacles = Json::array();
  for (const auto& o : s.workspace.obstacles) {
    obstacles.push_back(Json{{"center", o.center}, {"half_extents", o.half_extents}});
  }
  j["obstacles"] = std::move(obstacles);
  Json agent{{"kind", agent_kind_name(s.agent.kind)}};
  if (s.agent.kind == AgentKind::Rectangle) {
    agent["half_w"] = s.agent.half_w;
    agent["half_h"] = s.agent.half_h;
  } else if (s.agent.kind == AgentKind::SnakeLinks) {
    agent["link_length"] = s.agent.link_length;
    agent["half_widths"] = s.agent.link_half_widths;
  }
  j["agent"] = std::move(agent);
  j["start"] = state_to_json(s.start);
  j["goal"] = state_to_json(s.goal);
  j["goal_radius"] = s.goal_radius;
  j["seed"] = s.seed;
  j["angular_weight"] = s.space.angular_weight();
  return j;
}

Scenario scenario_from_json(const Json& j) {
  try {
    const SpaceKind kind = space_kind_from_string(field(j, "space").get<std::string>());
    Workspace ws;
    for (const auto& b : field(j, "bounds")) {
      auto v = num_array(b, "bounds");
      if (v.size() != 2 || !(v[0] < v[1])) throw FormatError("each bound must be an ordered [lo, hi] pair");
      ws.bounds.push_back({v[0], v[1]});
    }
    for (const auto& o : field(j, "obstacles")) {
      Obstacle ob{num_array(field(o, "center"), "center"), num_array(field(o, "half_extents"), "half_extents")};
      if (ob.center.size() != ws.bounds.size() || ob.half_extents.size() != ws.bounds.size()) {
        throw FormatError("obstacle dimension does not match bounds");
      }
      ws.obstacles.push_back(std::move(ob));
    }
    const Json& a = field(j, "agent");
    const std::string ak = field(a, "kind").get<std::string>();
    AgentGeometry agent;
    if (ak == "point_mass") {
      agent = AgentGeometry::point_mass();
    } else if (ak == "rectangle") {
      agent = AgentGeometry::rectangle(num(field(a, "half_w"), "half_w"), num(field(a, "half_h"), "half_h"));
    } else if (ak == "snake") {
      agent = AgentGeometry::snake(num(field(a, "link_length"), "link_length"), 1.0);
      auto hw = num_array(field(a, "half_widths"), "half_widths");
      if (hw.size() != 3) throw FormatError("snake agent needs three link half widths");
      std::copy(hw.begin(), hw.end(), agent.link_half_widths.begin());
    } else {
      throw FormatError("unknown agent kind '" + ak + "'");
    }
    const double aw = j.contains("angular_weight") ? num(j.at("angular_weight"), "angular_weight") : 1.0;
    const double radius = j.contains("goal_radius") ? num(j.at("goal_radius"), "goal_radius") : kDefaultGoalRadius;
    const std::uint64_t seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;
    return Scenario::make(std::move(ws), kind, agent, state_from_json(field(j, "start")),
                          state_from_json(field(j, "goal")), radius, seed, aw);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("invalid scenario: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scenario: ") + e.what());
  }
}

void save_scenario(const fs::path& path, const Scenario& s) { write_text_file(path, dump_json(scenario_to_json(s))); }

std::vector<Scenario> load_scenarios(const fs::path& path) {
  std::vector<Scenario> out;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto part = load_scenarios(f);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  Json j = read_json_file(path);
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(scenario_from_json(e));
  } else {
    out.push_back(scenario_from_json(j));
  }
  return out;
}

Json plan_result_to_json(const PlanResult& r, bool include_trees) {
  Json j;
  j["success"] = r.success;
  j["path"] = path_to_json(r.path);
  j["path_length"] = r.path_length;
  j["samples_generated"] = r.samples_generated;
  j["collision_checks"] = r.collision_checks;
  j["attempts"] = r.attempts;
  j["wall_time"] = r.wall_time;
  if (include_trees) {
    Json trees = Json::array();
    for (const auto& t : r.trees) {
      Json nodes = Json::array();
      for (const auto& n : t.nodes()) nodes.push_back(Json{{"state", state_to_json(n.state)}, {"parent", n.parent}});
      trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
  }
  return j;
}

PlanResult plan_result_from_json(const Json& j) {
  try {
    PlanResult r;
    r.success = field(j, "success").get<bool>();
    r.path = path_from_json(field(j, "path"));
    r.path_length = num(field(j, "path_length"), "path_length");
    r.samples_generated = field(j, "samples_generated").get<int>();
    r.collision_checks = j.value("collision_checks", 0LL);
    r.attempts = j.value("attempts", 0);
    r.wall_time = j.contains("wall_time") ? num(j.at("wall_time"), "wall_time") : 0.0;
    if (j.contains("trees")) {
      for (const auto& nodes : j.at("trees")) {
        if (!nodes.is_array() || nodes.empty()) throw FormatError("tree must be a non-empty node array");
        Tree t(state_from_json(field(nodes[0], "state")));
        for (std::size_t i = 1; i < nodes.size(); ++i) {
          const int parent = field(nodes[i], "parent").get<int>();
          if (parent < 0 || static_cast<std::size_t>(parent) >= i) throw FormatError("tree parent must precede its child");
          t.add(state_from_json(field(nodes[i], "state")), parent, 0.0);
        }
        r.trees.push_back(std::move(t));
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed plan result: ") + e.what());
  }
}

Json to_json(const PlannerConfig& c) {
  return Json{{"max_samples", c.max_samples},   {"step_size", c.step_size},
              {"gamma_rewire", c.gamma_rewire}, {"goal_bias", c.goal_bias},
              {"collision_step", c.collision_step}, {"refine", c.refine}};
}

PlannerConfig planner_config_from_json(const Json& j, PlannerConfig c) {
  apply_fields(j,
               {{"max_samples", set_int(c.max_samples)},
                {"step_size", set_double(c.step_size)},
                {"gamma_rewire", set_double(c.gamma_rewire)},
                {"goal_bias", set_double(c.goal_bias)},
                {"collision_step", set_double(c.collision_step)},
                {"refine", set_bool(c.refine)},
                {"audit", set_bool(c.audit)}},
               "planner");
  c.validate();
  return c;
}

Json to_json(const SamplerConfig& c) {
  return Json{{"d_model", c.d_model},
              {"latent_len", c.latent_len},
              {"n_heads", c.n_heads},
              {"encoder_self_layers", c.encoder_self_layers},
              {"decoder_self_layers", c.decoder_self_layers},
              {"context_window", c.context_window},
              {"state_dim", c.state_dim},
              {"point_dim", c.point_dim},
              {"mlp_ratio", c.mlp_ratio},
              {"predict_delta", c.predict_delta}};
}

SamplerConfig sampler_config_from_json(const Json& j, SamplerConfig c) {
  apply_fields(j,
               {{"d_model", set_int(c.d_model)},
                {"latent_len", set_int(c.latent_len)},
                {"n_heads", set_int(c.n_heads)},
                {"encoder_self_layers", set_int(c.encoder_self_layers)},
                {"decoder_self_layers", set_int(c.decoder_self_layers)},
                {"context_window", set_int(c.context_window)},
                {"state_dim", set_int(c.state_dim)},
                {"point_dim", set_int(c.point_dim)},
                {"mlp_ratio", set_int(c.mlp_ratio)},
                {"predict_delta", set_bool(c.predict_delta)}},
               "sampler");
  c.validate();
  return c;
}

Json to_json(const EstimatorConfig& c) {
  return Json{{"d_model", c.d_model},     {"latent_len", c.latent_len},
              {"n_heads", c.n_heads},     {"encoder_self_layers", c.encoder_self_layers},
              {"state_dim", c.state_dim}, {"point_dim", c.point_dim},
              {"mlp_ratio", c.mlp_ratio}, {"length_scale", c.length_scale}};
}

EstimatorConfig estimator_config_from_json(const Json& j, EstimatorConfig c) {
  apply_fields(j,
               {{"d_model", set_int(c.d_model)},
                {"latent_len", set_int(c.latent_len)},
                {"n_heads", set_int(c.n_heads)},
                {"encoder_self_layers", set_int(c.encoder_self_layers)},
                {"state_dim", set_int(c.state_dim)},
                {"point_dim", set_int(c.point_dim)},
                {"mlp_ratio", set_int(c.mlp_ratio)},
                {"length_scale", set_double(c.length_scale)}},
               "estimator");
  c.validate();
  return c;
}

Json to_json(const PretrainConfig& c) {
  return Json{{"iterations", c.iterations}, {"batch_size", c.batch_size},     {"adam", adam_json(c.adam)},
              {"clip_norm", c.clip_norm},   {"reverse_prob", c.reverse_prob}, {"seed", c.seed}};
}

PretrainConfig pretrain_config_from_json(const Json& j, PretrainConfig c) {
  apply_fields(j,
               {{"iterations", set_int(c.iterations)},
                {"batch_size", set_int(c.batch_size)},
                {"adam", set_adam(c.adam)},
                {"clip_norm", set_double(c.clip_norm)},
                {"reverse_prob", set_double(c.reverse_prob)},
                {"seed", set_u64(c.seed)}},
               "pretrain");
  return c;
}

Json to_json(const WsilConfig& c) {
  return Json{{"iterations", c.iterations},
              {"K0", c.K0},
              {"mu_K", c.mu_K},
              {"anneal_every", c.anneal_every},
              {"lambda_entropy", c.lambda_entropy},
              {"batch_size", c.batch_size},
              {"buffer_capacity", c.buffer_capacity},
              {"epsilon_start", c.epsilon_start},
              {"epsilon_end", c.epsilon_end},
              {"epsilon_decay_fraction", c.epsilon_decay_fraction},
              {"sampler_adam", adam_json(c.sampler_adam)},
              {"estimator_adam", adam_json(c.estimator_adam)},
              {"use_sgd", c.use_sgd},
              {"sgd_lr", c.sgd_lr},
              {"clip_norm", c.clip_norm},
              {"reverse_prob", c.reverse_prob}};
}

WsilConfig wsil_config_from_json(const Json& j, WsilConfig c) {
  int capacity = static_cast<int>(c.buffer_capacity);
  apply_fields(j,
               {{"iterations", set_int(c.iterations)},
                {"K0", set_double(c.K0)},
                {"mu_K", set_double(c.mu_K)},
                {"anneal_every", set_int(c.anneal_every)},
                {"lambda_entropy", set_double(c.lambda_entropy)},
                {"batch_size", set_int(c.batch_size)},
                {"buffer_capacity", set_int(capacity)},
                {"epsilon_start", set_double(c.epsilon_start)},
                {"epsilon_end", set_double(c.epsilon_end)},
                {"epsilon_decay_fraction", set_double(c.epsilon_decay_fraction)},
                {"sampler_adam", set_adam(c.sampler_adam)},
                {"estimator_adam", set_adam(c.estimator_adam)},
                {"use_sgd", set_bool(c.use_sgd)},
                {"sgd_lr", set_double(c.sgd_lr)},
                {"clip_norm", set_double(c.clip_norm)},
                {"reverse_prob", set_double(c.reverse_prob)}},
               "wsil");
  if (capacity < 1) throw FormatError("buffer_capacity must be at least 1");
  c.buffer_capacity = static_cast<std::size_t>(capacity);
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw FormatError(e.what());
  }
  return c;
}

Json record_to_json(const DemonstrationRecord& r) {
  return Json{{"scenario_id", r.scenario_id},
              {"source", std::string(to_string(r.source))},
              {"c_real", r.c_real},
              {"path", path_to_json(r.path)}};
}

DemonstrationRecord record_from_json(const Json& j) {
  DemonstrationRecord r;
  r.scenario_id = field(j, "scenario_id").get<int>();
  r.source = record_source_from_string(field(j, "source").get<std::string>());
  r.c_real = num(field(j, "c_real"), "c_real");
  r.path = path_from_json(field(j, "path"));
  return r;
}

void save_buffer(const fs::path& path, const ReplayBuffer& buffer) {
  Json records = Json::array();
  for (const auto& r : buffer.records()) records.push_back(record_to_json(r));
  write_text_file(path, dump_json(Json{{"capacity", buffer.capacity()}, {"records", std::move(records)}}));
}

void load_buffer(const fs::path& path, ReplayBuffer& buffer) {
  Json j = read_json_file(path);
  try {
    for (const auto& r : field(j, "records")) buffer.push(record_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed buffer dump: ") + e.what());
  }
}

std::string to_csv(const std::vector<PretrainLogRow>& log) {
  std::string out = "iteration,loss,grad_norm\n";
  for (const auto& r : log) {
    out += std::to_string(r.iteration) + "," + format_double(r.loss) + "," + format_double(r.grad_norm) + "\n";
  }
  return out;
}

std::string csv_header(const WsilLogRow&) {
  return "iteration,epsilon,K,buffer_len,success,mean_weight,min_weight,max_weight,sampler_loss,estimator_loss,planner,skipped_update\n";
}

std::string to_csv_row(const WsilLogRow& r) {
  return std::to_string(r.iteration) + "," + format_double(r.epsilon) + "," + format_double(r.K) + "," +
         std::to_string(r.buffer_len) + "," + (r.success ? "1" : "0") + "," + format_double(r.mean_weight) + "," +
         format_double(r.min_weight) + "," + format_double(r.max_weight) + "," +
         format_double(r.sampler_loss) + "," + format_double(r.estimator_loss) + "," +
         (r.learned_planner ? "silrrt" : "rrt") + "," + (r.skipped_update ? "1" : "0") + "\n";
}

}  // namespace silrrt
