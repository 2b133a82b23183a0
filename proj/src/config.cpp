#include "mmrelay/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>

namespace mmrelay {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void optional_field(const json& j, const char* key, const std::string& where, T& out) {
  if (j.contains(key)) out = field<T>(j, key, where);
}

NodeLocation parse_location(const json& j, const std::string& where) {
  check_keys(j, {"segment", "offset"}, where);
  return {field<int>(j, "segment", where), field<double>(j, "offset", where)};
}

TopologySpec parse_topology(const json& j) {
  const std::string where = "topology";
  check_keys(j, {"intersections", "segments", "clusters", "source", "destination"}, where);
  TopologySpec spec;
  for (const auto& e : field<json>(j, "intersections", where)) {
    const std::string w = where + ".intersections[]";
    check_keys(e, {"id", "x", "y"}, w);
    spec.intersections.push_back({field<int>(e, "id", w), field<double>(e, "x", w), field<double>(e, "y", w)});
  }
  for (const auto& e : field<json>(j, "segments", where)) {
    const std::string w = where + ".segments[]";
    check_keys(e, {"id", "a", "b"}, w);
    spec.segments.push_back({field<int>(e, "id", w), field<int>(e, "a", w), field<int>(e, "b", w)});
  }
  if (j.contains("clusters")) {
    for (const auto& e : field<json>(j, "clusters", where)) {
      const std::string w = where + ".clusters[]";
      check_keys(e, {"id", "segment", "delta"}, w);
      spec.clusters.push_back({field<int>(e, "id", w), field<int>(e, "segment", w), field<int>(e, "delta", w)});
    }
  }
  spec.source = parse_location(field<json>(j, "source", where), where + ".source");
  spec.destination = parse_location(field<json>(j, "destination", where), where + ".destination");
  return spec;
}

ChannelParams parse_channel(const json& j) {
  const std::string where = "channel";
  check_keys(j, {"alpha_l", "alpha_n", "delta_db", "eta2", "gamma", "beta_m", "sigma_xi2", "sigma2",
                 "sigma_d2", "ps_dbm", "pc_dbm", "n_t"},
             where);
  ChannelParams p;
  optional_field(j, "alpha_l", where, p.alpha_l);
  optional_field(j, "alpha_n", where, p.alpha_n);
  optional_field(j, "delta_db", where, p.delta_db);
  optional_field(j, "eta2", where, p.eta2);
  optional_field(j, "gamma", where, p.gamma);
  optional_field(j, "beta_m", where, p.beta_m);
  optional_field(j, "sigma_xi2", where, p.sigma_xi2);
  optional_field(j, "sigma2", where, p.sigma2);
  optional_field(j, "sigma_d2", where, p.sigma_d2);
  optional_field(j, "ps_dbm", where, p.ps_dbm);
  optional_field(j, "pc_dbm", where, p.pc_dbm);
  optional_field(j, "n_t", where, p.n_t);
  return p;
}

void parse_experiment(const json& j, ExperimentConfig& c) {
  const std::string where = "experiment";
  check_keys(j, {"scenarios", "trials", "window", "policies", "seed", "threads", "selection_period",
                 "averaging", "share_scenarios", "out_dir"},
             where);
  optional_field(j, "scenarios", where, c.scenarios);
  optional_field(j, "trials", where, c.trials);
  if (j.contains("window")) {
    const json& w = j.at("window");
    if (w.is_string() && w.get<std::string>() == "inf") {
      c.window = 0;
    } else if (w.is_number_integer() && w.get<long long>() >= 0) {
      c.window = w.get<std::size_t>();
    } else {
      throw ConfigError("experiment.window: expected a non-negative integer or \"inf\"");
    }
  }
  if (j.contains("policies")) {
    c.policies.clear();
    for (const auto& name : field<std::vector<std::string>>(j, "policies", where)) {
      c.policies.push_back(parse_policy(name));
    }
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("experiment.seed: expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  optional_field(j, "threads", where, c.threads);
  optional_field(j, "selection_period", where, c.selection_period);
  if (j.contains("averaging")) {
    const auto a = field<std::string>(j, "averaging", where);
    if (a == "linear") {
      c.averaging = Averaging::linear;
    } else if (a == "db") {
      c.averaging = Averaging::db;
    } else {
      throw ConfigError("experiment.averaging: expected \"linear\" or \"db\"");
    }
  }
  optional_field(j, "share_scenarios", where, c.share_scenarios);
  optional_field(j, "out_dir", where, c.out_dir);
}

}  // namespace

void ExperimentConfig::validate() const {
  channel.validate();
  if (scenarios < 1) throw ConfigError("experiment.scenarios must be >= 1");
  if (trials < 1) throw ConfigError("experiment.trials must be >= 1");
  if (threads < 0) throw ConfigError("experiment.threads must be >= 0");
  if (selection_period < 1) throw ConfigError("experiment.selection_period must be >= 1");
  if (policies.empty()) throw ConfigError("experiment.policies must not be empty");
  std::set<Policy> seen(policies.begin(), policies.end());
  if (seen.size() != policies.size()) throw ConfigError("experiment.policies lists a policy twice");
  if (topology.clusters.empty()) throw ConfigError("topology.clusters must not be empty");
}

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, {"topology", "channel", "experiment"}, "config");
  ExperimentConfig c;
  c.topology = parse_topology(field<json>(doc, "topology", "config"));
  if (doc.contains("channel")) c.channel = parse_channel(doc.at("channel"));
  if (doc.contains("experiment")) parse_experiment(doc.at("experiment"), c);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json topology_to_json(const TopologySpec& spec) {
  json j;
  j["intersections"] = json::array();
  for (const auto& i : spec.intersections) j["intersections"].push_back({{"id", i.id}, {"x", i.x}, {"y", i.y}});
  j["segments"] = json::array();
  for (const auto& s : spec.segments) j["segments"].push_back({{"id", s.id}, {"a", s.a}, {"b", s.b}});
  j["clusters"] = json::array();
  for (const auto& c : spec.clusters) {
    j["clusters"].push_back({{"id", c.id}, {"segment", c.segment}, {"delta", c.delta}});
  }
  j["source"] = {{"segment", spec.source.segment}, {"offset", spec.source.offset}};
  j["destination"] = {{"segment", spec.destination.segment}, {"offset", spec.destination.offset}};
  return j;
}

json to_json(const ExperimentConfig& c) {
  const ChannelParams& p = c.channel;
  json channel = {{"alpha_l", p.alpha_l},   {"alpha_n", p.alpha_n},     {"delta_db", p.delta_db},
                  {"eta2", p.eta2},         {"gamma", p.gamma},         {"beta_m", p.beta_m},
                  {"sigma_xi2", p.sigma_xi2}, {"sigma2", p.sigma2},     {"sigma_d2", p.sigma_d2},
                  {"ps_dbm", p.ps_dbm},     {"pc_dbm", p.pc_dbm},       {"n_t", p.n_t}};
  json policies = json::array();
  for (Policy pol : c.policies) policies.push_back(std::string(policy_name(pol)));
  json experiment = {{"scenarios", c.scenarios},
                     {"trials", c.trials},
                     {"policies", policies},
                     {"seed", c.seed},
                     {"threads", c.threads},
                     {"selection_period", c.selection_period},
                     {"averaging", c.averaging == Averaging::linear ? "linear" : "db"},
                     {"share_scenarios", c.share_scenarios},
                     {"out_dir", c.out_dir}};
  if (c.window == 0) {
    experiment["window"] = "inf";
  } else {
    experiment["window"] = c.window;
  }
  return {{"topology", topology_to_json(c.topology)}, {"channel", channel}, {"experiment", experiment}};
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  // Output location and thread count do not change results.
  j["experiment"].erase("out_dir");
  j["experiment"].erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mmrelay
