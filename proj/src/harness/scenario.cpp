#include "georep/harness/scenario.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace georep::harness {

using json = nlohmann::json;

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Spider: return "spider";
    case Mode::FlatBft: return "flat-bft";
    case Mode::Oracle: return "oracle";
  }
  return "?";
}

std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "spider") return Mode::Spider;
  if (s == "flat-bft") return Mode::FlatBft;
  if (s == "oracle") return Mode::Oracle;
  return std::nullopt;
}

std::optional<irmc::Variant> parse_variant(const std::string& s) {
  if (s == "rc") return irmc::Variant::Rc;
  if (s == "sc") return irmc::Variant::Sc;
  return std::nullopt;
}

namespace {

constexpr std::pair<Behavior, const char*> kBehaviors[] = {
    {Behavior::Crash, "crash"},
    {Behavior::Partition, "partition"},
    {Behavior::Withhold, "withhold"},
    {Behavior::Equivocate, "equivocate-send"},
    {Behavior::Garbage, "garbage-inject"},
    {Behavior::LyingCollector, "lying-collector"},
    {Behavior::EquivocatingClient, "equivocating-client"},
};

constexpr std::pair<Target, const char*> kTargets[] = {
    {Target::Agreement, "agreement"},
    {Target::Group, "group"},
    {Target::Client, "client"},
    {Target::Zone, "zone"},
};

const char* target_name(Target t) {
  for (const auto& [v, n] : kTargets) {
    if (v == t) return n;
  }
  return "?";
}

// Collects field errors while reading a JSON object.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& errors) : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) error(path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      error(field(key), "wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    T v{};
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      v = j_.at(key).get<T>();
      out = v;
    } catch (const json::exception&) {
      error(field(key), "wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key);
  }
  const json& at(const char* key) { return j_.at(key); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void error(const std::string& f, const std::string& what) { errors_.push_back(f + ": " + what); }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) error(field(k), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void read_topology(const json& j, Topology& topo, std::vector<std::string>& errors) {
  Reader r(j, "topology", errors);
  std::vector<std::string> regions;
  r.get("regions", regions);
  Topology t;
  for (const auto& name : regions) {
    if (t.has_region(name)) {
      r.error("topology.regions", "duplicate region " + name);
      continue;
    }
    t.add_region(name);
  }
  if (r.has("delays_ms")) {
    const json& d = r.at("delays_ms");
    if (!d.is_array()) {
      r.error("topology.delays_ms", "expected a list of [a, b, ms]");
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) {
        const std::string f = "topology.delays_ms[" + std::to_string(i) + "]";
        const json& e = d[i];
        if (!e.is_array() || e.size() != 3 || !e[0].is_string() || !e[1].is_string() || !e[2].is_number()) {
          r.error(f, "expected [region, region, ms]");
          continue;
        }
        const auto a = e[0].get<std::string>(), b = e[1].get<std::string>();
        if (!t.has_region(a) || !t.has_region(b)) {
          r.error(f, "unknown region");
          continue;
        }
        t.set_delay(a, b, e[2].get<double>());
      }
    }
  }
  double inter = t.inter_zone_ms(), intra = t.intra_zone_ms(), jitter = 0;
  r.get("inter_zone_ms", inter);
  r.get("intra_zone_ms", intra);
  r.get("jitter_ms", jitter);
  t.set_inter_zone(inter);
  t.set_intra_zone(intra);
  t.set_jitter(jitter);
  r.finish();
  topo = std::move(t);
}

template <typename Enum, std::size_t N>
void read_enum(Reader& r, const char* key, Enum& out, const std::pair<Enum, const char*> (&names)[N]) {
  std::optional<std::string> s;
  r.get(key, s);
  if (!s) return;
  for (const auto& [v, n] : names) {
    if (*s == n) {
      out = v;
      return;
    }
  }
  r.error(r.field(key), "unknown value '" + *s + "'");
}

}  // namespace

const char* action_name(Action a) { return a == Action::AddGroup ? "add-group" : "remove-group"; }

const char* behavior_name(Behavior b) {
  for (const auto& [v, n] : kBehaviors) {
    if (v == b) return n;
  }
  return "?";
}

std::optional<Behavior> parse_behavior(const std::string& s) {
  for (const auto& [v, n] : kBehaviors) {
    if (s == n) return v;
  }
  return std::nullopt;
}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> errors;
  auto err = [&errors](const std::string& f, const std::string& what) { errors.push_back(f + ": " + what); };
  for (const auto& e : cfg.topology.validate()) err("topology", e);
  auto region_ok = [&cfg](const std::string& r) { return cfg.topology.has_region(r); };
  if (cfg.f_a == 0) err("f_a", "must be at least 1");
  if (cfg.f_e == 0) err("f_e", "must be at least 1");
  if (!region_ok(cfg.agreement_region)) err("agreement_region", "unknown region '" + cfg.agreement_region + "'");
  if (cfg.groups.empty() && cfg.mode != Mode::FlatBft) err("groups", "at least one execution group");
  for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
    if (!region_ok(cfg.groups[i])) err("groups[" + std::to_string(i) + "]", "unknown region '" + cfg.groups[i] + "'");
  }
  for (std::size_t i = 0; i < cfg.flat_regions.size(); ++i) {
    if (!region_ok(cfg.flat_regions[i])) err("flat_regions[" + std::to_string(i) + "]", "unknown region");
  }
  if (!cfg.flat_regions.empty() && cfg.flat_regions.size() != 3 * cfg.f_a + 1) err("flat_regions", "needs 3f_a+1 entries");
  if (cfg.request_capacity == 0) err("irmc.request_capacity", "must be positive");
  if (cfg.commit_capacity <= cfg.k_e) err("irmc.commit_capacity", "must exceed k_e");
  if (cfg.k_a == 0) err("checkpoints.k_a", "must be positive");
  if (cfg.k_e == 0) err("checkpoints.k_e", "must be positive");
  if (cfg.window < cfg.k_a) err("checkpoints.window", "must be at least k_a");
  if (cfg.mode != Mode::FlatBft && cfg.z >= cfg.groups.size()) err("checkpoints.z", "must be below the number of execution groups");
  if (cfg.view_timeout_ms <= 0) err("view_timeout_ms", "must be positive");
  if (cfg.clients.empty()) err("clients", "at least one client");
  for (std::size_t i = 0; i < cfg.clients.size(); ++i) {
    const std::string f = "clients[" + std::to_string(i) + "]";
    if (!region_ok(cfg.clients[i].region)) err(f + ".region", "unknown region '" + cfg.clients[i].region + "'");
  }
  const auto& w = cfg.workload;
  if (w.write < 0 || w.append < 0 || w.strong_read < 0 || w.weak_read < 0 ||
      w.write + w.append + w.strong_read + w.weak_read <= 0) {
    err("workload", "operation fractions must be non-negative and not all zero");
  }
  if (w.rate <= 0) err("workload.rate", "must be positive");
  if (w.keys == 0) err("workload.keys", "must be positive");
  if (cfg.duration_ms <= 0) err("duration_ms", "must be positive");
  if (cfg.drain_ms < 0) err("drain_ms", "must not be negative");
  if (cfg.wan_loss < 0 || cfg.wan_loss >= 1) err("wan_loss", "must be in [0, 1)");

  std::size_t client_count = 0;
  for (const auto& c : cfg.clients) client_count += c.count;
  std::map<std::uint32_t, std::set<std::uint32_t>> faulty_exec_all;
  std::set<std::uint32_t> faulty_agreement_all;
  const std::size_t n_groups = cfg.groups.size();
  for (std::size_t i = 0; i < cfg.faults.size(); ++i) {
    const auto& f = cfg.faults[i];
    const std::string p = "fault_plan[" + std::to_string(i) + "]";
    if (f.at_ms < 0) err(p + ".at_ms", "must not be negative");
    if (f.until_ms && *f.until_ms <= f.at_ms) err(p + ".until_ms", "must follow at_ms");
    if (f.behavior == Behavior::Partition && !f.until_ms) err(p + ".until_ms", "partitions need an end");
    const bool client_behavior = f.behavior == Behavior::EquivocatingClient;
    // a partition that only holds traffic is a slow network, not a fault
    const bool counts = !(f.behavior == Behavior::Partition && !f.drop);
    std::map<std::uint32_t, std::set<std::uint32_t>> exec_scratch;
    std::set<std::uint32_t> agreement_scratch;
    auto& faulty_exec = counts ? faulty_exec_all : exec_scratch;
    auto& faulty_agreement = counts ? faulty_agreement_all : agreement_scratch;
    if (client_behavior != (f.target == Target::Client)) err(p + ".target", "behavior does not apply to this target");
    switch (f.target) {
      case Target::Agreement: {
        const std::uint32_t n = 3 * cfg.f_a + 1;
        if (!f.index) {
          err(p + ".index", "required for agreement faults");
        } else if (*f.index >= n) {
          err(p + ".index", "out of range");
        } else {
          faulty_agreement.insert(*f.index);
        }
        break;
      }
      case Target::Group: {
        if (!f.group || *f.group == 0 || *f.group > n_groups + cfg.events.size()) {
          err(p + ".group", "unknown execution group");
          break;
        }
        if (f.index && *f.index >= 2 * cfg.f_e + 1) {
          err(p + ".index", "out of range");
          break;
        }
        auto& set = faulty_exec[*f.group];
        if (f.index) {
          set.insert(*f.index);
        } else {
          for (std::uint32_t k = 0; k < 2 * cfg.f_e + 1; ++k) set.insert(k);
        }
        break;
      }
      case Target::Client:
        if (!f.index || *f.index >= client_count) err(p + ".index", "unknown client");
        break;
      case Target::Zone:
        if (!region_ok(f.region)) err(p + ".region", "unknown region");
        if (f.behavior != Behavior::Crash && f.behavior != Behavior::Partition) err(p + ".behavior", "zones only crash or partition");
        // replica i of a group sits in zone i mod 3
        if (f.region == cfg.agreement_region) {
          for (std::uint32_t k = 0; k < 3 * cfg.f_a + 1; ++k) {
            if (k % 3 == f.zone) faulty_agreement.insert(k);
          }
        }
        for (std::size_t g = 0; g < n_groups; ++g) {
          if (cfg.groups[g] != f.region) continue;
          for (std::uint32_t k = 0; k < 2 * cfg.f_e + 1; ++k) {
            if (k % 3 == f.zone) faulty_exec[static_cast<std::uint32_t>(g + 1)].insert(k);
          }
        }
        break;
    }
    if ((f.behavior == Behavior::LyingCollector) && cfg.commit_variant != irmc::Variant::Sc &&
        cfg.request_variant != irmc::Variant::Sc) {
      err(p + ".behavior", "lying-collector needs an sc channel");
    }
  }
  if (!cfg.beyond_threshold) {
    if (faulty_agreement_all.size() > cfg.f_a) err("fault_plan", "more than f_a faulty agreement replicas; mark beyond_threshold");
    for (const auto& [g, set] : faulty_exec_all) {
      if (set.size() > cfg.f_e) err("fault_plan", "more than f_e faulty replicas in group " + std::to_string(g) + "; mark beyond_threshold");
    }
  }
  for (std::size_t i = 0; i < cfg.events.size(); ++i) {
    const auto& e = cfg.events[i];
    const std::string p = "events[" + std::to_string(i) + "]";
    if (cfg.mode == Mode::FlatBft) err(p, "reconfiguration needs execution groups");
    if (e.at_ms < 0 || e.at_ms > cfg.duration_ms) err(p + ".at_ms", "must lie within the workload");
    if (e.action == Action::AddGroup && !region_ok(e.region)) err(p + ".region", "unknown region");
    if (e.action == Action::RemoveGroup && (e.group == 0 || e.group > n_groups + cfg.events.size())) err(p + ".group", "unknown group");
  }
  return errors;
}

ScenarioConfig parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  ScenarioConfig cfg;
  std::vector<std::string> errors;
  Reader r(j, "", errors);
  r.get("name", cfg.name);
  r.get("description", cfg.description);
  std::optional<std::string> mode;
  r.get("mode", mode);
  if (mode) {
    if (auto m = parse_mode(*mode)) {
      cfg.mode = *m;
    } else {
      r.error("mode", "unknown mode '" + *mode + "'");
    }
  }
  r.get("seed", cfg.seed);
  if (r.has("topology")) read_topology(r.at("topology"), cfg.topology, errors);
  r.get("f_a", cfg.f_a);
  r.get("f_e", cfg.f_e);
  r.get("agreement_region", cfg.agreement_region);
  r.get("groups", cfg.groups);
  r.get("flat_regions", cfg.flat_regions);
  if (r.has("irmc")) {
    Reader ir(r.at("irmc"), "irmc", errors);
    for (auto [key, out] : {std::pair{"request", &cfg.request_variant}, std::pair{"commit", &cfg.commit_variant}}) {
      std::optional<std::string> v;
      ir.get(key, v);
      if (!v) continue;
      if (auto p = parse_variant(*v)) {
        *out = *p;
      } else {
        ir.error(ir.field(key), "expected rc or sc");
      }
    }
    ir.get("request_capacity", cfg.request_capacity);
    ir.get("commit_capacity", cfg.commit_capacity);
    ir.finish();
  }
  if (r.has("checkpoints")) {
    Reader cr(r.at("checkpoints"), "checkpoints", errors);
    cr.get("k_a", cfg.k_a);
    cr.get("k_e", cfg.k_e);
    cr.get("window", cfg.window);
    cr.get("z", cfg.z);
    cr.finish();
  }
  r.get("view_timeout_ms", cfg.view_timeout_ms);
  if (r.has("clients")) {
    const json& cs = r.at("clients");
    cfg.clients.clear();
    if (!cs.is_array()) {
      r.error("clients", "expected a list");
    } else {
      for (std::size_t i = 0; i < cs.size(); ++i) {
        Reader cr(cs[i], "clients[" + std::to_string(i) + "]", errors);
        ClientSpec c;
        cr.get("region", c.region);
        cr.get("count", c.count);
        cr.finish();
        cfg.clients.push_back(c);
      }
    }
  }
  if (r.has("workload")) {
    Reader wr(r.at("workload"), "workload", errors);
    auto& w = cfg.workload;
    wr.get("write", w.write);
    wr.get("append", w.append);
    wr.get("strong_read", w.strong_read);
    wr.get("weak_read", w.weak_read);
    wr.get("rate", w.rate);
    wr.get("keys", w.keys);
    wr.get("value_size", w.value_size);
    wr.get("max_ops", w.max_ops);
    wr.finish();
  }
  if (r.has("fault_plan")) {
    const json& fs = r.at("fault_plan");
    if (!fs.is_array()) {
      r.error("fault_plan", "expected a list");
    } else {
      for (std::size_t i = 0; i < fs.size(); ++i) {
        Reader fr(fs[i], "fault_plan[" + std::to_string(i) + "]", errors);
        FaultSpec f;
        read_enum(fr, "behavior", f.behavior, kBehaviors);
        read_enum(fr, "target", f.target, kTargets);
        fr.get("group", f.group);
        fr.get("index", f.index);
        fr.get("region", f.region);
        fr.get("zone", f.zone);
        fr.get("at_ms", f.at_ms);
        fr.get("until_ms", f.until_ms);
        fr.get("drop", f.drop);
        fr.finish();
        cfg.faults.push_back(f);
      }
    }
  }
  if (r.has("events")) {
    const json& es = r.at("events");
    if (!es.is_array()) {
      r.error("events", "expected a list");
    } else {
      for (std::size_t i = 0; i < es.size(); ++i) {
        Reader er(es[i], "events[" + std::to_string(i) + "]", errors);
        EventSpec e;
        er.get("at_ms", e.at_ms);
        constexpr std::pair<Action, const char*> actions[] = {{Action::AddGroup, "add-group"}, {Action::RemoveGroup, "remove-group"}};
        read_enum(er, "action", e.action, actions);
        er.get("region", e.region);
        er.get("group", e.group);
        er.finish();
        cfg.events.push_back(e);
      }
    }
  }
  r.get("duration_ms", cfg.duration_ms);
  r.get("drain_ms", cfg.drain_ms);
  r.get("wan_loss", cfg.wan_loss);
  r.get("beyond_threshold", cfg.beyond_threshold);
  std::optional<std::string> trace;
  r.get("trace", trace);
  if (trace) {
    if (*trace == "full") {
      cfg.trace = TraceLevel::Full;
    } else if (*trace != "semantic") {
      r.error("trace", "expected semantic or full");
    }
  }
  r.finish();
  if (errors.empty()) errors = validate(cfg);
  if (!errors.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string to_json(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["description"] = cfg.description;
  j["mode"] = mode_name(cfg.mode);
  j["seed"] = cfg.seed;
  json topo;
  topo["regions"] = cfg.topology.regions();
  json delays = json::array();
  const auto& regions = cfg.topology.regions();
  for (std::size_t a = 0; a < regions.size(); ++a) {
    for (std::size_t b = a + 1; b < regions.size(); ++b) {
      delays.push_back({regions[a], regions[b], cfg.topology.region_delay_ms(regions[a], regions[b])});
    }
  }
  topo["delays_ms"] = delays;
  topo["inter_zone_ms"] = cfg.topology.inter_zone_ms();
  topo["intra_zone_ms"] = cfg.topology.intra_zone_ms();
  topo["jitter_ms"] = cfg.topology.jitter_ms();
  j["topology"] = topo;
  j["f_a"] = cfg.f_a;
  j["f_e"] = cfg.f_e;
  j["agreement_region"] = cfg.agreement_region;
  j["groups"] = cfg.groups;
  if (!cfg.flat_regions.empty()) j["flat_regions"] = cfg.flat_regions;
  j["irmc"] = {{"request", cfg.request_variant == irmc::Variant::Rc ? "rc" : "sc"},
               {"commit", cfg.commit_variant == irmc::Variant::Rc ? "rc" : "sc"},
               {"request_capacity", cfg.request_capacity},
               {"commit_capacity", cfg.commit_capacity}};
  j["checkpoints"] = {{"k_a", cfg.k_a}, {"k_e", cfg.k_e}, {"window", cfg.window}, {"z", cfg.z}};
  j["view_timeout_ms"] = cfg.view_timeout_ms;
  json clients = json::array();
  for (const auto& c : cfg.clients) clients.push_back({{"region", c.region}, {"count", c.count}});
  j["clients"] = clients;
  const auto& w = cfg.workload;
  j["workload"] = {{"write", w.write}, {"append", w.append},         {"strong_read", w.strong_read},
                   {"weak_read", w.weak_read}, {"rate", w.rate}, {"keys", w.keys},
                   {"value_size", w.value_size}, {"max_ops", w.max_ops}};
  json faults = json::array();
  for (const auto& f : cfg.faults) {
    json e{{"behavior", behavior_name(f.behavior)}, {"target", target_name(f.target)}, {"at_ms", f.at_ms}};
    if (f.group) e["group"] = *f.group;
    if (f.index) e["index"] = *f.index;
    if (f.target == Target::Zone) {
      e["region"] = f.region;
      e["zone"] = f.zone;
    }
    if (f.until_ms) e["until_ms"] = *f.until_ms;
    if (f.drop) e["drop"] = true;
    faults.push_back(e);
  }
  j["fault_plan"] = faults;
  json events = json::array();
  for (const auto& e : cfg.events) {
    json o{{"at_ms", e.at_ms}, {"action", action_name(e.action)}};
    if (e.action == Action::AddGroup) o["region"] = e.region;
    if (e.action == Action::RemoveGroup) o["group"] = e.group;
    events.push_back(o);
  }
  j["events"] = events;
  j["duration_ms"] = cfg.duration_ms;
  j["drain_ms"] = cfg.drain_ms;
  j["wan_loss"] = cfg.wan_loss;
  j["beyond_threshold"] = cfg.beyond_threshold;
  j["trace"] = cfg.trace == TraceLevel::Full ? "full" : "semantic";
  return j.dump(2);
}

}  // namespace georep::harness
