#include "georep/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"

namespace georep::harness {

using json = nlohmann::ordered_json;

std::optional<double> nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) return std::nullopt;
  if (q <= 0 || q > 1) throw std::invalid_argument("percentile must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

namespace {

std::map<std::pair<std::string, std::string>, std::vector<double>> latencies(const TraceLog& trace, const NodeTable& nodes) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> out;
  for (const auto& op : client_history(trace)) {
    if (!op.accepted || op.issued_kind == "admin") continue;
    auto n = nodes.find(op.client);
    if (n == nodes.end() || n->second.byzantine) continue;
    out[{n->second.region, op.issued_kind}].push_back(static_cast<double>(*op.accepted - op.issued) / 1000.0);
  }
  return out;
}

std::vector<std::string> ordered_regions(const NodeTable& nodes) {
  std::vector<std::string> out;
  for (const auto& [id, facts] : nodes) {
    if (std::find(out.begin(), out.end(), facts.region) == out.end()) out.push_back(facts.region);
  }
  return out;
}

}  // namespace

std::vector<LatencyRow> latency_table(const TraceLog& trace) {
  const NodeTable nodes = node_table(trace);
  const auto lat = latencies(trace, nodes);
  std::vector<LatencyRow> rows;
  for (const auto& region : ordered_regions(nodes)) {
    for (const char* op : {"write", "strong", "weak"}) {
      auto it = lat.find({region, op});
      if (it == lat.end()) continue;
      rows.push_back(LatencyRow{region, op, it->second.size(), *nearest_rank(it->second, 0.5), *nearest_rank(it->second, 0.9)});
    }
  }
  return rows;
}

std::string latency_csv(const std::vector<LatencyRow>& rows) {
  std::ostringstream os;
  os << "region,op,p50,p90\n";
  for (const auto& r : rows) os << r.region << ',' << r.op << ',' << r.p50_ms << ',' << r.p90_ms << '\n';
  return os.str();
}

std::vector<WanCount> wan_counts(const TraceLog& trace) {
  std::vector<WanCount> out;
  for (const auto& r : trace.records()) {
    if (r.event != "wan") continue;
    const auto f = parse_detail(r.detail);
    out.push_back(WanCount{r.kind, std::stoull(f.at("messages")), std::stoull(f.at("bytes"))});
  }
  return out;
}

std::vector<ReconfigEvent> reconfig_timeline(const TraceLog& trace) {
  std::vector<ReconfigEvent> out;
  for (const auto& r : trace.records()) {
    if (r.event != "reconfig") continue;
    const auto f = parse_detail(r.detail);
    ReconfigEvent e{r.time, r.kind, static_cast<std::uint32_t>(std::stoul(f.at("group"))), f.at("phase"), std::nullopt};
    if (auto s = f.find("status"); s != f.end()) e.status = static_cast<ResultStatus>(std::stoul(s->second));
    out.push_back(e);
  }
  return out;
}

bool MetricsReport::ok() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

MetricsReport make_report(const TraceLog& trace, bool liveness) {
  MetricsReport rep;
  for (const auto& r : trace.records()) {
    if (r.event != "scenario") continue;
    const auto f = parse_detail(r.detail);
    rep.scenario = f.at("name");
    rep.mode = r.kind;
    rep.seed = std::stoull(f.at("seed"));
    break;
  }
  rep.trace_digest = trace.digest().hex();
  rep.latency = latency_table(trace);
  rep.wan = wan_counts(trace);
  rep.verdicts = audit(trace, liveness);
  rep.timeline = reconfig_timeline(trace);
  return rep;
}

std::string report_json(const MetricsReport& rep) {
  json j;
  j["scenario"] = rep.scenario;
  j["mode"] = rep.mode;
  j["seed"] = rep.seed;
  j["trace_digest"] = rep.trace_digest;
  j["ok"] = rep.ok();
  json& verdicts = j["verdicts"] = json::array();
  for (const auto& v : rep.verdicts) verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  json& lat = j["latency_ms"] = json::array();
  for (const auto& r : rep.latency) {
    lat.push_back({{"region", r.region}, {"op", r.op}, {"count", r.count}, {"p50", r.p50_ms}, {"p90", r.p90_ms}});
  }
  json& wan = j["wan"] = json::array();
  for (const auto& w : rep.wan) wan.push_back({{"kind", w.kind}, {"messages", w.messages}, {"bytes", w.bytes}});
  json& timeline = j["reconfiguration"] = json::array();
  for (const auto& e : rep.timeline) {
    json o{{"time_ms", static_cast<double>(e.time) / 1000.0}, {"action", e.action}, {"group", e.group}, {"phase", e.phase}};
    if (e.status) o["status"] = static_cast<int>(*e.status);
    timeline.push_back(o);
  }
  return j.dump(2) + "\n";
}

std::string report_text(const MetricsReport& rep) {
  std::ostringstream os;
  os << "scenario " << rep.scenario << " mode " << rep.mode << " seed " << rep.seed << "\n";
  for (const auto& v : rep.verdicts) {
    os << (v.pass ? "PASS " : "FAIL ") << v.name;
    if (!v.detail.empty()) os << ": " << v.detail;
    os << "\n";
  }
  for (const auto& r : rep.latency) {
    os << "latency " << r.region << " " << r.op << " n=" << r.count << " p50=" << r.p50_ms << "ms p90=" << r.p90_ms << "ms\n";
  }
  for (const auto& w : rep.wan) {
    if (w.kind == "total") os << "wan messages=" << w.messages << " bytes=" << w.bytes << "\n";
  }
  return os.str();
}

StabilityReport leader_crash_report(const TraceLog& trace, SimTime settle) {
  const NodeTable nodes = node_table(trace);
  StabilityReport rep;
  std::optional<SimTime> disturbance;
  for (const auto& [id, facts] : nodes) {
    if (facts.crash && (facts.role == Role::Agreement || facts.role == Role::Flat)) {
      disturbance = disturbance ? std::min(*disturbance, *facts.crash) : *facts.crash;
    }
  }
  for (const auto& r : trace.records()) {
    if (r.event == "a_view") {
      rep.view_change = r.time;
      rep.new_leader = parse_detail(r.detail).at("leader");
      break;
    }
  }
  std::map<std::string, std::vector<double>> before, after;
  for (const auto& op : client_history(trace)) {
    if (!op.accepted || op.issued_kind != "write") continue;
    auto n = nodes.find(op.client);
    if (n == nodes.end() || n->second.byzantine) continue;
    const double lat = static_cast<double>(*op.accepted - op.issued) / 1000.0;
    if (!rep.view_change) {
      before[n->second.region].push_back(lat);
      after[n->second.region].push_back(lat);
      continue;
    }
    const SimTime cut = std::min(disturbance.value_or(*rep.view_change), *rep.view_change);
    if (*op.accepted < cut) before[n->second.region].push_back(lat);
    if (op.issued >= *rep.view_change + settle) after[n->second.region].push_back(lat);
  }
  for (const auto& region : ordered_regions(nodes)) {
    auto b = before.find(region);
    auto a = after.find(region);
    if (b == before.end() || a == after.end()) continue;
    StabilityRow row{region, *nearest_rank(b->second, 0.5), *nearest_rank(a->second, 0.5), 0};
    row.delta_ms = row.after_p50_ms - row.before_p50_ms;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace georep::harness
