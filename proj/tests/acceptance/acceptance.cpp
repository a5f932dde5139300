// One line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "georep/harness/audit.hpp"
#include "georep/harness/deployment.hpp"
#include "georep/harness/metrics.hpp"
#include "georep/irmc/conformance.hpp"

using namespace georep;
using namespace georep::harness;

namespace {

// Tolerances and sizes.
constexpr std::size_t kSchedules = 1000;            // per variant and fault level
constexpr double kConformanceBudgetS = 120.0;       // per variant
constexpr std::uint64_t kSeeds = 5;                 // scenario seeds for the safety and liveness sweeps
constexpr double kHopOracleToleranceMs = 1.0;
constexpr double kLeaderShiftBoundMs = 2.0;         // one intra-region round trip
constexpr double kSettleMs = 500.0;                 // after the view change before "steady state"
constexpr double kThroughputRatio = 0.95;           // z = 1 against the fault-free run
constexpr std::uint64_t kRcSendsPerPayload = 12;    // |S| x |R| on a 4 -> 3 channel
constexpr std::uint64_t kScCertsPerPayload = 3;     // one per receiver

std::string scenario_dir() { return GEOREP_SCENARIO_DIR; }
ScenarioConfig shipped(const std::string& name) { return load_scenario(scenario_dir() + "/" + name + ".json"); }

std::unique_ptr<Deployment> run(ScenarioConfig cfg) {
  auto d = std::make_unique<Deployment>(std::move(cfg));
  d->run();
  return d;
}

struct Line {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " [FAIL: " << why << "]";
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::uint64_t num(const TraceRecord& r, const std::string& key) { return std::stoull(parse_detail(r.detail).at(key)); }

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(scenario_dir())) {
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::string, double> write_p50(const TraceLog& trace) {
  std::map<std::string, double> out;
  for (const auto& row : latency_table(trace)) {
    if (row.op == "write") out[row.region] = row.p50_ms;
  }
  return out;
}

std::uint64_t wan(const TraceLog& trace, const std::string& kind) {
  for (const auto& w : wan_counts(trace)) {
    if (w.kind == kind) return w.messages;
  }
  return 0;
}

// ---------------------------------------------------------------------------

Line channel_conformance() {
  Line line;
  for (irmc::Variant v : {irmc::Variant::Rc, irmc::Variant::Sc}) {
    const char* name = v == irmc::Variant::Rc ? "rc" : "sc";
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t schedules = 0, deliveries = 0, unbacked = 0, violations = 0;
    for (std::uint32_t f : {1u, 2u}) {
      irmc::ConformanceOptions opts;
      opts.f = f;
      opts.schedules = kSchedules;
      opts.seed = 7000 + f;
      const auto rep = irmc::run_conformance(irmc::factory_for(v), opts);
      schedules += rep.schedules;
      deliveries += rep.deliveries;
      violations += rep.total_violations();
      if (auto it = rep.violations.find("quorum_delivery"); it != rep.violations.end()) unbacked += it->second;
      for (const auto& e : rep.examples) line.detail << " [" << name << " f=" << f << ": " << e << "]";
      line.require(rep.schedules == kSchedules, std::string(name) + " ran fewer schedules");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    line.require(violations == 0, std::string(name) + " violations");
    line.require(unbacked == 0, std::string(name) + " delivery without quorum");
    line.require(deliveries > 0, std::string(name) + " delivered nothing");
    line.require(secs < kConformanceBudgetS, std::string(name) + " over time budget");
    line.detail << " " << name << ": schedules=" << schedules << " deliveries=" << deliveries
                << " violations=" << violations << " unbacked=" << unbacked << " time=" << fmt(secs) << "s;";
  }
  return line;
}

Line end_to_end_safety() {
  Line line;
  std::size_t runs = 0, ops = 0;
  for (const auto& name : scenario_names()) {
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
      ScenarioConfig cfg = shipped(name);
      cfg.seed = seed;
      auto d = run(cfg);
      const auto h = check_history(d->trace());
      for (const auto& v : h.list()) line.require(v.pass, name + " seed " + std::to_string(seed) + " " + v.name);
      ++runs;
      ops += client_history(d->trace()).size();
    }
  }
  line.detail << " runs=" << runs << " scenarios=" << scenario_names().size() << " ops=" << ops
              << " verdicts=execute_equality,real_time_order,replay_replies,weak_read_interval";
  return line;
}

Line liveness() {
  Line line;
  std::size_t runs = 0;
  std::size_t views = 0, jumps = 0;
  for (const auto& name : scenario_names()) {
    const ScenarioConfig base = shipped(name);
    if (base.beyond_threshold) continue;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
      ScenarioConfig cfg = base;
      cfg.seed = seed;
      auto d = run(cfg);
      const auto v = check_liveness(d->trace());
      line.require(v.pass && d->outstanding() == 0, name + " seed " + std::to_string(seed) + " incomplete");
      for (const auto& r : d->trace().records()) {
        views += r.event == "a_view";
        jumps += r.event == "e_jump" || r.event == "a_jump";
      }
      ++runs;
    }
  }
  line.require(views > 0, "no view change exercised");
  line.require(jumps > 0, "no checkpoint catch-up exercised");
  line.detail << " runs=" << runs << " view_changes=" << views << " checkpoint_jumps=" << jumps;
  return line;
}

// Critical path of a write on the shipped layout: client to its group across
// zones, the group's request reaching the agreement leader, three ordering
// phases (pre-prepare lands on a same-zone replica, prepare and commit quorums
// cross zones), the commit reaching the group, the reply crossing zones back.
double hop_sum_oracle(const Topology& topo, const std::string& client_region, const std::string& agreement_region) {
  const double zone = topo.inter_zone_ms();
  const double ordering = topo.intra_zone_ms() + 2 * zone;
  const double to_agreement =
      client_region == agreement_region ? zone : topo.region_delay_ms(client_region, agreement_region);
  return zone + to_agreement + ordering + to_agreement + zone;
}

Line hop_structure() {
  Line line;
  const ScenarioConfig cfg = shipped("four-regions-writes");
  auto d = run(cfg);
  const auto p50 = write_p50(d->trace());
  for (const auto& region : cfg.topology.regions()) {
    const double oracle = hop_sum_oracle(cfg.topology, region, cfg.agreement_region);
    const double got = p50.count(region) ? p50.at(region) : -1;
    line.require(std::abs(got - oracle) <= kHopOracleToleranceMs, region + " off the oracle");
    line.detail << " " << region << "=" << fmt(got) << "/" << fmt(oracle) << "ms";
  }
  const double rtt = 2 * cfg.topology.inter_zone_ms();
  line.require(p50.at(cfg.agreement_region) <= 4 * rtt + 3 * cfg.topology.inter_zone_ms(), "co-located write too slow");
  std::map<std::uint32_t, std::size_t> hops_local, hops_remote;
  for (const auto& op : client_history(d->trace())) {
    if (op.issued_kind != "write" || op.t == 1) continue;  // t=1 also carries the registry lookup
    const bool local = d->client_region(op.client.value - kClientBase) == cfg.agreement_region;
    (local ? hops_local : hops_remote)[op.hops]++;
  }
  line.require(hops_local.size() == 1 && hops_local.count(0), "co-located write crossed regions");
  line.require(hops_remote.size() == 1 && hops_remote.count(2), "remote write not exactly two wide-area hops");
  line.detail << "; wide-area hops: co-located=";
  for (const auto& [h, n] : hops_local) line.detail << h << "x" << n << " ";
  line.detail << "remote=";
  for (const auto& [h, n] : hops_remote) line.detail << h << "x" << n << " ";
  return line;
}

Line baseline_ordering() {
  Line line;
  ScenarioConfig cfg = shipped("four-regions-writes");
  auto spider = run(cfg);
  cfg.mode = Mode::FlatBft;
  auto flat = run(cfg);
  const auto s = write_p50(spider->trace());
  const auto f = write_p50(flat->trace());
  const std::string leader_region = flat->directory().at(flat->current_leader()).where.region;
  for (const auto& region : cfg.topology.regions()) {
    line.detail << " " << region << ": flat=" << fmt(f.at(region)) << " spider=" << fmt(s.at(region)) << "ms";
    if (region == leader_region) continue;
    line.require(f.at(region) > s.at(region), region + " flat not slower");
  }
  line.detail << " (flat leader in " << leader_region << ")";
  return line;
}

double smallest_rtt_difference(const Topology& topo) {
  std::vector<double> rtts;
  const auto& rs = topo.regions();
  for (std::size_t i = 0; i < rs.size(); ++i) {
    for (std::size_t j = i + 1; j < rs.size(); ++j) rtts.push_back(2 * topo.region_delay_ms(rs[i], rs[j]));
  }
  double best = 1e9;
  for (std::size_t i = 0; i < rtts.size(); ++i) {
    for (std::size_t j = i + 1; j < rtts.size(); ++j) {
      if (rtts[i] != rtts[j]) best = std::min(best, std::abs(rtts[i] - rtts[j]));
    }
  }
  return best;
}

Line leader_stability() {
  Line line;
  ScenarioConfig cfg = shipped("leader-crash");
  const double flat_bound = smallest_rtt_difference(cfg.topology);
  auto spider = run(cfg);
  cfg.mode = Mode::FlatBft;
  auto flat = run(cfg);
  const auto sr = leader_crash_report(spider->trace(), ms(kSettleMs));
  const auto fr = leader_crash_report(flat->trace(), ms(kSettleMs));
  line.require(sr.view_change.has_value(), "spider had no view change");
  line.require(fr.view_change.has_value(), "flat had no view change");
  line.detail << " spider(leader " << sr.new_leader << "):";
  for (const auto& row : sr.rows) {
    if (row.region == cfg.agreement_region) continue;
    line.require(std::abs(row.delta_ms) < kLeaderShiftBoundMs, "spider " + row.region + " shifted");
    line.detail << " " << row.region << "=" << fmt(row.delta_ms);
  }
  line.detail << "; flat(leader " << fr.new_leader << "):";
  double largest = 0;
  for (const auto& row : fr.rows) {
    largest = std::max(largest, std::abs(row.delta_ms));
    line.detail << " " << row.region << "=" << fmt(row.delta_ms);
  }
  line.require(largest >= flat_bound, "flat shift below the smallest rtt difference");
  line.detail << "; bound " << fmt(flat_bound) << "ms";
  return line;
}

struct FlowRun {
  std::size_t delivered_during = 0;
  Seq max_s_during = 0;
  Seq stalled_group_before = 0;
  std::size_t remote_fetches = 0;
  Seq stalled_group_end = 0;
  Seq agreement_end = 0;
  SimTime last_delivery_during = 0;
  bool live = false;
};

FlowRun flow_run(std::uint32_t z, bool stalled) {
  ScenarioConfig cfg = shipped("flow-control-z");
  cfg.z = z;
  GroupId held{0};
  SimTime from = 0, until = 0;
  for (const auto& f : cfg.faults) {
    if (f.behavior == Behavior::Partition) {
      held = GroupId{*f.group};
      from = ms(f.at_ms);
      until = ms(*f.until_ms);
    }
  }
  if (!stalled) cfg.faults.clear();
  auto d = run(cfg);
  // let commits still crossing the wide area land
  d->run_until(d->sim().now() + ms(1000));
  FlowRun out;
  const std::string leader = node_label(d->agreement_ids()[0]);
  for (const auto& r : d->trace().records()) {
    if (r.event == "a_deliver" && r.src == leader) {
      const Seq s = num(r, "s");
      out.agreement_end = std::max(out.agreement_end, s);
      if (r.time >= from && r.time < until) {
        ++out.delivered_during;
        out.max_s_during = std::max(out.max_s_during, s);
        out.last_delivery_during = r.time;
      }
    }
    if ((r.event == "e_exec" || r.event == "e_jump") && r.time < from && num(r, "group") == held.value) {
      out.stalled_group_before = std::max<Seq>(out.stalled_group_before, num(r, "s"));
    }
    if (r.event == "cp_fetch" && num(r, "group") == held.value && r.detail.find("scope=remote") != std::string::npos) {
      ++out.remote_fetches;
    }
  }
  for (auto* r : d->group(held)) out.stalled_group_end = std::max(out.stalled_group_end, r->s_n());
  out.live = d->outstanding() == 0 && check_history(d->trace()).ok();
  return out;
}

Line flow_control() {
  Line line;
  const std::uint64_t capacity = shipped("flow-control-z").commit_capacity;
  const FlowRun free = flow_run(1, false);
  const FlowRun one = flow_run(1, true);
  const FlowRun zero = flow_run(0, true);
  line.require(one.delivered_during >= kThroughputRatio * free.delivered_during, "z=1 throughput dropped");
  line.require(one.remote_fetches > 0, "z=1 stalled group did not fetch remotely");
  line.require(one.stalled_group_end == one.agreement_end, "z=1 stalled group did not catch up");
  line.require(one.live, "z=1 run not clean");
  line.require(zero.max_s_during <= zero.stalled_group_before + capacity, "z=0 ran past the commit window");
  line.require(zero.delivered_during < one.delivered_during, "z=0 did not stall");
  line.require(zero.live, "z=0 run not clean after healing");
  line.detail << " deliveries while stalled: fault-free=" << free.delivered_during << " z1=" << one.delivered_during
              << " z0=" << zero.delivered_during << "; z0 max s=" << zero.max_s_during
              << " vs stalled group s=" << zero.stalled_group_before << "+" << capacity
              << ", last delivery at " << fmt(zero.last_delivery_during / 1000.0) << "ms"
              << "; z1 remote fetches=" << one.remote_fetches << " final s=" << one.stalled_group_end << "/"
              << one.agreement_end;
  return line;
}

Line reconfiguration() {
  Line line;
  const ScenarioConfig cfg = shipped("add-group");
  auto d = run(cfg);
  line.require(check_history(d->trace()).ok(), "safety verdicts");
  GroupId added{0}, removed{0};
  for (const auto& e : cfg.events) {
    if (e.action == Action::RemoveGroup) removed = GroupId{e.group};
  }
  for (const auto& g : d->groups()) added = std::max(added, g.id);
  std::map<std::string, std::size_t> too_old, fetches;
  std::map<std::string, SimTime> first_too_old, first_exec;
  SimTime removed_at = 0;
  for (const auto& r : d->trace().records()) {
    if (r.event == "reconfig" && r.kind == "remove-group" && r.detail.find("phase=done") != std::string::npos) {
      removed_at = r.time;
    }
    if (r.event == "e_too_old" && num(r, "group") == added.value && !too_old[r.src]++) first_too_old[r.src] = r.time;
    if (r.event == "e_exec" && num(r, "group") == added.value && !first_exec.count(r.src)) first_exec[r.src] = r.time;
    if (r.event == "cp_fetch" && num(r, "group") == added.value && r.detail.find("scope=remote") != std::string::npos) {
      ++fetches[r.src];
    }
  }
  const auto members = d->group(added);
  line.require(too_old.size() == members.size(), "not every new replica saw TooOld");
  for (const auto& [node, n] : too_old) {
    line.require(first_exec.count(node) == 0 || first_too_old[node] <= first_exec[node], node + " executed before TooOld");
    line.require(fetches[node] == 1, node + " fetched " + std::to_string(fetches[node]) + " times");
  }
  std::size_t weak_served = 0, after_removal = 0, moved = 0;
  std::set<NodeId> attached;
  for (const auto& op : client_history(d->trace())) {
    line.require(op.accepted.has_value(), "unfinished op");
    if (op.group == added && op.kind == "weak") ++weak_served;
    if (op.group == removed) attached.insert(op.client);
  }
  for (const auto& op : client_history(d->trace())) {
    if (!attached.count(op.client) || op.issued <= removed_at) continue;
    ++after_removal;
    if (op.accepted && op.group != removed) ++moved;
  }
  line.require(weak_served > 0, "new group served no weak read");
  line.require(removed_at > 0 && after_removal > 0 && moved == after_removal, "removed group's clients stuck");
  line.detail << " new group " << added.value << ": too_old=" << too_old.size() << "/" << members.size()
              << " remote fetches per replica=1 weak reads served=" << weak_served << "; removed group "
              << removed.value << ": " << moved << "/" << after_removal << " later ops served elsewhere";
  return line;
}

Line channel_economy() {
  Line line;
  ScenarioConfig cfg = shipped("rc-vs-sc");
  auto rc = run(cfg);
  cfg.request_variant = cfg.commit_variant = irmc::Variant::Sc;
  auto sc = run(cfg);
  auto payloads = [&](Deployment& d) {
    std::size_t remote = 0;
    for (const auto& g : d.groups()) remote += g.region != cfg.agreement_region && g.id != kAgreementGroup;
    std::uint64_t delivered = 0;
    const std::string leader = node_label(d.agreement_ids()[0]);
    for (const auto& r : d.trace().records()) delivered += r.event == "a_deliver" && r.src == leader;
    return delivered * remote;
  };
  const std::uint64_t rc_payloads = payloads(*rc), sc_payloads = payloads(*sc);
  const std::uint64_t sends = wan(rc->trace(), "Send@commit");
  const std::uint64_t certs = wan(sc->trace(), "Certificate@commit");
  const std::uint64_t progress = wan(sc->trace(), "Progress@commit");
  line.require(rc_payloads > 0 && sends == kRcSendsPerPayload * rc_payloads, "rc send count");
  line.require(sc_payloads > 0 && certs == kScCertsPerPayload * sc_payloads, "sc certificate count");
  line.require(wan(sc->trace(), "Send@commit") == 0, "sc sent raw payloads across regions");
  line.require(progress <= kRcSendsPerPayload * sc_payloads, "sc progress unbounded");
  line.detail << " rc: " << sends << " sends / " << rc_payloads << " payloads = " << fmt(double(sends) / rc_payloads)
              << "; sc: " << certs << " certificates / " << sc_payloads << " payloads = "
              << fmt(double(certs) / sc_payloads) << ", progress " << fmt(double(progress) / sc_payloads)
              << " per payload";
  return line;
}

Line checkpoint_equivalence() {
  Line line;
  std::size_t arrivals = 0;
  for (const std::string name : {"flow-control-z", "add-group", "leader-crash", "zone-outage"}) {
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
      ScenarioConfig cfg = shipped(name);
      cfg.seed = seed;
      auto d = run(cfg);
      const auto v = check_checkpoint_equivalence(d->trace());
      line.require(v.pass, name + " seed " + std::to_string(seed) + ": " + v.detail);
      for (const auto& r : d->trace().records()) arrivals += r.event == "e_jump" || r.event == "a_jump";
    }
  }
  line.require(arrivals > 0, "no replica arrived via checkpoint");
  line.detail << " checkpoint arrivals compared=" << arrivals;
  return line;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Line()>>> criteria{
      {"C1 channel conformance", channel_conformance},
      {"C2 end-to-end safety", end_to_end_safety},
      {"C3 liveness", liveness},
      {"C4 hop-structure latency", hop_structure},
      {"C5 baseline ordering", baseline_ordering},
      {"C6 leader-location stability", leader_stability},
      {"C7 global flow control", flow_control},
      {"C8 reconfiguration", reconfiguration},
      {"C9 rc vs sc economy", channel_economy},
      {"C10 checkpoint equivalence", checkpoint_equivalence},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Line line;
    try {
      line = check();
    } catch (const std::exception& e) {
      line.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %s:%s\n", line.pass ? "PASS" : "FAIL", name.c_str(), line.detail.str().c_str());
    std::fflush(stdout);
    failed += !line.pass;
  }
  return failed == 0 ? 0 : 1;
}
