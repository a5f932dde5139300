#pragma once

#include <optional>
#include <string>
#include <vector>

#include "georep/harness/audit.hpp"
#include "georep/sim/trace.hpp"

namespace georep::harness {

// Nearest-rank percentile, q in (0, 1]. Empty input has none.
std::optional<double> nearest_rank(std::vector<double> values, double q);

struct LatencyRow {
  std::string region;  // client region
  std::string op;      // write | strong | weak, as issued
  std::size_t count = 0;
  double p50_ms = 0;
  double p90_ms = 0;
};
// Completed operations of correct clients only.
std::vector<LatencyRow> latency_table(const TraceLog& trace);
std::string latency_csv(const std::vector<LatencyRow>& rows);

struct WanCount {
  std::string kind;  // "total", a message kind, or "<kind>@<request|commit>"
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
};
std::vector<WanCount> wan_counts(const TraceLog& trace);

struct ReconfigEvent {
  SimTime time = 0;
  std::string action;
  std::uint32_t group = 0;
  std::string phase;  // requested | done
  std::optional<ResultStatus> status;
};
std::vector<ReconfigEvent> reconfig_timeline(const TraceLog& trace);

struct MetricsReport {
  std::string scenario;
  std::string mode;
  std::uint64_t seed = 0;
  std::string trace_digest;
  std::vector<LatencyRow> latency;
  std::vector<WanCount> wan;
  std::vector<Verdict> verdicts;
  std::vector<ReconfigEvent> timeline;
  bool ok() const;
};
MetricsReport make_report(const TraceLog& trace, bool liveness);
std::string report_json(const MetricsReport& report);
std::string report_text(const MetricsReport& report);

// Remote-client write latency before the first view change and after it settled.
struct StabilityRow {
  std::string region;
  double before_p50_ms = 0;
  double after_p50_ms = 0;
  double delta_ms = 0;  // after - before
};
struct StabilityReport {
  std::optional<SimTime> view_change;
  std::string new_leader;
  std::vector<StabilityRow> rows;
};
// Operations issued in [disturbance, view change + settle) are left out.
StabilityReport leader_crash_report(const TraceLog& trace, SimTime settle);

}  // namespace georep::harness
