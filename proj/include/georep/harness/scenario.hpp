#pragma once

#include <optional>
#include <string>
#include <vector>

#include "georep/irmc/endpoint.hpp"
#include "georep/sim/topology.hpp"
#include "georep/sim/trace.hpp"

namespace georep::harness {

enum class Mode { Spider, FlatBft, Oracle };
const char* mode_name(Mode m);
std::optional<Mode> parse_mode(const std::string& s);
std::optional<irmc::Variant> parse_variant(const std::string& s);

struct ClientSpec {
  std::string region;
  std::uint32_t count = 1;
};

// Fractions need not sum to one; they are normalized.
struct WorkloadSpec {
  double write = 1.0;
  double append = 0.0;           // writes that extend a value instead of replacing it
  double strong_read = 0.0;
  double weak_read = 0.0;
  double rate = 10.0;            // operations per second per client
  std::uint32_t keys = 8;
  std::uint32_t value_size = 8;
  std::uint32_t max_ops = 0;     // per client; 0 means until the workload ends
};

enum class Behavior : std::uint8_t {
  Crash,
  Partition,
  Withhold,
  Equivocate,
  Garbage,
  LyingCollector,
  EquivocatingClient,
};
const char* behavior_name(Behavior b);
std::optional<Behavior> parse_behavior(const std::string& s);

enum class Target : std::uint8_t { Agreement, Group, Client, Zone };

struct FaultSpec {
  Behavior behavior = Behavior::Crash;
  Target target = Target::Agreement;
  std::optional<std::uint32_t> group;   // execution group id for Target::Group
  std::optional<std::uint32_t> index;   // member or client index; the whole group when absent
  std::string region;                   // for Target::Zone
  std::uint32_t zone = 0;
  double at_ms = 0;
  std::optional<double> until_ms;       // partitions heal here
  bool drop = false;                    // partitions drop instead of holding
};

enum class Action : std::uint8_t { AddGroup, RemoveGroup };
const char* action_name(Action a);

struct EventSpec {
  double at_ms = 0;
  Action action = Action::AddGroup;
  std::string region;      // AddGroup
  std::uint32_t group = 0; // RemoveGroup
};

struct ScenarioConfig {
  std::string name = "unnamed";
  std::string description;
  Topology topology = Topology::four_regions();
  std::uint32_t f_a = 1;
  std::uint32_t f_e = 1;
  std::string agreement_region = "V";
  std::vector<std::string> groups = {"V", "O", "I", "T"};  // one execution group per entry, ids from 1
  std::vector<std::string> flat_regions;                   // flat-bft placement; defaults to agreement region first
  irmc::Variant request_variant = irmc::Variant::Rc;
  irmc::Variant commit_variant = irmc::Variant::Rc;
  std::uint64_t request_capacity = 2;
  std::uint64_t commit_capacity = 32;
  std::uint64_t k_a = 10;
  std::uint64_t k_e = 10;
  std::uint64_t window = 20;
  std::uint32_t z = 0;
  double view_timeout_ms = 16;
  std::vector<ClientSpec> clients = {{"V", 1}, {"O", 1}, {"I", 1}, {"T", 1}};
  WorkloadSpec workload;
  std::vector<FaultSpec> faults;
  std::vector<EventSpec> events;
  double duration_ms = 2000;   // clients stop issuing here
  double drain_ms = 10000;     // extra time for outstanding requests
  double wan_loss = 0;
  Mode mode = Mode::Spider;
  bool beyond_threshold = false;
  TraceLevel trace = TraceLevel::Semantic;
  std::uint64_t seed = 1;
};

// Every problem found, each naming the offending field; empty when valid.
std::vector<std::string> validate(const ScenarioConfig& cfg);

// Parse errors and validation errors are reported as ConfigError with one line per problem.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);
std::string to_json(const ScenarioConfig& cfg);

}  // namespace georep::harness
