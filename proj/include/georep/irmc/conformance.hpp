#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "georep/irmc/endpoint.hpp"

namespace georep::irmc {

// What the suite needs from an implementation.
struct EndpointFactory {
  std::string name;
  std::function<std::unique_ptr<SenderEndpoint>(ChannelConfig, Runtime&)> sender;
  std::function<std::unique_ptr<ReceiverEndpoint>(ChannelConfig, Runtime&)> receiver;
};

EndpointFactory factory_for(Variant v);

struct ConformanceOptions {
  std::uint32_t f = 1;
  std::size_t schedules = 1000;
  std::uint64_t seed = 1;
  bool faulty = true;        // inject f_s faulty senders and f_r faulty receivers
  double lossy_fraction = 0.2;  // share of schedules with lossy links and retransmission
  std::optional<std::uint64_t> replay;  // run only the schedule with this seed, keeping its full trace
};

struct ConformanceReport {
  std::size_t schedules = 0;
  std::size_t deliveries = 0;
  std::size_t too_old = 0;
  std::size_t faulty_messages = 0;
  // property name -> number of violations
  std::map<std::string, std::size_t> violations;
  std::vector<std::string> examples;  // first few violation descriptions, tagged with the schedule seed
  std::vector<std::string> trace;     // replayed schedule only

  bool passed() const;
  std::size_t total_violations() const;
};

ConformanceReport run_conformance(const EndpointFactory& factory, const ConformanceOptions& opts);

}  // namespace georep::irmc
