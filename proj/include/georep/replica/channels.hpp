#pragma once

#include "georep/core/messages.hpp"
#include "georep/irmc/endpoint.hpp"

namespace georep::replica {

struct ChannelParams {
  irmc::Variant request_variant = irmc::Variant::Rc;
  irmc::Variant commit_variant = irmc::Variant::Rc;
  std::uint64_t request_capacity = 2;
  std::uint64_t commit_capacity = 32;
  SimTime progress_period = ms(50);
  SimTime collector_timeout = ms(200);
  SimTime retransmit_period = 0;
};

// Execution group -> agreement group; one subchannel per client, positions are client counters.
irmc::ChannelConfig request_channel(const GroupEntry& group, std::uint32_t f_e, const std::vector<NodeId>& agreement,
                                    std::uint32_t f_a, const ChannelParams& params);
// Agreement group -> execution group; subchannel 0, positions are agreement sequence numbers.
irmc::ChannelConfig commit_channel(const GroupEntry& group, std::uint32_t f_e, const std::vector<NodeId>& agreement,
                                   std::uint32_t f_a, const ChannelParams& params);

}  // namespace georep::replica
