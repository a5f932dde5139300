#include "georep/replica/channels.hpp"

namespace georep::replica {

namespace {

irmc::ChannelConfig base(const ChannelParams& params) {
  irmc::ChannelConfig cfg;
  cfg.progress_period = params.progress_period;
  cfg.collector_timeout = params.collector_timeout;
  cfg.retransmit_period = params.retransmit_period;
  return cfg;
}

}  // namespace

irmc::ChannelConfig request_channel(const GroupEntry& group, std::uint32_t f_e, const std::vector<NodeId>& agreement,
                                    std::uint32_t f_a, const ChannelParams& params) {
  irmc::ChannelConfig cfg = base(params);
  cfg.id = ChannelId{ChannelKind::Request, group.id};
  cfg.senders = group.members;
  cfg.receivers = agreement;
  cfg.f_s = f_e;
  cfg.f_r = f_a;
  cfg.capacity = params.request_capacity;
  return cfg;
}

irmc::ChannelConfig commit_channel(const GroupEntry& group, std::uint32_t f_e, const std::vector<NodeId>& agreement,
                                   std::uint32_t f_a, const ChannelParams& params) {
  irmc::ChannelConfig cfg = base(params);
  cfg.id = ChannelId{ChannelKind::Commit, group.id};
  cfg.senders = agreement;
  cfg.receivers = group.members;
  cfg.f_s = f_a;
  cfg.f_r = f_e;
  cfg.capacity = params.commit_capacity;
  return cfg;
}

}  // namespace georep::replica
