#include "georep/sim/network.hpp"

#include <random>

#include "georep/core/crypto.hpp"

namespace georep {

bool Network::crashed(NodeId id) const {
  auto it = crash_time_.find(id);
  return it != crash_time_.end() && sim_.now() >= it->second;
}

bool Network::cross_region(NodeId a, NodeId b) const {
  return dir_.at(a).where.region != dir_.at(b).where.region;
}

SimTime Network::latency(NodeId a, NodeId b) const { return topo_.delay(dir_.at(a).where, dir_.at(b).where); }

std::optional<SimTime> Network::held_until(NodeId a, NodeId b, SimTime t, bool& drop) const {
  std::optional<SimTime> until;
  for (const auto& p : partitions_) {
    if (t < p.from || t >= p.to) continue;
    if ((p.isolated.count(a) != 0) == (p.isolated.count(b) != 0)) continue;
    if (p.drop) {
      drop = true;
      return std::nullopt;
    }
    until = std::max(until.value_or(p.to), p.to);
  }
  return until;
}

void Network::record_drop(NodeId from, NodeId to, const Packet& p, const char* why) {
  ++counters_.dropped;
  if (trace_.full()) {
    TraceRecord r;
    r.time = sim_.now();
    r.event = "drop";
    r.src = node_label(from);
    r.dst = node_label(to);
    r.kind = std::string(kind_name(p.msg));
    r.detail = Detail().add("why", why).str();
    trace_.add(std::move(r));
  }
}

void Network::send(NodeId from, NodeId to, std::shared_ptr<const Packet> packet) {
  ++counters_.sent;
  if (crashed(from)) return record_drop(from, to, *packet, "sender_crashed");
  if (!handlers_.count(to)) return record_drop(from, to, *packet, "no_such_node");

  const bool wan = cross_region(from, to);
  if (wan) {
    ++counters_.wan_messages;
    counters_.wan_bytes += packet->wire.size();
    std::string kind(kind_name(packet->msg));
    ++counters_.wan_by_kind[kind];
    counters_.wan_bytes_by_kind[kind] += packet->wire.size();
    if (auto ch = channel_of(packet->msg)) {
      std::string scoped = kind + "@" + (ch->kind == ChannelKind::Request  ? "request"
                                         : ch->kind == ChannelKind::Commit ? "commit"
                                                                           : "test");
      ++counters_.wan_by_kind[scoped];
      counters_.wan_bytes_by_kind[scoped] += packet->wire.size();
    }
  }

  SimTime arrival = sim_.now() + latency(from, to);
  if (topo_.jitter_ms() > 0) {
    std::uniform_int_distribution<SimTime> jitter(0, ms(topo_.jitter_ms()));
    arrival += jitter(sim_.rng());
  }
  if (wan && wan_loss_ > 0) {
    std::bernoulli_distribution lost(wan_loss_);
    if (lost(sim_.rng())) return record_drop(from, to, *packet, "loss");
  }
  bool drop = false;
  auto until = held_until(from, to, sim_.now(), drop);
  if (drop) return record_drop(from, to, *packet, "partition");
  if (until) arrival = std::max(arrival, *until + latency(from, to));

  auto& last = last_arrival_[{from, to}];
  arrival = std::max(arrival, last);
  last = arrival;

  if (trace_.full()) {
    TraceRecord r;
    r.time = sim_.now();
    r.event = "send";
    r.src = node_label(from);
    r.dst = node_label(to);
    r.kind = std::string(kind_name(packet->msg));
    r.digest = sha256(packet->wire).short_hex();
    r.detail = Detail().add("bytes", static_cast<std::uint64_t>(packet->wire.size())).add("at", arrival).str();
    trace_.add(std::move(r));
  }

  const std::uint32_t hops = sim_.causal_hops() + (wan ? 1 : 0);
  sim_.schedule_at(
      arrival, from, [this, from, to, packet = std::move(packet), hops] { deliver(from, to, packet, hops); }, hops);
}

void Network::deliver(NodeId from, NodeId to, const std::shared_ptr<const Packet>& packet, std::uint32_t hops) {
  if (crashed(to)) return record_drop(from, to, *packet, "receiver_crashed");
  ++counters_.delivered;
  if (trace_.full()) {
    TraceRecord r;
    r.time = sim_.now();
    r.event = "recv";
    r.src = node_label(from);
    r.dst = node_label(to);
    r.kind = std::string(kind_name(packet->msg));
    r.digest = sha256(packet->wire).short_hex();
    trace_.add(std::move(r));
  }
  Envelope env{from, to, packet, hops};
  handlers_.at(to)(env);
}

}  // namespace georep
