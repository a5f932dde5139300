#include "georep/irmc/conformance.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "georep/core/crypto.hpp"
#include "georep/sim/network.hpp"
#include "georep/sim/runtime.hpp"

namespace georep::irmc {

std::unique_ptr<SenderEndpoint> make_rc_sender(ChannelConfig cfg, Runtime& rt);
std::unique_ptr<ReceiverEndpoint> make_rc_receiver(ChannelConfig cfg, Runtime& rt);
std::unique_ptr<SenderEndpoint> make_sc_sender(ChannelConfig cfg, Runtime& rt);
std::unique_ptr<ReceiverEndpoint> make_sc_receiver(ChannelConfig cfg, Runtime& rt);

EndpointFactory factory_for(Variant v) {
  if (v == Variant::Rc) return {"rc", make_rc_sender, make_rc_receiver};
  return {"sc", make_sc_sender, make_sc_receiver};
}

bool ConformanceReport::passed() const { return total_violations() == 0 && schedules > 0; }

std::size_t ConformanceReport::total_violations() const {
  std::size_t n = 0;
  for (const auto& [k, v] : violations) n += v;
  return n;
}

namespace {

Bytes honest_payload(Subchannel sc, Position p) {
  return to_bytes("v:" + std::to_string(sc) + ":" + std::to_string(p));
}

Bytes evil_payload(Subchannel sc, Position p, std::uint64_t salt) {
  return to_bytes("evil:" + std::to_string(sc) + ":" + std::to_string(p) + ":" + std::to_string(salt));
}

std::size_t index_of(const std::vector<NodeId>& v, NodeId id) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), id) - v.begin());
}

bool is_evil(const Bytes& b) { return b.size() >= 5 && std::equal(b.begin(), b.begin() + 5, "evil:"); }

struct Host final : Node {
  using Node::Node;
  std::function<void(const Envelope&)> route;
  void on_message(const Envelope& env) override {
    if (route) route(env);
  }
};

enum class Misbehavior { Withhold, Garble, Inflate, Equivocate };

struct Plan {
  Position last = 1;
  std::optional<std::pair<Position, Position>> skip;  // at position k jump to q
};

class Schedule {
 public:
  Schedule(const EndpointFactory& factory, const ConformanceOptions& opts, std::uint64_t seed, ConformanceReport& report)
      : factory_(factory),
        f_(opts.f),
        seed_(seed),
        rng_(seed),
        sim_(seed),
        trace_(opts.replay ? TraceLevel::Full : TraceLevel::Semantic),
        crypto_(seed),
        net_(sim_, topo_, dir_, trace_),
        report_(report) {
    faulty_enabled_ = opts.faulty;
    lossy_ = std::bernoulli_distribution(opts.lossy_fraction)(rng_);
    build();
  }

  void run() {
    start();
    sim_.run_while([this] { return !finished(); }, ms(120000));
    check_end();
  }

  const TraceLog& trace() const { return trace_; }

 private:
  std::uint64_t pick(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
  }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  void violation(const std::string& property, const std::string& what) {
    ++report_.violations[property];
    if (report_.examples.size() < 10) report_.examples.push_back(factory_.name + " seed=" + std::to_string(seed_) + " " + property + ": " + what);
  }

  void build() {
    n_s_ = 2 * f_ + 1 + pick(0, f_);
    n_r_ = 2 * f_ + 1 + pick(0, f_);
    const double wan = static_cast<double>(pick(5, 60));
    topo_.set_delay("S", "R", wan);
    topo_.set_jitter(static_cast<double>(pick(0, 20)));
    if (lossy_) net_.set_wan_loss(0.1);

    cfg_.id = ChannelId{ChannelKind::Test, GroupId{1}};
    cfg_.f_s = f_;
    cfg_.f_r = f_;
    cfg_.capacity = pick(1, 4);
    cfg_.progress_period = ms(20);
    cfg_.collector_timeout = ms(80);
    cfg_.retransmit_period = lossy_ ? ms(100) : 0;

    std::uint32_t next = 1;
    for (std::size_t i = 0; i < n_s_; ++i) {
      NodeId id{next++};
      cfg_.senders.push_back(id);
      dir_.add(NodeInfo{id, Role::Agreement, GroupId{1}, static_cast<std::uint32_t>(i), {"S", static_cast<std::uint32_t>(i % 3)}});
    }
    for (std::size_t i = 0; i < n_r_; ++i) {
      NodeId id{next++};
      cfg_.receivers.push_back(id);
      dir_.add(NodeInfo{id, Role::Execution, GroupId{2}, static_cast<std::uint32_t>(i), {"R", static_cast<std::uint32_t>(i % 3)}});
    }

    // the last f of each side misbehave
    for (std::size_t i = 0; i < n_s_; ++i) sender_correct_.push_back(!faulty_enabled_ || i < n_s_ - f_);
    for (std::size_t i = 0; i < n_r_; ++i) receiver_correct_.push_back(!faulty_enabled_ || i < n_r_ - f_);

    const std::size_t subchannels = pick(1, 3);
    for (Subchannel sc = 0; sc < subchannels; ++sc) {
      Plan plan;
      plan.last = pick(2, 12);
      if (chance(0.3)) {
        Position k = pick(1, plan.last - 1);
        plan.skip = std::make_pair(k, pick(k + 1, plan.last));
      }
      plans_[sc] = plan;
    }

    for (NodeId id : cfg_.senders) add_host(id);
    for (NodeId id : cfg_.receivers) add_host(id);
    for (std::size_t i = 0; i < n_s_; ++i) {
      senders_.push_back(factory_.sender(cfg_, *rts_[i]));
      hosts_[i]->route = [ep = senders_.back().get()](const Envelope& e) { ep->handle(e); };
    }
    for (std::size_t j = 0; j < n_r_; ++j) {
      receivers_.push_back(factory_.receiver(cfg_, *rts_[n_s_ + j]));
      hosts_[n_s_ + j]->route = [ep = receivers_.back().get()](const Envelope& e) { ep->handle(e); };
    }
    for (std::size_t i = 0; i < n_s_; ++i) {
      if (!sender_correct_[i]) rts_[i]->out().set_interceptor(misbehave(static_cast<Misbehavior>(pick(0, 3))));
    }
    for (std::size_t j = 0; j < n_r_; ++j) {
      if (!receiver_correct_[j]) {
        rts_[n_s_ + j]->out().set_interceptor(misbehave(static_cast<Misbehavior>(pick(0, 2))));
      }
    }
  }

  void add_host(NodeId id) {
    crypto_.register_principal(id);
    rts_.push_back(std::make_unique<Runtime>(sim_, net_, crypto_, trace_, id));
    hosts_.push_back(std::make_unique<Host>(*rts_.back()));
    net_.attach(id, [h = hosts_.back().get()](const Envelope& e) { h->receive(e); });
  }

  Interceptor misbehave(Misbehavior how) {
    return [this, how](NodeId to, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
      ++report_.faulty_messages;
      using Out = std::vector<std::pair<NodeId, Message>>;
      switch (how) {
        case Misbehavior::Withhold:
          if (chance(0.7)) return Out{};
          return std::nullopt;
        case Misbehavior::Garble: {
          Message g = m;
          if (auto* s = std::get_if<SendMsg>(&g)) s->m = evil_payload(s->sc, s->p, pick(0, 9));
          if (auto* c = std::get_if<CertificateMsg>(&g)) c->m = evil_payload(c->sc, c->p, pick(0, 9));
          if (auto* sh = std::get_if<ShareMsg>(&g)) sh->d = sha256(evil_payload(sh->sc, sh->p, 0));
          if (auto* mv = std::get_if<MoveMsg>(&g)) {
            if (chance(0.5)) mv->collector = cfg_.senders[pick(0, n_s_ - 1)];
          }
          return Out{{to, g}};
        }
        case Misbehavior::Inflate: {
          Message g = m;
          if (auto* mv = std::get_if<MoveMsg>(&g)) {
            for (auto& e : mv->entries) e.p += pick(1, 50);
          }
          if (auto* pr = std::get_if<ProgressMsg>(&g)) {
            for (auto& e : pr->positions) e.p += pick(1, 50);
          }
          return Out{{to, g}};
        }
        case Misbehavior::Equivocate: {
          if (index_of(cfg_.receivers, to) % 2 == 0) return std::nullopt;
          Message g = m;
          if (auto* s = std::get_if<SendMsg>(&g)) s->m = evil_payload(s->sc, s->p, to.value);
          if (auto* c = std::get_if<CertificateMsg>(&g)) c->m = evil_payload(c->sc, c->p, to.value);
          return Out{{to, g}};
        }
      }
      return std::nullopt;
    };
  }

  // Raw forged traffic from faulty principals, authenticated with their own keys only.
  void inject(std::size_t host) {
    rts_[host]->after(ms(static_cast<double>(pick(2, 15))), [this, host] {
      if (finished()) return;
      const bool is_sender = host < n_s_;
      const NodeId self = rts_[host]->self();
      const Subchannel sc = pick(0, plans_.size() - 1);
      const Position p = pick(1, plans_[sc].last + 5);
      const auto& targets = is_sender ? cfg_.receivers : cfg_.senders;
      const NodeId to = targets[pick(0, targets.size() - 1)];
      Message m;
      switch (pick(0, 3)) {
        case 0:
          m = SendMsg{cfg_.id, sc, p, evil_payload(sc, p, 99)};
          break;
        case 1: {
          Bytes evil = evil_payload(sc, p, 7);
          Signature sig = crypto_.signer_for(self).sign(encode(Message{ShareMsg{cfg_.id, sc, p, sha256(evil)}}));
          m = CertificateMsg{cfg_.id, sc, p, evil, std::vector<Signature>(f_ + 1, sig)};
          break;
        }
        case 2:
          m = ProgressMsg{cfg_.id, {MoveEntry{sc, p + 100}}};
          break;
        default:
          m = MoveMsg{cfg_.id, pick(1, 1000), {MoveEntry{sc, p + pick(0, 40)}},
                      cfg_.senders[pick(0, n_s_ - 1)]};
          break;
      }
      ++report_.faulty_messages;
      net_.send(self, to, seal(crypto_.signer_for(self), std::move(m), AuthKind::Signature, {to}));
      inject(host);
    });
  }

  void describe() {
    Detail d;
    d.add("n_s", n_s_).add("n_r", n_r_).add("capacity", cfg_.capacity).add("lossy", lossy_ ? 1 : 0);
    for (const auto& [sc, plan] : plans_) {
      std::string v = std::to_string(plan.last);
      if (plan.skip) v += " skip " + std::to_string(plan.skip->first) + "->" + std::to_string(plan.skip->second);
      d.add("sc" + std::to_string(sc), v);
    }
    trace_.add(TraceRecord{0, "meta", "-", "-", "schedule", "-", d.str()});
  }

  void start() {
    describe();
    for (std::size_t i = 0; i < n_s_; ++i) {
      for (const auto& [sc, plan] : plans_) {
        if (sender_correct_[i]) {
          rts_[i]->after(ms(static_cast<double>(pick(0, 10))), [this, i, sc = sc] { sender_step(i, sc, 1); });
        } else {
          for (Position p = 1; p <= plan.last; ++p) {
            if (chance(0.6)) senders_[i]->send(sc, p, evil_payload(sc, p, i), nullptr);
          }
        }
      }
      if (!sender_correct_[i]) inject(i);
    }
    for (std::size_t j = 0; j < n_r_; ++j) {
      if (!receiver_correct_[j]) {
        inject(n_s_ + j);
        continue;
      }
      for (const auto& [sc, plan] : plans_) {
        cursor_[{j, sc}] = 1;
        receiver_step(j, sc);
      }
    }
    sample_windows();
  }

  void sender_step(std::size_t i, Subchannel sc, Position p) {
    const Plan& plan = plans_[sc];
    if (plan.skip && p == plan.skip->first) {
      record_move(sc, plan.skip->second);
      senders_[i]->move_window(sc, plan.skip->second);
      p = plan.skip->second;
    }
    if (p > plan.last) return;
    ++pending_sends_;
    correct_sent_.insert({sc, p});
    rts_[i]->after(ms(static_cast<double>(pick(0, 5))), [this, i, sc, p] {
      senders_[i]->send(sc, p, honest_payload(sc, p), [this, i, sc, p] {
        --pending_sends_;
        sender_step(i, sc, p + 1);
      });
    });
  }

  void receiver_step(std::size_t j, Subchannel sc) {
    const Position want = cursor_[{j, sc}];
    receivers_[j]->receive(sc, want, [this, j, sc, want](ReceiveResult r) {
      Position& cur = cursor_[{j, sc}];
      if (const auto* m = std::get_if<Bytes>(&r)) {
        ++report_.deliveries;
        if (is_evil(*m) || *m != honest_payload(sc, want) || !correct_sent_.count({sc, want})) {
          violation("quorum_delivery", "delivered unbacked payload at sc=" + std::to_string(sc) +
                                              " p=" + std::to_string(want) + ": " + to_string(*m));
        }
        cur = want + 1;
      } else {
        const Position q = std::get<TooOld>(r).start;
        ++report_.too_old;
        if (q <= want) violation("justified_too_old", "TooOld does not pass requested position");
        if (max_move_[sc] < q) {
          violation("justified_too_old", "TooOld{" + std::to_string(q) + "} without a correct move at sc=" +
                                               std::to_string(sc));
        }
        cur = q;
      }
      const Position next = cur;
      rts_[cfg_.senders.size() + j]->after(ms(static_cast<double>(pick(0, 5))), [this, j, sc, next] {
        record_move(sc, next);
        receivers_[j]->move_window(sc, next);
        receiver_step(j, sc);
      });
    });
  }

  void record_move(Subchannel sc, Position p) { max_move_[sc] = std::max(max_move_[sc], p); }

  void sample_windows() {
    for (std::size_t i = 0; i < n_s_; ++i) {
      if (!sender_correct_[i]) continue;
      for (const auto& [sc, plan] : plans_) check_monotone({0, i, sc}, senders_[i]->window(sc).start);
    }
    for (std::size_t j = 0; j < n_r_; ++j) {
      if (!receiver_correct_[j]) continue;
      for (const auto& [sc, plan] : plans_) check_monotone({1, j, sc}, receivers_[j]->window(sc).start);
    }
    if (!finished()) sim_.schedule_after(ms(3), NodeId{0}, [this] { sample_windows(); });
  }

  void check_monotone(std::tuple<int, std::size_t, Subchannel> key, Position start) {
    Position& last = window_seen_[key];
    if (start < last) violation("window monotonicity", "window start decreased");
    last = std::max(last, start);
  }

  bool finished() const {
    if (pending_sends_ > 0) return false;
    for (std::size_t j = 0; j < n_r_; ++j) {
      if (!receiver_correct_[j]) continue;
      for (const auto& [sc, plan] : plans_) {
        if (cursor_.at({j, sc}) <= plan.last) return false;
      }
    }
    return true;
  }

  void check_end() {
    ++report_.schedules;
    if (pending_sends_ > 0) {
      violation("send_progress", std::to_string(pending_sends_) + " correct sends never returned");
    }
    for (std::size_t j = 0; j < n_r_; ++j) {
      if (!receiver_correct_[j]) continue;
      for (const auto& [sc, plan] : plans_) {
        if (cursor_.at({j, sc}) <= plan.last) {
          violation("receive_progress", "receiver stuck at sc=" + std::to_string(sc) + " p=" +
                                           std::to_string(cursor_.at({j, sc})));
        }
        // every correct sender that skipped moved to q, so receivers must be at or past it
        if (plan.skip && receivers_[j]->window(sc).start < plan.skip->second) {
          violation("window_progress", "receiver window behind the correct senders' move");
        }
      }
    }
  }

  const EndpointFactory& factory_;
  std::uint32_t f_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  bool faulty_enabled_ = true;
  bool lossy_ = false;
  Simulator sim_;
  Topology topo_;
  Directory dir_;
  TraceLog trace_;
  CryptoProvider crypto_;
  Network net_;
  ConformanceReport& report_;

  std::size_t n_s_ = 0;
  std::size_t n_r_ = 0;
  ChannelConfig cfg_;
  std::vector<std::unique_ptr<Runtime>> rts_;
  std::vector<std::unique_ptr<Host>> hosts_;
  std::vector<std::unique_ptr<SenderEndpoint>> senders_;
  std::vector<std::unique_ptr<ReceiverEndpoint>> receivers_;
  std::vector<bool> sender_correct_;
  std::vector<bool> receiver_correct_;
  std::map<Subchannel, Plan> plans_;
  std::set<std::pair<Subchannel, Position>> correct_sent_;
  std::map<std::pair<std::size_t, Subchannel>, Position> cursor_;
  std::map<Subchannel, Position> max_move_;
  std::map<std::tuple<int, std::size_t, Subchannel>, Position> window_seen_;
  std::int64_t pending_sends_ = 0;
};

}  // namespace

ConformanceReport run_conformance(const EndpointFactory& factory, const ConformanceOptions& opts) {
  ConformanceReport report;
  if (opts.replay) {
    Schedule s(factory, opts, *opts.replay, report);
    s.run();
    for (const auto& r : s.trace().records()) report.trace.push_back(r.line());
    return report;
  }
  std::mt19937_64 seeds(opts.seed);
  for (std::size_t i = 0; i < opts.schedules; ++i) {
    Schedule s(factory, opts, seeds(), report);
    s.run();
  }
  return report;
}

}  // namespace georep::irmc
