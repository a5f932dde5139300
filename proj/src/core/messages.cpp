#include "georep/core/messages.hpp"

namespace georep {

NodeId signer_of(const Authenticator& a) {
  return std::visit([](const auto& x) { return x.signer; }, a);
}

std::string_view kind_name(RequestKind k) {
  switch (k) {
    case RequestKind::Update: return "update";
    case RequestKind::StrongRead: return "strong_read";
    case RequestKind::Admin: return "admin";
    case RequestKind::Noop: return "noop";
  }
  return "?";
}

Request make_noop() {
  Request r;
  r.request.write.kind = RequestKind::Noop;
  return r;
}

std::string to_string(const ChannelId& ch) {
  std::string k = ch.kind == ChannelKind::Request ? "req" : ch.kind == ChannelKind::Commit ? "commit" : "test";
  return k + ":" + std::to_string(ch.group.value);
}

namespace {
struct KindName {
  std::string_view operator()(const SignedWrite&) const { return "Write"; }
  std::string_view operator()(const ReadWeak&) const { return "ReadWeak"; }
  std::string_view operator()(const Result&) const { return "Result"; }
  std::string_view operator()(const SendMsg&) const { return "Send"; }
  std::string_view operator()(const MoveMsg&) const { return "Move"; }
  std::string_view operator()(const ShareMsg&) const { return "Share"; }
  std::string_view operator()(const CertificateMsg&) const { return "Certificate"; }
  std::string_view operator()(const ProgressMsg&) const { return "Progress"; }
  std::string_view operator()(const CheckpointMsg&) const { return "Checkpoint"; }
  std::string_view operator()(const CpAnnounce&) const { return "CpAnnounce"; }
  std::string_view operator()(const CpFetch&) const { return "CpFetch"; }
  std::string_view operator()(const CpState&) const { return "CpState"; }
  std::string_view operator()(const RegistryQuery&) const { return "RegistryQuery"; }
  std::string_view operator()(const RegistryReply&) const { return "RegistryReply"; }
  std::string_view operator()(const PrePrepare&) const { return "PrePrepare"; }
  std::string_view operator()(const Prepare&) const { return "Prepare"; }
  std::string_view operator()(const CommitPhase&) const { return "Commit"; }
  std::string_view operator()(const Suspect&) const { return "Suspect"; }
  std::string_view operator()(const ViewChange&) const { return "ViewChange"; }
  std::string_view operator()(const NewView&) const { return "NewView"; }
  std::string_view operator()(const Assign&) const { return "Assign"; }
  std::string_view operator()(const OrderForward&) const { return "OrderForward"; }
};
}  // namespace

std::string_view kind_name(const Message& m) { return std::visit(KindName{}, m); }

std::optional<ChannelId> channel_of(const Message& m) {
  return std::visit(
      [](const auto& x) -> std::optional<ChannelId> {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, SendMsg> || std::is_same_v<T, MoveMsg> || std::is_same_v<T, ShareMsg> ||
                      std::is_same_v<T, CertificateMsg> || std::is_same_v<T, ProgressMsg>) {
          return x.ch;
        } else {
          return std::nullopt;
        }
      },
      m);
}

}  // namespace georep
