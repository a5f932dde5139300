#include "georep/sim/trace.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "georep/core/crypto.hpp"

namespace georep {

namespace {

bool needs_escape(char c) {
  return c == '%' || c == '|' || c == ';' || c == '=' || static_cast<unsigned char>(c) < 0x20 ||
         static_cast<unsigned char>(c) >= 0x7f;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw std::invalid_argument("bad escape in trace field");
}

std::vector<std::string> split(const std::string& s, char sep, std::size_t max_parts) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (parts.size() + 1 < max_parts) {
    auto pos = s.find(sep, start);
    if (pos == std::string::npos) break;
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  parts.push_back(s.substr(start));
  return parts;
}

}  // namespace

std::string escape_field(const std::string& s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (needs_escape(c)) {
      auto u = static_cast<unsigned char>(c);
      out.push_back('%');
      out.push_back(kHex[u >> 4]);
      out.push_back(kHex[u & 0xf]);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%') {
      if (i + 2 >= s.size()) throw std::invalid_argument("truncated escape");
      out.push_back(static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2])));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

Detail& Detail::add(const std::string& key, const std::string& value) {
  if (!out_.empty()) out_.push_back(';');
  out_ += key;
  out_.push_back('=');
  out_ += escape_field(value);
  return *this;
}

std::map<std::string, std::string> parse_detail(const std::string& detail) {
  std::map<std::string, std::string> out;
  if (detail.empty()) return out;
  for (const auto& kv : split(detail, ';', std::string::npos)) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("detail entry without '=': " + kv);
    out[kv.substr(0, eq)] = unescape_field(kv.substr(eq + 1));
  }
  return out;
}

std::string node_label(NodeId id) { return std::to_string(id.value); }

std::string TraceRecord::line() const {
  std::string out = std::to_string(time);
  for (const std::string* f : {&event, &src, &dst, &kind, &digest, &detail}) {
    out.push_back('|');
    out += *f;
  }
  return out;
}

TraceRecord TraceRecord::parse(const std::string& line) {
  auto parts = split(line, '|', 7);
  if (parts.size() != 7) throw std::invalid_argument("trace line needs 7 fields: " + line);
  TraceRecord r;
  std::size_t used = 0;
  r.time = std::stoll(parts[0], &used);
  if (used != parts[0].size()) throw std::invalid_argument("bad time field: " + parts[0]);
  r.event = parts[1];
  r.src = parts[2];
  r.dst = parts[3];
  r.kind = parts[4];
  r.digest = parts[5];
  r.detail = parts[6];
  return r;
}

void TraceLog::add(SimTime t, std::string event, NodeId src, std::string kind, std::string detail,
                   std::string digest) {
  TraceRecord r;
  r.time = t;
  r.event = std::move(event);
  r.src = node_label(src);
  r.kind = std::move(kind);
  r.digest = std::move(digest);
  r.detail = std::move(detail);
  records_.push_back(std::move(r));
}

Digest TraceLog::digest() const {
  Bytes all;
  for (const auto& r : records_) {
    auto l = r.line();
    all.insert(all.end(), l.begin(), l.end());
    all.push_back('\n');
  }
  return sha256(all);
}

void TraceLog::write(std::ostream& os) const {
  for (const auto& r : records_) os << r.line() << '\n';
}

TraceLog TraceLog::read(std::istream& is) {
  TraceLog log(TraceLevel::Full);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    log.add(TraceRecord::parse(line));
  }
  return log;
}

}  // namespace georep
