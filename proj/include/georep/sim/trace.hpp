#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "georep/core/types.hpp"
#include "georep/sim/simulator.hpp"

namespace georep {

enum class TraceLevel : std::uint8_t { Semantic = 0, Full = 1 };

// One line: time_us|event|src|dst|kind|digest|detail
struct TraceRecord {
  SimTime time = 0;
  std::string event;
  std::string src = "-";
  std::string dst = "-";
  std::string kind = "-";
  std::string digest = "-";
  std::string detail;

  std::string line() const;
  static TraceRecord parse(const std::string& line);  // throws std::invalid_argument
};

std::string node_label(NodeId id);

// key=value;key=value with %-escaping of the separators.
class Detail {
 public:
  Detail& add(const std::string& key, const std::string& value);
  Detail& add(const std::string& key, std::uint64_t value) { return add(key, std::to_string(value)); }
  Detail& add(const std::string& key, std::int64_t value) { return add(key, std::to_string(value)); }
  Detail& add(const std::string& key, std::uint32_t value) { return add(key, std::to_string(value)); }
  Detail& add(const std::string& key, int value) { return add(key, std::to_string(value)); }
  Detail& add(const std::string& key, const char* value) { return add(key, std::string(value)); }
  Detail& add(const std::string& key, const Bytes& value) { return add(key, to_string(value)); }
  std::string str() const { return out_; }

 private:
  std::string out_;
};

std::string escape_field(const std::string& s);
std::string unescape_field(const std::string& s);
std::map<std::string, std::string> parse_detail(const std::string& detail);

class TraceLog {
 public:
  explicit TraceLog(TraceLevel level = TraceLevel::Semantic) : level_(level) {}

  TraceLevel level() const { return level_; }
  bool full() const { return level_ == TraceLevel::Full; }

  void add(TraceRecord r) { records_.push_back(std::move(r)); }
  void add(SimTime t, std::string event, NodeId src, std::string kind, std::string detail,
           std::string digest = "-");

  const std::vector<TraceRecord>& records() const { return records_; }
  Digest digest() const;
  void write(std::ostream& os) const;
  static TraceLog read(std::istream& is);

 private:
  TraceLevel level_;
  std::vector<TraceRecord> records_;
};

}  // namespace georep
