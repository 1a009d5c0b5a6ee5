#ifndef FEDSIM_LATENCY_TABLE_HPP_
#define FEDSIM_LATENCY_TABLE_HPP_

#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "fedsim/agent_id.hpp"

namespace fedsim {

class MissingLatencyError : public std::runtime_error {
 public:
  MissingLatencyError(AgentId from, AgentId to)
      : std::runtime_error("no latency configured for " + from.name() + " -> " + to.name()), from_(from), to_(to) {}
  AgentId from() const { return from_; }
  AgentId to() const { return to_; }

 private:
  AgentId from_;
  AgentId to_;
};

// Directed one-way latencies in simulated seconds. A missing entry is an
// error, never an implicit zero.
class LatencyTable {
 public:
  void set(AgentId from, AgentId to, double seconds);
  void set_symmetric(AgentId a, AgentId b, double seconds) {
    set(a, b, seconds);
    set(b, a, seconds);
  }
  bool contains(AgentId from, AgentId to) const { return entries_.contains({from, to}); }
  double get(AgentId from, AgentId to) const;
  const std::map<std::pair<AgentId, AgentId>, double>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  bool operator==(const LatencyTable&) const = default;

 private:
  std::map<std::pair<AgentId, AgentId>, double> entries_;
};

}  // namespace fedsim

#endif  // FEDSIM_LATENCY_TABLE_HPP_
