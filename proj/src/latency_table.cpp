#include "fedsim/latency_table.hpp"

#include <cmath>

namespace fedsim {

void LatencyTable::set(AgentId from, AgentId to, double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
    throw std::invalid_argument("latency " + from.name() + " -> " + to.name() + " must be a nonnegative number");
  }
  entries_[{from, to}] = seconds;
}

double LatencyTable::get(AgentId from, AgentId to) const {
  auto it = entries_.find({from, to});
  if (it == entries_.end()) throw MissingLatencyError(from, to);
  return it->second;
}

}  // namespace fedsim
