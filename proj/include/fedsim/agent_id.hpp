#ifndef FEDSIM_AGENT_ID_HPP_
#define FEDSIM_AGENT_ID_HPP_

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace fedsim {

enum class AgentKind { Server, Client };

// Agents are named "<kind>_agent<index>", e.g. client_agent0, server_agent0.
// Canonical ordering is by kind (servers first) then by numeric index, so
// client_agent2 precedes client_agent10.
struct AgentId {
  AgentKind kind = AgentKind::Client;
  int index = 0;

  static AgentId client(int index) { return {AgentKind::Client, index}; }
  static AgentId server(int index = 0) { return {AgentKind::Server, index}; }

  // Parses "client_agent<k>" / "server_agent<k>". Returns nullopt on anything else.
  static std::optional<AgentId> parse(std::string_view name);

  std::string name() const;
  bool is_client() const { return kind == AgentKind::Client; }

  auto operator<=>(const AgentId&) const = default;
};

}  // namespace fedsim

template <>
struct std::hash<fedsim::AgentId> {
  std::size_t operator()(const fedsim::AgentId& id) const noexcept {
    return std::hash<int>{}(id.index) ^ (id.kind == fedsim::AgentKind::Server ? 0x9e3779b9u : 0u);
  }
};

#endif  // FEDSIM_AGENT_ID_HPP_
