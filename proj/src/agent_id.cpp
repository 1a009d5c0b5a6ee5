#include "fedsim/agent_id.hpp"

#include <charconv>

namespace fedsim {

namespace {
constexpr std::string_view kClientPrefix = "client_agent";
constexpr std::string_view kServerPrefix = "server_agent";
}  // namespace

std::optional<AgentId> AgentId::parse(std::string_view name) {
  AgentKind kind;
  std::string_view digits;
  if (name.starts_with(kClientPrefix)) {
    kind = AgentKind::Client;
    digits = name.substr(kClientPrefix.size());
  } else if (name.starts_with(kServerPrefix)) {
    kind = AgentKind::Server;
    digits = name.substr(kServerPrefix.size());
  } else {
    return std::nullopt;
  }
  if (digits.empty() || (digits.size() > 1 && digits.front() == '0')) return std::nullopt;
  int index = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || index < 0) return std::nullopt;
  return AgentId{kind, index};
}

std::string AgentId::name() const {
  std::string out(kind == AgentKind::Client ? kClientPrefix : kServerPrefix);
  out += std::to_string(index);
  return out;
}

}  // namespace fedsim
