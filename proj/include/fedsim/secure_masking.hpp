#ifndef FEDSIM_SECURE_MASKING_HPP_
#define FEDSIM_SECURE_MASKING_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedsim/agent_id.hpp"
#include "fedsim/random.hpp"
#include "fedsim/weight_matrix.hpp"

namespace fedsim::masking {

// Big-endian unsigned integer, always kGroupBytes long.
using BigInt = std::vector<std::uint8_t>;

// 2048-bit MODP group (RFC 3526, group 14), generator 2.
inline constexpr std::size_t kGroupBytes = 256;
BigInt group_prime();
// q = (p - 1) / 2, the order of the subgroup generated by g.
BigInt group_order();

std::string to_hex(std::span<const std::uint8_t> bytes);
BigInt from_hex(std::string_view hex);

struct DhKeyPair {
  BigInt secret;  // in [2, q - 1]
  BigInt public_value;  // g^secret mod p
};

using KeyMaterial = std::array<std::uint8_t, 32>;

struct CommonKey {
  AgentId first;  // canonical order: first < second
  AgentId second;
  KeyMaterial key_material{};
};

// Mask elements are uniform on the wire grid within [-kMaskBound, kMaskBound].
inline constexpr double kMaskBound = 1.0e6;
// Above this many participants intermediate masked sums could leave the
// exactly-representable range of the wire encoding.
inline constexpr int kMaxMaskedParticipants = 32;

DhKeyPair dh_generate(RandomStream& rng);

// Throws std::invalid_argument unless other_public lies in (1, p - 1).
CommonKey dh_common_key(const DhKeyPair& own, AgentId own_id, const BigInt& other_public, AgentId other_id);

// Pure function of (key, iteration, shape): element e of iteration t comes from
// SHA-256(key || t || e || retry).
WeightMatrix mask_tensor(const CommonKey& key, std::int64_t iteration, Shape shape);

// Per-owner set of pairwise keys, fixed after the offline key exchange.
class MaskSchedule {
 public:
  MaskSchedule() = default;
  explicit MaskSchedule(AgentId owner) : owner_(owner) {}

  AgentId owner() const { return owner_; }
  void add(const CommonKey& key);
  bool has_key_for(AgentId peer) const { return keys_.contains(peer); }
  const CommonKey& key_for(AgentId peer) const;
  std::size_t size() const { return keys_.size(); }
  const std::map<AgentId, CommonKey>& keys() const { return keys_; }

 private:
  AgentId owner_;
  std::map<AgentId, CommonKey> keys_;
};

// +1 when `self` precedes `peer` canonically, -1 otherwise.
int mask_sign(AgentId self, AgentId peer);

// w + sum over active peers of sign(owner, peer) * mask(key, iteration).
// `w` must be wire-encoded. Throws std::out_of_range naming the peer when a key
// is missing and std::invalid_argument when the owner is not in `active`.
WeightMatrix apply_masks(const WeightMatrix& w, const MaskSchedule& schedule, std::span<const AgentId> active,
                         std::int64_t iteration);

}  // namespace fedsim::masking

#endif  // FEDSIM_SECURE_MASKING_HPP_
