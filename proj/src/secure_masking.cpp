#include "fedsim/secure_masking.hpp"

#include <openssl/bn.h>
#include <openssl/evp.h>

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace fedsim::masking {

namespace {

struct BnDeleter {
  void operator()(BIGNUM* bn) const { BN_clear_free(bn); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* ctx) const { BN_CTX_free(ctx); }
};
using Bn = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtx = std::unique_ptr<BN_CTX, BnCtxDeleter>;

Bn new_bn() {
  Bn bn(BN_new());
  if (!bn) throw std::bad_alloc();
  return bn;
}

Bn bn_from_bytes(std::span<const std::uint8_t> bytes) {
  Bn bn(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
  if (!bn) throw std::bad_alloc();
  return bn;
}

BigInt bn_to_bytes(const BIGNUM* bn) {
  BigInt out(kGroupBytes);
  if (BN_bn2binpad(bn, out.data(), static_cast<int>(out.size())) < 0) {
    throw std::runtime_error("big integer does not fit the group size");
  }
  return out;
}

const BIGNUM* prime() {
  static const Bn p = [] {
    Bn bn(BN_get_rfc3526_prime_2048(nullptr));
    if (!bn) throw std::runtime_error("failed to load the RFC 3526 group");
    return bn;
  }();
  return p.get();
}

const BIGNUM* order() {
  static const Bn q = [] {
    Bn bn = new_bn();
    BN_rshift1(bn.get(), prime());
    return bn;
  }();
  return q.get();
}

void check(int ok, const char* what) {
  if (ok != 1) throw std::runtime_error(std::string("OpenSSL failure in ") + what);
}

KeyMaterial sha256(std::span<const std::uint8_t> data) {
  KeyMaterial digest{};
  unsigned int len = 0;
  check(EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr), "EVP_Digest");
  return digest;
}

void put_be(std::vector<std::uint8_t>& buf, std::uint64_t value, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) buf.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

// Mask values are k * kWireResolution with |k| <= kMaskUnits.
constexpr std::int64_t kMaskUnits = static_cast<std::int64_t>(kMaskBound / kWireResolution);
constexpr std::uint64_t kMaskRange = 2 * static_cast<std::uint64_t>(kMaskUnits) + 1;
static_assert(kMaskRange < (std::uint64_t{1} << 45));

}  // namespace

BigInt group_prime() { return bn_to_bytes(prime()); }
BigInt group_order() { return bn_to_bytes(order()); }

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

BigInt from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("invalid hex digit");
  };
  BigInt out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

DhKeyPair dh_generate(RandomStream& rng) {
  const int order_bits = BN_num_bits(order());
  const std::size_t nbytes = static_cast<std::size_t>((order_bits + 7) / 8);
  const int excess_bits = static_cast<int>(nbytes * 8) - order_bits;

  BnCtx ctx(BN_CTX_new());
  Bn two = new_bn();
  check(BN_set_word(two.get(), 2), "BN_set_word");

  std::vector<std::uint8_t> buf(nbytes);
  for (;;) {
    rng.fill_bytes(buf);
    buf[0] &= static_cast<std::uint8_t>(0xff >> excess_bits);
    Bn secret = bn_from_bytes(buf);
    // Accept only 2 <= secret <= q - 1.
    if (BN_cmp(secret.get(), two.get()) < 0 || BN_cmp(secret.get(), order()) >= 0) continue;

    Bn pub = new_bn();
    BN_set_flags(secret.get(), BN_FLG_CONSTTIME);
    check(BN_mod_exp_mont_consttime(pub.get(), two.get(), secret.get(), prime(), ctx.get(), nullptr),
          "BN_mod_exp_mont_consttime");
    return {bn_to_bytes(secret.get()), bn_to_bytes(pub.get())};
  }
}

CommonKey dh_common_key(const DhKeyPair& own, AgentId own_id, const BigInt& other_public, AgentId other_id) {
  if (own_id == other_id) throw std::invalid_argument("dh_common_key: an agent cannot pair with itself");
  Bn other = bn_from_bytes(other_public);
  Bn p_minus_1 = new_bn();
  check(BN_sub(p_minus_1.get(), prime(), BN_value_one()), "BN_sub");
  if (BN_cmp(other.get(), BN_value_one()) <= 0 || BN_cmp(other.get(), p_minus_1.get()) >= 0) {
    throw std::invalid_argument("dh_common_key: public value from " + other_id.name() +
                                " is outside the open interval (1, p - 1)");
  }
  BnCtx ctx(BN_CTX_new());
  Bn secret = bn_from_bytes(own.secret);
  BN_set_flags(secret.get(), BN_FLG_CONSTTIME);
  Bn shared = new_bn();
  check(BN_mod_exp_mont_consttime(shared.get(), other.get(), secret.get(), prime(), ctx.get(), nullptr),
        "BN_mod_exp_mont_consttime");
  BigInt shared_bytes = bn_to_bytes(shared.get());

  CommonKey key;
  key.first = std::min(own_id, other_id);
  key.second = std::max(own_id, other_id);
  key.key_material = sha256(shared_bytes);
  std::fill(shared_bytes.begin(), shared_bytes.end(), 0);
  return key;
}

WeightMatrix mask_tensor(const CommonKey& key, std::int64_t iteration, Shape shape) {
  WeightMatrix out(shape);
  std::vector<std::uint8_t> block;
  block.reserve(key.key_material.size() + 20);
  for (std::size_t e = 0; e < out.size(); ++e) {
    for (std::uint32_t retry = 0;; ++retry) {
      block.assign(key.key_material.begin(), key.key_material.end());
      put_be(block, static_cast<std::uint64_t>(iteration), 8);
      put_be(block, e, 8);
      put_be(block, retry, 4);
      const KeyMaterial digest = sha256(block);
      std::uint64_t word = 0;
      for (int i = 0; i < 8; ++i) word = (word << 8) | digest[static_cast<std::size_t>(i)];
      const std::uint64_t candidate = word >> 19;
      if (candidate < kMaskRange) {
        const auto units = static_cast<std::int64_t>(candidate) - kMaskUnits;
        out[e] = static_cast<double>(units) * kWireResolution;
        break;
      }
    }
  }
  return out;
}

void MaskSchedule::add(const CommonKey& key) {
  if (key.first != owner_ && key.second != owner_) {
    throw std::invalid_argument("MaskSchedule: key does not involve owner " + owner_.name());
  }
  const AgentId peer = key.first == owner_ ? key.second : key.first;
  if (keys_.contains(peer)) throw std::invalid_argument("MaskSchedule: duplicate key for " + peer.name());
  keys_.emplace(peer, key);
}

const CommonKey& MaskSchedule::key_for(AgentId peer) const {
  auto it = keys_.find(peer);
  if (it == keys_.end()) {
    throw std::out_of_range("no common key between " + owner_.name() + " and " + peer.name());
  }
  return it->second;
}

int mask_sign(AgentId self, AgentId peer) { return self < peer ? 1 : -1; }

WeightMatrix apply_masks(const WeightMatrix& w, const MaskSchedule& schedule, std::span<const AgentId> active,
                         std::int64_t iteration) {
  if (std::find(active.begin(), active.end(), schedule.owner()) == active.end()) {
    throw std::invalid_argument("apply_masks: " + schedule.owner().name() + " is not in the active set");
  }
  if (active.size() > static_cast<std::size_t>(kMaxMaskedParticipants)) {
    throw std::invalid_argument("apply_masks: too many participants for exact mask cancellation");
  }
  if (!on_wire_grid(w)) throw std::invalid_argument("apply_masks: weights must be wire-encoded");

  WeightMatrix masked = to_wire(w);
  for (AgentId peer : active) {
    if (peer == schedule.owner()) continue;
    const WeightMatrix mask = mask_tensor(schedule.key_for(peer), iteration, w.shape());
    const double sign = mask_sign(schedule.owner(), peer);
    for (std::size_t i = 0; i < masked.size(); ++i) masked[i] += sign * mask[i];
  }
  return masked;
}

}  // namespace fedsim::masking
