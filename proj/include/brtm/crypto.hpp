#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brtm/rng.hpp"

namespace brtm::crypto {

using Bytes = std::vector<std::uint8_t>;

struct KeyPair {
  Bytes public_key;
  Bytes secret_key;
};

/// Asymmetric signing and public-key encryption behind one interface, so the
/// trading protocol can run over a deterministic test scheme or a real one.
class Scheme {
 public:
  virtual ~Scheme() = default;

  virtual std::string_view name() const = 0;

  /// Draws key material from `rng`; successive calls give distinct keys.
  virtual KeyPair generate(Rng& rng) const = 0;

  virtual Bytes sign(std::span<const std::uint8_t> message, std::span<const std::uint8_t> secret_key) const = 0;
  virtual bool verify(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature,
                      std::span<const std::uint8_t> public_key) const = 0;

  virtual Bytes encrypt(std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> public_key) const = 0;
  /// Empty on any failure, including a key that does not match.
  virtual std::optional<Bytes> decrypt(std::span<const std::uint8_t> ciphertext,
                                       std::span<const std::uint8_t> secret_key) const = 0;
};

/// Textbook RSA over ~61-bit moduli with an integrity tag inside each
/// ciphertext. Fully deterministic, insecure, for tests and reproducible runs.
std::unique_ptr<Scheme> make_test_scheme();

/// Ed25519 signatures and X25519 sealed boxes (libsodium). Keys derive from
/// the rng; sealed-box ciphertexts are randomized.
std::unique_ptr<Scheme> make_sodium_scheme();

std::unique_ptr<Scheme> make_scheme(std::string_view name);

/// 32-byte BLAKE2b digest.
Bytes hash(std::span<const std::uint8_t> data);
std::uint64_t digest64(std::span<const std::uint8_t> data);

std::string to_hex(std::span<const std::uint8_t> data);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace brtm::crypto
