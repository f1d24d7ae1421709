#include "brtm/crypto.hpp"

#include <sodium.h>

#include <array>
#include <cstring>
#include <stdexcept>

namespace brtm::crypto {

namespace {

using u64 = std::uint64_t;
__extension__ using u128 = unsigned __int128;
__extension__ using i128 = __int128;

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

void put_u64(Bytes& out, u64 v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

u64 get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  u64 v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<u64>(in[at + i]) << (8 * i);
  return v;
}

// ---- textbook RSA on 61-bit moduli ---------------------------------------

constexpr u64 kPublicExponent = 65537;
constexpr std::size_t kChunkBytes = 6;  // 48-bit plaintext blocks, always < n

u64 mulmod(u64 a, u64 b, u64 m) { return static_cast<u64>(static_cast<u128>(a) * b % m); }

u64 powmod(u64 base, u64 exp, u64 m) {
  u64 result = 1 % m;
  base %= m;
  while (exp) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

bool is_prime(u64 n) {
  if (n < 2) return false;
  for (u64 p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  u64 d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  // These bases are deterministic for every n < 2^64.
  for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    u64 x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

u64 random_prime(Rng& rng) {
  for (;;) {
    const u64 candidate = (1ULL << 30) | (rng() & ((1ULL << 30) - 1)) | 1ULL;
    if (is_prime(candidate)) return candidate;
  }
}

std::optional<u64> modinv(u64 a, u64 m) {
  i128 t = 0, new_t = 1;
  i128 r = m, new_r = a;
  while (new_r != 0) {
    const i128 q = r / new_r;
    t -= q * new_t;
    std::swap(t, new_t);
    r -= q * new_r;
    std::swap(r, new_r);
  }
  if (r != 1) return std::nullopt;
  if (t < 0) t += m;
  return static_cast<u64>(t);
}

class ToyRsa final : public Scheme {
 public:
  std::string_view name() const override { return "test"; }

  KeyPair generate(Rng& rng) const override {
    for (;;) {
      const u64 p = random_prime(rng);
      const u64 q = random_prime(rng);
      if (p == q) continue;
      const u64 phi = (p - 1) * (q - 1);
      const auto d = modinv(kPublicExponent, phi);
      if (!d) continue;
      const u64 n = p * q;
      KeyPair kp;
      put_u64(kp.public_key, n);
      put_u64(kp.public_key, kPublicExponent);
      put_u64(kp.secret_key, n);
      put_u64(kp.secret_key, *d);
      return kp;
    }
  }

  Bytes sign(std::span<const std::uint8_t> message, std::span<const std::uint8_t> secret_key) const override {
    if (secret_key.size() != 16) throw std::invalid_argument("malformed test-scheme secret key");
    const u64 n = get_u64(secret_key, 0);
    const u64 d = get_u64(secret_key, 8);
    Bytes sig;
    put_u64(sig, powmod(digest64(message) % n, d, n));
    return sig;
  }

  bool verify(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature,
              std::span<const std::uint8_t> public_key) const override {
    if (public_key.size() != 16 || signature.size() != 8) return false;
    const u64 n = get_u64(public_key, 0);
    const u64 e = get_u64(public_key, 8);
    const u64 s = get_u64(signature, 0);
    if (n == 0 || s >= n) return false;
    return powmod(s, e, n) == digest64(message) % n;
  }

  Bytes encrypt(std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> public_key) const override {
    if (public_key.size() != 16) throw std::invalid_argument("malformed test-scheme public key");
    const u64 n = get_u64(public_key, 0);
    const u64 e = get_u64(public_key, 8);
    Bytes frame;
    const auto len = static_cast<std::uint32_t>(plaintext.size());
    for (int i = 0; i < 4; ++i) frame.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    frame.insert(frame.end(), plaintext.begin(), plaintext.end());
    put_u64(frame, tag(plaintext, n));
    while (frame.size() % kChunkBytes) frame.push_back(0);

    Bytes out;
    for (std::size_t at = 0; at < frame.size(); at += kChunkBytes) {
      u64 m = 0;
      for (std::size_t i = 0; i < kChunkBytes; ++i) m |= static_cast<u64>(frame[at + i]) << (8 * i);
      put_u64(out, powmod(m, e, n));
    }
    return out;
  }

  std::optional<Bytes> decrypt(std::span<const std::uint8_t> ciphertext,
                               std::span<const std::uint8_t> secret_key) const override {
    if (secret_key.size() != 16 || ciphertext.empty() || ciphertext.size() % 8) return std::nullopt;
    const u64 n = get_u64(secret_key, 0);
    const u64 d = get_u64(secret_key, 8);
    Bytes frame;
    for (std::size_t at = 0; at < ciphertext.size(); at += 8) {
      const u64 c = get_u64(ciphertext, at);
      if (c >= n) return std::nullopt;
      const u64 m = powmod(c, d, n);
      if (m >> (8 * kChunkBytes)) return std::nullopt;
      for (std::size_t i = 0; i < kChunkBytes; ++i) frame.push_back(static_cast<std::uint8_t>(m >> (8 * i)));
    }
    if (frame.size() < 12) return std::nullopt;
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(frame[i]) << (8 * i);
    if (static_cast<std::size_t>(len) + 12 > frame.size()) return std::nullopt;
    Bytes plain(frame.begin() + 4, frame.begin() + 4 + len);
    if (get_u64(frame, 4 + len) != tag(plain, n)) return std::nullopt;
    for (std::size_t i = 12 + len; i < frame.size(); ++i) {
      if (frame[i] != 0) return std::nullopt;
    }
    return plain;
  }

 private:
  static u64 tag(std::span<const std::uint8_t> plaintext, u64 n) {
    Bytes buf(plaintext.begin(), plaintext.end());
    put_u64(buf, n);
    return digest64(buf);
  }
};

// ---- libsodium ------------------------------------------------------------

class Sodium final : public Scheme {
 public:
  Sodium() { ensure_sodium(); }

  std::string_view name() const override { return "sodium"; }

  KeyPair generate(Rng& rng) const override {
    std::array<std::uint8_t, 32> sign_seed{};
    std::array<std::uint8_t, 32> box_seed{};
    fill(sign_seed, rng);
    fill(box_seed, rng);
    std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES> spk{};
    std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> ssk{};
    std::array<std::uint8_t, crypto_box_PUBLICKEYBYTES> bpk{};
    std::array<std::uint8_t, crypto_box_SECRETKEYBYTES> bsk{};
    crypto_sign_seed_keypair(spk.data(), ssk.data(), sign_seed.data());
    crypto_box_seed_keypair(bpk.data(), bsk.data(), box_seed.data());
    KeyPair kp;
    kp.public_key.insert(kp.public_key.end(), spk.begin(), spk.end());
    kp.public_key.insert(kp.public_key.end(), bpk.begin(), bpk.end());
    kp.secret_key.insert(kp.secret_key.end(), ssk.begin(), ssk.end());
    kp.secret_key.insert(kp.secret_key.end(), bsk.begin(), bsk.end());
    kp.secret_key.insert(kp.secret_key.end(), bpk.begin(), bpk.end());
    return kp;
  }

  Bytes sign(std::span<const std::uint8_t> message, std::span<const std::uint8_t> secret_key) const override {
    if (secret_key.size() != kSecretSize) throw std::invalid_argument("malformed sodium secret key");
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_key.data());
    return sig;
  }

  bool verify(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature,
              std::span<const std::uint8_t> public_key) const override {
    if (public_key.size() != kPublicSize || signature.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(), public_key.data()) == 0;
  }

  Bytes encrypt(std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> public_key) const override {
    if (public_key.size() != kPublicSize) throw std::invalid_argument("malformed sodium public key");
    Bytes out(plaintext.size() + crypto_box_SEALBYTES);
    crypto_box_seal(out.data(), plaintext.data(), plaintext.size(), public_key.data() + crypto_sign_PUBLICKEYBYTES);
    return out;
  }

  std::optional<Bytes> decrypt(std::span<const std::uint8_t> ciphertext,
                               std::span<const std::uint8_t> secret_key) const override {
    if (secret_key.size() != kSecretSize || ciphertext.size() < crypto_box_SEALBYTES) return std::nullopt;
    Bytes out(ciphertext.size() - crypto_box_SEALBYTES);
    const std::uint8_t* bsk = secret_key.data() + crypto_sign_SECRETKEYBYTES;
    const std::uint8_t* bpk = bsk + crypto_box_SECRETKEYBYTES;
    if (crypto_box_seal_open(out.data(), ciphertext.data(), ciphertext.size(), bpk, bsk) != 0) return std::nullopt;
    return out;
  }

 private:
  static constexpr std::size_t kPublicSize = crypto_sign_PUBLICKEYBYTES + crypto_box_PUBLICKEYBYTES;
  static constexpr std::size_t kSecretSize =
      crypto_sign_SECRETKEYBYTES + crypto_box_SECRETKEYBYTES + crypto_box_PUBLICKEYBYTES;

  static void fill(std::array<std::uint8_t, 32>& seed, Rng& rng) {
    for (std::size_t i = 0; i < seed.size(); i += 8) {
      const u64 v = rng();
      std::memcpy(seed.data() + i, &v, 8);
    }
  }
};

}  // namespace

std::unique_ptr<Scheme> make_test_scheme() { return std::make_unique<ToyRsa>(); }

std::unique_ptr<Scheme> make_sodium_scheme() { return std::make_unique<Sodium>(); }

std::unique_ptr<Scheme> make_scheme(std::string_view name) {
  if (name == "test") return make_test_scheme();
  if (name == "sodium") return make_sodium_scheme();
  throw std::invalid_argument("unknown crypto scheme '" + std::string(name) + "'");
}

Bytes hash(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Bytes out(crypto_generichash_BYTES);
  crypto_generichash(out.data(), out.size(), data.data(), data.size(), nullptr, 0);
  return out;
}

std::uint64_t digest64(std::span<const std::uint8_t> data) {
  const Bytes h = hash(data);
  return get_u64(h, 0);
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

}  // namespace brtm::crypto
