#pragma once

#include "bytes.hpp"

#include <sodium.h>

#include <array>

namespace teb {
namespace crypto {

inline void
init()
{
  static const int rc = sodium_init();
  if (rc < 0)
    throw Error("CryptoInit", "libsodium initialization failed");
}

using Digest = std::array<uint8_t, 32>;

inline Digest
sha256(BytesView in)
{
  init();
  Digest d;
  crypto_hash_sha256(d.data(), in.data(), in.size());
  return d;
}

inline Bytes
sha256Bytes(BytesView in)
{
  Digest d = sha256(in);
  return Bytes(d.begin(), d.end());
}

/// First n hex characters of SHA-256(in); short content-derived identifiers.
inline std::string
digestHex(BytesView in, size_t n)
{
  Digest d = sha256(in);
  std::string hex = toHex(BytesView(d.data(), (n + 1) / 2));
  hex.resize(n);
  return hex;
}

/** Deterministic SHA-256 counter generator. All randomness in the library
 *  flows from one of these so a scenario seed fixes every byte on the wire.
 *  fork() derives an independent child stream without disturbing the parent.
 */
class Drbg
{
public:
  explicit Drbg(uint64_t seed)
  {
    Writer w;
    w.str("teb-drbg-v1");
    w.u64(seed);
    m_state = sha256(w.out());
  }

  explicit Drbg(const Digest& state)
    : m_state(state)
  {
  }

  Drbg
  fork(std::string_view label)
  {
    Writer w;
    w.raw(m_state);
    w.u8(0x46); // domain separator between fork and block derivation
    w.str(label);
    return Drbg(sha256(w.out()));
  }

  void
  fill(uint8_t* out, size_t n)
  {
    while (n > 0) {
      Writer w;
      w.raw(m_state);
      w.u8(0x42);
      w.u64(m_counter++);
      Digest block = sha256(w.out());
      size_t take = std::min(n, block.size());
      std::memcpy(out, block.data(), take);
      out += take;
      n -= take;
    }
  }

  Bytes
  bytes(size_t n)
  {
    Bytes b(n);
    fill(b.data(), n);
    return b;
  }

  uint64_t
  u64()
  {
    uint8_t b[8];
    fill(b, 8);
    uint64_t v = 0;
    for (uint8_t x : b)
      v = (v << 8) | x;
    return v;
  }

  uint64_t
  below(uint64_t bound)
  {
    return bound == 0 ? 0 : u64() % bound;
  }

private:
  Digest m_state{};
  uint64_t m_counter = 0;
};

// ---- asymmetric keys (Ed25519) ----

struct AsymKeyPair
{
  Bytes pub;  // 32 bytes
  Bytes priv; // 64 bytes (libsodium secret key format)

  bool
  operator==(const AsymKeyPair&) const = default;
};

/// Deterministic key pair; seed material of any length is hashed down.
inline AsymKeyPair
keyPairFromSeed(BytesView seed)
{
  init();
  Digest s = sha256(seed);
  AsymKeyPair kp;
  kp.pub.resize(crypto_sign_PUBLICKEYBYTES);
  kp.priv.resize(crypto_sign_SECRETKEYBYTES);
  crypto_sign_seed_keypair(kp.pub.data(), kp.priv.data(), s.data());
  return kp;
}

inline AsymKeyPair
generateKeyPair(Drbg& rng)
{
  return keyPairFromSeed(rng.bytes(32));
}

inline Bytes
sign(BytesView priv, BytesView msg)
{
  init();
  if (priv.size() != crypto_sign_SECRETKEYBYTES)
    throw Error("CryptoUsage", "bad Ed25519 private key size");
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), priv.data());
  return sig;
}

inline bool
verify(BytesView pub, BytesView msg, BytesView sig)
{
  init();
  if (pub.size() != crypto_sign_PUBLICKEYBYTES || sig.size() != crypto_sign_BYTES)
    return false;
  return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pub.data()) == 0;
}

// ---- symmetric keys, AEAD, MAC ----

struct SymKey
{
  std::array<uint8_t, 32> k{};

  static SymKey
  fromBytes(BytesView b)
  {
    if (b.size() != 32)
      throw Error("CryptoUsage", "symmetric key must be 32 bytes");
    SymKey key;
    std::memcpy(key.k.data(), b.data(), 32);
    return key;
  }

  static SymKey
  random(Drbg& rng)
  {
    SymKey key;
    rng.fill(key.k.data(), key.k.size());
    return key;
  }

  BytesView
  view() const
  {
    return BytesView(k.data(), k.size());
  }

  auto
  operator<=>(const SymKey&) const = default;
};

/** X25519 agreement between two Ed25519 key pairs (keys are converted).
 *  Symmetric: dh(a.priv, b.pub) == dh(b.priv, a.pub). The shared secret is
 *  hashed so the result is directly usable as an AEAD key.
 */
inline SymKey
dh(BytesView edPriv, BytesView edPub)
{
  init();
  if (edPriv.size() != crypto_sign_SECRETKEYBYTES || edPub.size() != crypto_sign_PUBLICKEYBYTES)
    throw InvalidPoint("bad key size for key agreement");
  uint8_t xpub[crypto_scalarmult_BYTES];
  if (crypto_sign_ed25519_pk_to_curve25519(xpub, edPub.data()) != 0)
    throw InvalidPoint("public key is not convertible to Curve25519");
  uint8_t xpriv[crypto_scalarmult_SCALARBYTES];
  crypto_sign_ed25519_sk_to_curve25519(xpriv, edPriv.data());
  uint8_t q[crypto_scalarmult_BYTES];
  int rc = crypto_scalarmult(q, xpriv, xpub);
  sodium_memzero(xpriv, sizeof(xpriv));
  if (rc != 0)
    throw InvalidPoint("key agreement produced a degenerate point");
  return SymKey{sha256(BytesView(q, sizeof(q)))};
}

/** ChaCha20-Poly1305 with a counter nonce. The 96-bit nonce is four zero
 *  bytes plus the big-endian counter and is carried in front of the
 *  ciphertext; callers must not reuse a counter under the same key.
 */
inline Bytes
aeadEncrypt(const SymKey& key, BytesView plain, BytesView ad = {}, uint64_t counter = 0)
{
  init();
  Bytes out(12 + plain.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
  std::memset(out.data(), 0, 4);
  for (int i = 0; i < 8; ++i)
    out[4 + i] = static_cast<uint8_t>(counter >> (8 * (7 - i)));
  unsigned long long clen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data() + 12, &clen, plain.data(), plain.size(),
                                            ad.data(), ad.size(), nullptr, out.data(),
                                            key.k.data());
  out.resize(12 + clen);
  return out;
}

inline Bytes
aeadDecrypt(const SymKey& key, BytesView box, BytesView ad = {})
{
  init();
  if (box.size() < 12 + crypto_aead_chacha20poly1305_ietf_ABYTES)
    throw AuthFailure("ciphertext too short");
  Bytes plain(box.size() - 12 - crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long plen = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(plain.data(), &plen, nullptr, box.data() + 12,
                                                box.size() - 12, ad.data(), ad.size(), box.data(),
                                                key.k.data()) != 0)
    throw AuthFailure("AEAD authentication failed");
  plain.resize(plen);
  return plain;
}

inline Bytes
hmac(const SymKey& key, BytesView msg)
{
  init();
  Bytes mac(crypto_auth_hmacsha256_BYTES);
  crypto_auth_hmacsha256(mac.data(), msg.data(), msg.size(), key.k.data());
  return mac;
}

inline bool
hmacVerify(const SymKey& key, BytesView msg, BytesView mac)
{
  init();
  if (mac.size() != crypto_auth_hmacsha256_BYTES)
    return false;
  return crypto_auth_hmacsha256_verify(mac.data(), msg.data(), msg.size(), key.k.data()) == 0;
}

// ---- password-authenticated key exchange ----

enum class PakeRole {
  Initiator,
  Responder,
};

enum class PakeKind {
  Spake2, // SPAKE2 over ristretto255
  DhMac,  // test-grade: plain DH with the password bound into the transcript
};

constexpr PakeKind
defaultPakeKind()
{
#if defined(TEB_PAKE_DEFAULT_DHMAC)
  return PakeKind::DhMac;
#else
  return PakeKind::Spake2;
#endif
}

/** One side of a PAKE session. Usage is start() -> exchange shares ->
 *  finish(peerShare) -> exchange confirmation tags -> confirm(peerTag).
 *  finish() always yields a key; only confirm() reveals whether the peer
 *  used the same password. Both constructions share this shape, so the
 *  choice is a build-time default (TEB_PAKE) with a per-session override.
 *
 *  The DhMac construction offers no offline-guessing resistance (the
 *  password enters only via the key-confirmation transcript); it exists so
 *  the protocol layer can be exercised without the group arithmetic.
 */
class Pake
{
public:
  Pake(PakeRole role, std::string_view password, Drbg rng, PakeKind kind = defaultPakeKind())
    : m_role(role)
    , m_kind(kind)
    , m_rng(std::move(rng))
    , m_password(toBytes(password))
  {
    init();
  }

  Bytes
  start()
  {
    if (m_started)
      throw ProtocolOrder("pake start() called twice");
    m_started = true;
    if (m_kind == PakeKind::Spake2) {
      uint8_t wide[64];
      m_rng.fill(wide, sizeof(wide));
      crypto_core_ristretto255_scalar_reduce(m_secret.data(), wide);
      if (sodium_is_zero(m_secret.data(), m_secret.size()))
        m_secret[0] = 1;
      uint8_t pub[32];
      crypto_scalarmult_ristretto255_base(pub, m_secret.data());
      uint8_t blind[32];
      if (crypto_scalarmult_ristretto255(blind, blindingScalar().data(), myBlindPoint().data()) != 0)
        throw InvalidPoint("password blinding failed");
      m_myShare.resize(32);
      if (crypto_core_ristretto255_add(m_myShare.data(), pub, blind) != 0)
        throw InvalidPoint("share composition failed");
    }
    else {
      m_rng.fill(m_secret.data(), m_secret.size());
      m_myShare.resize(crypto_scalarmult_BYTES);
      crypto_scalarmult_base(m_myShare.data(), m_secret.data());
    }
    return m_myShare;
  }

  /// Derives the session key from the peer share; returns my confirmation tag.
  Bytes
  finish(BytesView peerShare)
  {
    if (!m_started)
      throw ProtocolOrder("pake finish() before start()");
    if (m_finished)
      throw ProtocolOrder("pake finish() called twice");
    if (peerShare.size() != 32)
      throw InvalidPoint("peer share must be 32 bytes");
    m_finished = true;

    uint8_t shared[32] = {0};
    if (m_kind == PakeKind::Spake2) {
      uint8_t unblind[32];
      if (crypto_scalarmult_ristretto255(unblind, blindingScalar().data(), peerBlindPoint().data()) != 0)
        throw InvalidPoint("password blinding failed");
      uint8_t t[32];
      // a degenerate result leaves `shared` zero; confirmation then fails
      if (crypto_core_ristretto255_sub(t, peerShare.data(), unblind) != 0 ||
          crypto_scalarmult_ristretto255(shared, m_secret.data(), t) != 0)
        sodium_memzero(shared, sizeof(shared));
    }
    else {
      if (crypto_scalarmult(shared, m_secret.data(), peerShare.data()) != 0)
        sodium_memzero(shared, sizeof(shared));
    }

    Writer tt;
    tt.str("teb-pake-v1");
    tt.u8(static_cast<uint8_t>(m_kind));
    tt.var(m_role == PakeRole::Initiator ? BytesView(m_myShare) : peerShare);
    tt.var(m_role == PakeRole::Initiator ? peerShare : BytesView(m_myShare));
    tt.var(BytesView(shared, sizeof(shared)));
    tt.var(sha256(m_password));
    sodium_memzero(shared, sizeof(shared));

    Writer ke;
    ke.u8(0x01);
    ke.raw(tt.out());
    m_key = SymKey{sha256(ke.out())};
    Writer kc;
    kc.u8(0x02);
    kc.raw(tt.out());
    SymKey confirmKey{sha256(kc.out())};

    m_myTag = hmac(confirmKey, toBytes(m_role == PakeRole::Initiator ? "confirm-initiator"
                                                                     : "confirm-responder"));
    m_peerTag = hmac(confirmKey, toBytes(m_role == PakeRole::Initiator ? "confirm-responder"
                                                                       : "confirm-initiator"));
    return m_myTag;
  }

  bool
  confirm(BytesView peerTag) const
  {
    if (!m_finished)
      throw ProtocolOrder("pake confirm() before finish()");
    return peerTag.size() == m_peerTag.size() &&
           sodium_memcmp(peerTag.data(), m_peerTag.data(), m_peerTag.size()) == 0;
  }

  const SymKey&
  sessionKey() const
  {
    if (!m_finished)
      throw ProtocolOrder("pake session key requested before finish()");
    return m_key;
  }

private:
  std::array<uint8_t, 32>
  blindingScalar() const
  {
    uint8_t wide[64];
    crypto_hash_sha512(wide, m_password.data(), m_password.size());
    std::array<uint8_t, 32> w;
    crypto_core_ristretto255_scalar_reduce(w.data(), wide);
    if (sodium_is_zero(w.data(), w.size()))
      w[0] = 1;
    return w;
  }

  static std::array<uint8_t, 32>
  groupPoint(const char* label)
  {
    // fixed group elements M and N, derived nothing-up-my-sleeve style
    std::array<uint8_t, 32> point;
    uint8_t wide[64];
    crypto_hash_sha512(wide, reinterpret_cast<const unsigned char*>(label), std::strlen(label));
    crypto_core_ristretto255_from_hash(point.data(), wide);
    return point;
  }

  std::array<uint8_t, 32>
  myBlindPoint() const
  {
    return groupPoint(m_role == PakeRole::Initiator ? "teb-pake point M" : "teb-pake point N");
  }

  std::array<uint8_t, 32>
  peerBlindPoint() const
  {
    return groupPoint(m_role == PakeRole::Initiator ? "teb-pake point N" : "teb-pake point M");
  }

  PakeRole m_role;
  PakeKind m_kind;
  Drbg m_rng;
  Bytes m_password;
  std::array<uint8_t, 32> m_secret{};
  Bytes m_myShare;
  bool m_started = false;
  bool m_finished = false;
  SymKey m_key;
  Bytes m_myTag;
  Bytes m_peerTag;
};

} // namespace crypto

using crypto::Drbg;

} // namespace teb
