#pragma once

#include "name.hpp"

#include <optional>
#include <variant>

namespace teb {

enum class SigScheme : uint8_t {
  None = 0,
  Asym = 1, // Ed25519 over the signed portion
  Hmac = 2, // HMAC-SHA256 over the signed portion
};

/** Signature carried outside the signed portion. scheme None means the packet
 *  is unsigned; sig is empty exactly in that case. keyId is a short digest of
 *  the verifying key, enough to pick a key, never enough to verify trust.
 */
struct SignatureEnvelope
{
  SigScheme scheme = SigScheme::None;
  Bytes keyId;
  Bytes sig;

  bool
  operator==(const SignatureEnvelope&) const = default;
};

struct Interest
{
  Name name;
  std::optional<Bytes> appParams;
  SignatureEnvelope sig;

  bool
  operator==(const Interest&) const = default;
};

struct Data
{
  Name name;
  Bytes content;
  std::optional<Name> keyLocator; // name of the certificate that verifies sig
  SignatureEnvelope sig;

  bool
  operator==(const Data&) const = default;
};

using Packet = std::variant<Interest, Data>;

namespace detail {

constexpr uint8_t kInterestKind = 0x05;
constexpr uint8_t kDataKind = 0x06;

inline void
encodeEnvelope(Writer& w, const SignatureEnvelope& s)
{
  w.u8(static_cast<uint8_t>(s.scheme));
  w.var(s.keyId);
  w.var(s.sig);
}

inline SignatureEnvelope
decodeEnvelope(Reader& r)
{
  SignatureEnvelope s;
  uint8_t scheme = r.u8();
  if (scheme > static_cast<uint8_t>(SigScheme::Hmac))
    throw MalformedPacket("unknown signature scheme " + std::to_string(scheme));
  s.scheme = static_cast<SigScheme>(scheme);
  s.keyId = r.var();
  s.sig = r.var();
  if (s.scheme == SigScheme::None && !(s.keyId.empty() && s.sig.empty()))
    throw MalformedPacket("unsigned packet carries signature bytes");
  if (s.scheme != SigScheme::None && s.sig.empty())
    throw MalformedPacket("signed packet has empty signature");
  return s;
}

inline uint8_t
decodeFlag(Reader& r, const char* what)
{
  uint8_t f = r.u8();
  if (f > 1)
    throw MalformedPacket(std::string("invalid presence flag for ") + what);
  return f;
}

} // namespace detail

/** Bytes covered by the signature: the full packet minus the leading kind
 *  byte and the trailing envelope. In the wire encoding this region is
 *  contiguous, starting at offset 1.
 */
inline Bytes
signedPortion(const Interest& interest)
{
  Writer w;
  interest.name.encodeTo(w);
  w.u8(interest.appParams ? 1 : 0);
  if (interest.appParams)
    w.var(*interest.appParams);
  return w.take();
}

inline Bytes
signedPortion(const Data& data)
{
  Writer w;
  data.name.encodeTo(w);
  w.var(data.content);
  w.u8(data.keyLocator ? 1 : 0);
  if (data.keyLocator)
    data.keyLocator->encodeTo(w);
  return w.take();
}

inline Bytes
encode(const Interest& interest)
{
  Writer w;
  w.u8(detail::kInterestKind);
  w.raw(signedPortion(interest));
  detail::encodeEnvelope(w, interest.sig);
  return w.take();
}

inline Bytes
encode(const Data& data)
{
  Writer w;
  w.u8(detail::kDataKind);
  w.raw(signedPortion(data));
  detail::encodeEnvelope(w, data.sig);
  return w.take();
}

inline Bytes
encode(const Packet& packet)
{
  return std::visit([](const auto& p) { return encode(p); }, packet);
}

inline Packet
decodePacket(BytesView wire)
{
  Reader r(wire);
  uint8_t kind = r.u8();
  if (kind == detail::kInterestKind) {
    Interest interest;
    interest.name = Name::decodeFrom(r);
    if (detail::decodeFlag(r, "app parameters") == 1)
      interest.appParams = r.var();
    interest.sig = detail::decodeEnvelope(r);
    r.expectEnd();
    return interest;
  }
  if (kind == detail::kDataKind) {
    Data data;
    data.name = Name::decodeFrom(r);
    data.content = r.var();
    if (detail::decodeFlag(r, "key locator") == 1)
      data.keyLocator = Name::decodeFrom(r);
    data.sig = detail::decodeEnvelope(r);
    r.expectEnd();
    return data;
  }
  throw MalformedPacket("unknown packet kind " + std::to_string(kind));
}

inline Interest
decodeInterest(BytesView wire)
{
  Packet p = decodePacket(wire);
  if (auto* i = std::get_if<Interest>(&p))
    return std::move(*i);
  throw MalformedPacket("expected an Interest");
}

inline Data
decodeData(BytesView wire)
{
  Packet p = decodePacket(wire);
  if (auto* d = std::get_if<Data>(&p))
    return std::move(*d);
  throw MalformedPacket("expected a Data");
}

/// [begin, end) offsets of the signed portion within an encoded packet.
inline std::pair<size_t, size_t>
signedRegion(BytesView wire)
{
  Packet p = decodePacket(wire); // also validates the encoding
  size_t len = std::visit([](const auto& pkt) { return signedPortion(pkt).size(); }, p);
  return {1, 1 + len};
}

} // namespace teb
