#pragma once

#include "errors.hpp"

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace teb {

using Bytes = std::vector<uint8_t>;
using BytesView = std::span<const uint8_t>;

inline Bytes
toBytes(std::string_view s)
{
  return Bytes(s.begin(), s.end());
}

inline std::string
toString(BytesView b)
{
  return std::string(b.begin(), b.end());
}

inline bool
equal(BytesView a, BytesView b)
{
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size()) == 0;
}

inline std::string
toHex(BytesView b)
{
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(2 * b.size());
  for (uint8_t v : b) {
    s.push_back(digits[v >> 4]);
    s.push_back(digits[v & 0x0f]);
  }
  return s;
}

inline Bytes
fromHex(std::string_view s)
{
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9')
      return c - '0';
    if (c >= 'a' && c <= 'f')
      return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
      return c - 'A' + 10;
    return -1;
  };
  if (s.size() % 2 != 0)
    throw std::invalid_argument("hex string has odd length");
  Bytes out;
  out.reserve(s.size() / 2);
  for (size_t i = 0; i < s.size(); i += 2) {
    int hi = nibble(s[i]), lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0)
      throw std::invalid_argument("invalid hex digit");
    out.push_back(static_cast<uint8_t>((hi << 4) | lo));
  }
  return out;
}

/** Append-only encoder for the length-prefixed framing used by packets and
 *  protocol payloads. Integers are big-endian; var() writes a u32 length
 *  followed by the raw bytes.
 */
class Writer
{
public:
  Writer&
  u8(uint8_t v)
  {
    m_out.push_back(v);
    return *this;
  }

  Writer&
  u32(uint32_t v)
  {
    for (int i = 3; i >= 0; --i)
      m_out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    return *this;
  }

  Writer&
  u64(uint64_t v)
  {
    for (int i = 7; i >= 0; --i)
      m_out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    return *this;
  }

  Writer&
  raw(BytesView b)
  {
    m_out.insert(m_out.end(), b.begin(), b.end());
    return *this;
  }

  Writer&
  var(BytesView b)
  {
    u32(static_cast<uint32_t>(b.size()));
    return raw(b);
  }

  Writer&
  str(std::string_view s)
  {
    return var(BytesView(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
  }

  const Bytes&
  out() const
  {
    return m_out;
  }

  Bytes
  take()
  {
    return std::move(m_out);
  }

private:
  Bytes m_out;
};

/// Strict counterpart of Writer; any overrun throws MalformedPacket.
class Reader
{
public:
  explicit Reader(BytesView in)
    : m_in(in)
  {
  }

  /// Owning overload so a temporary buffer outlives the reads on it.
  explicit Reader(Bytes&& in)
    : m_owned(std::move(in))
    , m_in(m_owned)
  {
  }

  uint8_t
  u8()
  {
    need(1);
    return m_in[m_pos++];
  }

  uint32_t
  u32()
  {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v = (v << 8) | m_in[m_pos++];
    return v;
  }

  uint64_t
  u64()
  {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v = (v << 8) | m_in[m_pos++];
    return v;
  }

  Bytes
  raw(size_t n)
  {
    need(n);
    Bytes b(m_in.begin() + m_pos, m_in.begin() + m_pos + n);
    m_pos += n;
    return b;
  }

  Bytes
  var()
  {
    uint32_t n = u32();
    if (n > remaining())
      throw MalformedPacket("length prefix exceeds remaining input");
    return raw(n);
  }

  std::string
  str()
  {
    Bytes b = var();
    return std::string(b.begin(), b.end());
  }

  size_t
  remaining() const
  {
    return m_in.size() - m_pos;
  }

  bool
  atEnd() const
  {
    return m_pos == m_in.size();
  }

  void
  expectEnd() const
  {
    if (!atEnd())
      throw MalformedPacket("trailing bytes after decoded value");
  }

private:
  void
  need(size_t n) const
  {
    if (remaining() < n)
      throw MalformedPacket("input truncated");
  }

  Bytes m_owned; // backing storage when constructed from a temporary
  BytesView m_in;
  size_t m_pos = 0;
};

} // namespace teb
