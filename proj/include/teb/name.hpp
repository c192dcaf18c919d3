#pragma once

#include "bytes.hpp"

#include <algorithm>
#include <initializer_list>
#include <ostream>

namespace teb {

/** Hierarchical name: an ordered sequence of byte-string components.
 *
 *  The URI form is '/'-joined with '%2F' and '%25' escapes, so any byte
 *  sequence survives a toUri()/parse() round trip. Empty components are
 *  not representable and parse() rejects them ("//", trailing '/').
 */
class Name
{
public:
  Name() = default;

  Name(std::initializer_list<std::string> comps)
    : m_comps(comps)
  {
  }

  explicit Name(std::vector<std::string> comps)
    : m_comps(std::move(comps))
  {
  }

  static Name
  parse(std::string_view uri)
  {
    if (uri.empty() || uri[0] != '/')
      throw MalformedName("name URI must start with '/'");
    Name name;
    if (uri == "/")
      return name; // the empty name
    size_t pos = 1;
    while (pos <= uri.size()) {
      size_t slash = uri.find('/', pos);
      std::string_view token =
        uri.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
      if (token.empty())
        throw MalformedName("empty component in '" + std::string(uri) + "'");
      name.m_comps.push_back(unescape(token));
      if (slash == std::string_view::npos)
        break;
      pos = slash + 1;
      if (pos == uri.size())
        throw MalformedName("empty component in '" + std::string(uri) + "'");
    }
    return name;
  }

  std::string
  toUri() const
  {
    if (m_comps.empty())
      return "/";
    std::string uri;
    for (const auto& c : m_comps) {
      uri.push_back('/');
      for (char ch : c) {
        if (ch == '%')
          uri += "%25";
        else if (ch == '/')
          uri += "%2F";
        else
          uri.push_back(ch);
      }
    }
    return uri;
  }

  size_t
  size() const
  {
    return m_comps.size();
  }

  bool
  empty() const
  {
    return m_comps.empty();
  }

  const std::string&
  at(size_t i) const
  {
    return m_comps.at(i);
  }

  const std::string&
  operator[](size_t i) const
  {
    return m_comps[i];
  }

  const std::vector<std::string>&
  components() const
  {
    return m_comps;
  }

  Name
  getPrefix(size_t n) const
  {
    n = std::min(n, m_comps.size());
    return Name(std::vector<std::string>(m_comps.begin(), m_comps.begin() + n));
  }

  [[nodiscard]] Name
  append(std::string comp) const
  {
    Name n(*this);
    n.m_comps.push_back(std::move(comp));
    return n;
  }

  [[nodiscard]] Name
  append(const Name& suffix) const
  {
    Name n(*this);
    n.m_comps.insert(n.m_comps.end(), suffix.m_comps.begin(), suffix.m_comps.end());
    return n;
  }

  bool
  isPrefixOf(const Name& other) const
  {
    if (m_comps.size() > other.m_comps.size())
      return false;
    return std::equal(m_comps.begin(), m_comps.end(), other.m_comps.begin());
  }

  bool
  contains(std::string_view comp) const
  {
    return std::find(m_comps.begin(), m_comps.end(), comp) != m_comps.end();
  }

  void
  encodeTo(Writer& w) const
  {
    w.u32(static_cast<uint32_t>(m_comps.size()));
    for (const auto& c : m_comps)
      w.str(c);
  }

  Bytes
  encode() const
  {
    Writer w;
    encodeTo(w);
    return w.take();
  }

  static Name
  decodeFrom(Reader& r)
  {
    uint32_t count = r.u32();
    // each component costs at least a 4-byte length prefix
    if (static_cast<uint64_t>(count) * 4 > r.remaining())
      throw MalformedPacket("component count exceeds remaining input");
    Name name;
    name.m_comps.reserve(count);
    for (uint32_t i = 0; i < count; ++i)
      name.m_comps.push_back(r.str());
    return name;
  }

  auto
  operator<=>(const Name&) const = default;

private:
  static std::string
  unescape(std::string_view token)
  {
    std::string out;
    out.reserve(token.size());
    for (size_t i = 0; i < token.size(); ++i) {
      if (token[i] == '%' && i + 2 < token.size() && token[i + 1] == '2') {
        char c = token[i + 2];
        if (c == 'F' || c == 'f') {
          out.push_back('/');
          i += 2;
          continue;
        }
        if (c == '5') {
          out.push_back('%');
          i += 2;
          continue;
        }
      }
      out.push_back(token[i]);
    }
    return out;
  }

  std::vector<std::string> m_comps;
};

inline std::ostream&
operator<<(std::ostream& os, const Name& name)
{
  return os << name.toUri();
}

inline Name
decodeName(BytesView wire)
{
  Reader r(wire);
  Name name = Name::decodeFrom(r);
  r.expectEnd();
  return name;
}

} // namespace teb
