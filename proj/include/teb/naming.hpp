#pragma once

#include "certificate.hpp"

#include <map>

namespace teb {

/// Appended after the converted name to keep assigned names collision-free.
enum class UniquenessSuffix {
  None,
  KeyDigest7Hex, // first 7 hex chars of the key digest
};

/** Deterministic mapping from an application identifier to a name.
 *
 *  The source format names the identifier's fields and fixes its separator
 *  shape, e.g. "user@sld.tld". The target is a name whose components either
 *  repeat a source field (substituted) or stand as literals:
 *
 *      parse("user@sld.tld", "/ndnfit/tld/sld/user")
 *          maps alice@example.com to /ndnfit/com/example/alice
 */
struct NameConvention
{
  std::vector<std::string> variables;
  std::string separators; // between consecutive fields, in order
  std::vector<std::string> target;
  UniquenessSuffix suffix = UniquenessSuffix::None;

  static NameConvention
  parse(const std::string& source, const std::string& target,
        UniquenessSuffix suffix = UniquenessSuffix::None)
  {
    NameConvention conv;
    conv.suffix = suffix;
    auto [fields, seps] = splitIdentifier(source);
    for (const auto& f : fields) {
      if (f.empty())
        throw ParseError("empty field in source format '" + source + "'");
      for (const auto& prev : conv.variables)
        if (prev == f)
          throw ParseError("duplicate field '" + f + "' in source format");
      conv.variables.push_back(f);
    }
    conv.separators = seps;
    conv.target = Name::parse(target).components();
    if (conv.target.empty())
      throw ParseError("empty target name");
    return conv;
  }

  static std::pair<std::vector<std::string>, std::string>
  splitIdentifier(const std::string& s)
  {
    std::vector<std::string> fields;
    std::string seps;
    std::string cur;
    for (char c : s) {
      if (c == '@' || c == '.' || c == '/') {
        fields.push_back(cur);
        cur.clear();
        seps.push_back(c);
      }
      else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    return {fields, seps};
  }
};

/** Convert an identifier via the convention. The identifier must have the
 *  same separator shape as the source format, field for field.
 */
inline Name
convertName(const NameConvention& conv, const std::string& identifier, BytesView publicKey = {})
{
  auto [fields, seps] = NameConvention::splitIdentifier(identifier);
  if (seps != conv.separators || fields.size() != conv.variables.size())
    throw IdentifierMismatch("'" + identifier + "' does not have the convention's shape");
  std::map<std::string, std::string> bind;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].empty())
      throw IdentifierMismatch("empty field in identifier '" + identifier + "'");
    bind[conv.variables[i]] = fields[i];
  }

  Name out;
  for (const auto& tok : conv.target) {
    auto it = bind.find(tok);
    out = out.append(it != bind.end() ? it->second : tok);
  }
  if (conv.suffix == UniquenessSuffix::KeyDigest7Hex) {
    if (publicKey.empty())
      throw IdentifierMismatch("convention requires a public key for the uniqueness suffix");
    out = out.append(crypto::digestHex(publicKey, 7));
  }
  return out;
}

/// One-to-one assignment of identifiers to names; re-claiming is idempotent.
class NameRegistry
{
public:
  void
  claim(const std::string& identifier, const Name& name)
  {
    auto it = m_byIdentifier.find(identifier);
    if (it != m_byIdentifier.end()) {
      if (it->second == name)
        return;
      throw IdentifierMismatch("identifier '" + identifier + "' already holds " +
                               it->second.toUri());
    }
    auto jt = m_byName.find(name);
    if (jt != m_byName.end())
      throw IdentifierMismatch("name " + name.toUri() + " already assigned to '" + jt->second +
                               "'");
    m_byIdentifier.emplace(identifier, name);
    m_byName.emplace(name, identifier);
  }

  const Name*
  find(const std::string& identifier) const
  {
    auto it = m_byIdentifier.find(identifier);
    return it == m_byIdentifier.end() ? nullptr : &it->second;
  }

  const std::string*
  findIdentifier(const Name& name) const
  {
    auto it = m_byName.find(name);
    return it == m_byName.end() ? nullptr : &it->second;
  }

  size_t
  size() const
  {
    return m_byIdentifier.size();
  }

private:
  std::map<std::string, Name> m_byIdentifier;
  std::map<Name, std::string> m_byName;
};

} // namespace teb
