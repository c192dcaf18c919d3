#pragma once

#include "certificate.hpp"

#include <map>
#include <optional>
#include <set>

namespace teb {

/** Trust schema rule language.
 *
 *  One rule per line:
 *
 *      #article: #site/"article"/author/post/_version
 *                & {_version: $eq_type("v=0")} <= #author
 *
 *  Pattern elements: "quoted" literals, `_` wildcards, bare identifiers as
 *  variables (same variable, same value), `#rule` references that splice the
 *  referenced rule's pattern in place, and a trailing `...` matching one or
 *  more remaining components. `& {...}` constrains bound variables: a quoted
 *  literal pins the value, $eq_type("v=0") requires a version component.
 *  `<= #signer` licenses packets matched by this rule to be signed by keys
 *  certified under the signer rule.
 *
 *  The anchor rule is the unique rule that has no signer and is not spliced
 *  into any pattern; every signer chain must reach it.
 */
struct PatternElement
{
  enum class Kind {
    Literal,
    Wildcard,
    Variable,
    RuleRef,
    Tail,
  };

  Kind kind = Kind::Wildcard;
  std::string text; // literal value, variable name, or referenced rule id

  static PatternElement
  literal(std::string v)
  {
    return {Kind::Literal, std::move(v)};
  }

  static PatternElement
  wildcard()
  {
    return {Kind::Wildcard, {}};
  }

  static PatternElement
  variable(std::string v)
  {
    return {Kind::Variable, std::move(v)};
  }

  static PatternElement
  ruleRef(std::string v)
  {
    return {Kind::RuleRef, std::move(v)};
  }

  static PatternElement
  tail()
  {
    return {Kind::Tail, {}};
  }

  bool
  operator==(const PatternElement&) const = default;
};

struct Pattern
{
  std::vector<PatternElement> elements;

  bool
  operator==(const Pattern&) const = default;
};

struct Constraint
{
  enum class Kind {
    EqualsLiteral,    // value must equal `literal`
    VersionComponent, // value must be a version component ("v=" prefix)
  };

  std::string variable;
  Kind kind = Kind::EqualsLiteral;
  std::string literal;

  bool
  operator==(const Constraint&) const = default;
};

struct Rule
{
  std::string id;
  Pattern pattern;
  std::vector<Constraint> constraints;
  std::optional<std::string> signer;

  bool
  operator==(const Rule&) const = default;
};

enum class SchemaMode {
  Implicit, // no rules; exactly the chains directly under the anchor validate
  Explicit, // rule-driven
};

struct Match
{
  std::string rule;
  std::map<std::string, std::string> bindings;

  bool
  operator==(const Match&) const = default;
};

struct ValidationReport
{
  bool accepted = false;
  int failingLink = -1; // index into the chain; -1 when not link-specific
  std::string reason;
};

class TrustSchema
{
public:
  TrustSchema() = default;

  static TrustSchema
  implicit()
  {
    return TrustSchema();
  }

  /// Validates rule set consistency; computes expansions and the anchor rule.
  static TrustSchema
  fromRules(std::vector<Rule> rules)
  {
    TrustSchema s;
    s.m_mode = SchemaMode::Explicit;
    s.m_rules = std::move(rules);
    s.analyze();
    return s;
  }

  SchemaMode
  mode() const
  {
    return m_mode;
  }

  const std::vector<Rule>&
  rules() const
  {
    return m_rules;
  }

  const Rule*
  find(const std::string& id) const
  {
    for (const auto& r : m_rules)
      if (r.id == id)
        return &r;
    return nullptr;
  }

  const std::string&
  anchorRule() const
  {
    return m_anchor;
  }

  const Pattern&
  expandedPattern(const std::string& id) const
  {
    return m_expanded.at(id);
  }

  const std::vector<Constraint>&
  expandedConstraints(const std::string& id) const
  {
    return m_expandedConstraints.at(id);
  }

  bool
  operator==(const TrustSchema& other) const
  {
    return m_mode == other.m_mode && m_rules == other.m_rules;
  }

private:
  void
  analyze()
  {
    std::set<std::string> ids;
    for (const auto& r : m_rules) {
      if (r.id.empty())
        throw ParseError("rule with empty id");
      if (!ids.insert(r.id).second)
        throw ParseError("duplicate rule id #" + r.id);
    }

    for (const auto& r : m_rules) {
      std::set<std::string> visiting;
      expand(r.id, visiting);
    }

    for (const auto& r : m_rules) {
      const Pattern& p = m_expanded.at(r.id);
      if (p.elements.empty())
        throw ParseError("rule #" + r.id + " expands to an empty pattern");
      for (size_t i = 0; i < p.elements.size(); ++i) {
        if (p.elements[i].kind == PatternElement::Kind::Tail && i + 1 != p.elements.size())
          throw ParseError("rule #" + r.id + ": '...' must be the last element");
      }
      std::set<std::string> vars;
      for (const auto& el : p.elements)
        if (el.kind == PatternElement::Kind::Variable)
          vars.insert(el.text);
      for (const auto& c : m_expandedConstraints.at(r.id))
        if (vars.count(c.variable) == 0)
          throw ParseError("rule #" + r.id + ": constraint on unknown variable '" + c.variable +
                           "'");
    }

    // anchor: no signer and never spliced into a pattern
    std::set<std::string> referenced;
    for (const auto& r : m_rules)
      for (const auto& el : r.pattern.elements)
        if (el.kind == PatternElement::Kind::RuleRef)
          referenced.insert(el.text);
    std::vector<std::string> candidates;
    for (const auto& r : m_rules)
      if (!r.signer && referenced.count(r.id) == 0)
        candidates.push_back(r.id);
    if (candidates.empty())
      throw MissingAnchor("no rule qualifies as the trust anchor");
    if (candidates.size() > 1)
      throw ParseError("multiple anchor candidates: #" + candidates[0] + " and #" +
                       candidates[1]);
    m_anchor = candidates[0];

    // every signer chain must reach the anchor within the depth limit;
    // signerless rules are macros or the anchor itself
    for (const auto& r : m_rules) {
      if (!r.signer)
        continue;
      const Rule* cur = &r;
      std::set<std::string> seen;
      int steps = 0;
      while (cur->signer) {
        if (!seen.insert(cur->id).second || ++steps > 32)
          throw CyclicRuleRef("signer cycle through #" + cur->id);
        const Rule* next = find(*cur->signer);
        if (next == nullptr)
          throw UnresolvedRuleRef("rule #" + cur->id + " names unknown signer #" + *cur->signer);
        cur = next;
      }
      if (cur->id != m_anchor)
        throw ParseError("signer chain from #" + r.id + " ends at #" + cur->id +
                         ", not the anchor");
    }
  }

  const Pattern&
  expand(const std::string& id, std::set<std::string>& visiting)
  {
    auto done = m_expanded.find(id);
    if (done != m_expanded.end())
      return done->second;
    if (!visiting.insert(id).second)
      throw CyclicRuleRef("rule reference cycle through #" + id);
    const Rule* r = find(id);
    if (r == nullptr)
      throw UnresolvedRuleRef("reference to unknown rule #" + id);

    Pattern out;
    std::vector<Constraint> constraints = r->constraints;
    for (const auto& el : r->pattern.elements) {
      if (el.kind != PatternElement::Kind::RuleRef) {
        out.elements.push_back(el);
        continue;
      }
      const Pattern& sub = expand(el.text, visiting);
      out.elements.insert(out.elements.end(), sub.elements.begin(), sub.elements.end());
      const auto& subC = m_expandedConstraints.at(el.text);
      constraints.insert(constraints.end(), subC.begin(), subC.end());
    }
    visiting.erase(id);
    m_expanded[id] = std::move(out);
    m_expandedConstraints[id] = std::move(constraints);
    return m_expanded.at(id);
  }

  SchemaMode m_mode = SchemaMode::Implicit;
  std::vector<Rule> m_rules;
  std::string m_anchor;
  std::map<std::string, Pattern> m_expanded;
  std::map<std::string, std::vector<Constraint>> m_expandedConstraints;
};

// ---- schema text ----

namespace detail {

class SchemaLineParser
{
public:
  SchemaLineParser(std::string_view line, int lineNo)
    : m_line(line)
    , m_lineNo(lineNo)
  {
  }

  Rule
  parseRule()
  {
    Rule rule;
    expect('#');
    rule.id = ident();
    skipWs();
    expect(':');
    rule.pattern = parsePattern();
    skipWs();
    if (peek() == '&') {
      ++m_pos;
      rule.constraints = parseConstraints();
      skipWs();
    }
    if (peek() == '<') {
      ++m_pos;
      expect('=');
      skipWs();
      expect('#');
      rule.signer = ident();
      skipWs();
    }
    if (m_pos != m_line.size())
      fail("unexpected trailing text");
    return rule;
  }

private:
  Pattern
  parsePattern()
  {
    Pattern p;
    skipWs();
    p.elements.push_back(parseElement());
    while (true) {
      size_t mark = m_pos;
      skipWs();
      if (peek() != '/') {
        m_pos = mark;
        break;
      }
      ++m_pos;
      skipWs();
      p.elements.push_back(parseElement());
    }
    return p;
  }

  PatternElement
  parseElement()
  {
    char c = peek();
    if (c == '"') {
      ++m_pos;
      size_t end = m_line.find('"', m_pos);
      if (end == std::string_view::npos)
        fail("unterminated string literal");
      std::string value(m_line.substr(m_pos, end - m_pos));
      m_pos = end + 1;
      return PatternElement::literal(std::move(value));
    }
    if (c == '.') {
      if (m_line.substr(m_pos, 3) != "...")
        fail("expected '...'");
      m_pos += 3;
      return PatternElement::tail();
    }
    if (c == '#') {
      ++m_pos;
      return PatternElement::ruleRef(ident());
    }
    if (c == '_' || isIdentStart(c)) {
      std::string name = ident();
      if (name == "_")
        return PatternElement::wildcard();
      return PatternElement::variable(std::move(name));
    }
    fail("expected a pattern element");
  }

  std::vector<Constraint>
  parseConstraints()
  {
    std::vector<Constraint> out;
    skipWs();
    expect('{');
    while (true) {
      skipWs();
      Constraint c;
      c.variable = ident();
      skipWs();
      expect(':');
      skipWs();
      if (peek() == '"') {
        ++m_pos;
        size_t end = m_line.find('"', m_pos);
        if (end == std::string_view::npos)
          fail("unterminated string literal");
        c.kind = Constraint::Kind::EqualsLiteral;
        c.literal = std::string(m_line.substr(m_pos, end - m_pos));
        m_pos = end + 1;
      }
      else if (m_line.substr(m_pos, 8) == "$eq_type") {
        m_pos += 8;
        skipWs();
        expect('(');
        skipWs();
        expect('"');
        size_t end = m_line.find('"', m_pos);
        if (end == std::string_view::npos)
          fail("unterminated string literal");
        std::string type(m_line.substr(m_pos, end - m_pos));
        m_pos = end + 1;
        skipWs();
        expect(')');
        if (type.rfind("v=", 0) != 0)
          fail("unsupported component type '" + type + "'");
        c.kind = Constraint::Kind::VersionComponent;
      }
      else {
        fail("expected a constraint value");
      }
      out.push_back(std::move(c));
      skipWs();
      if (peek() == ',') {
        ++m_pos;
        continue;
      }
      expect('}');
      break;
    }
    return out;
  }

  static bool
  isIdentStart(char c)
  {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }

  static bool
  isIdentChar(char c)
  {
    return isIdentStart(c) || (c >= '0' && c <= '9') || c == '-';
  }

  std::string
  ident()
  {
    if (!isIdentStart(peek()))
      fail("expected an identifier");
    size_t start = m_pos;
    while (m_pos < m_line.size() && isIdentChar(m_line[m_pos]))
      ++m_pos;
    return std::string(m_line.substr(start, m_pos - start));
  }

  void
  skipWs()
  {
    while (m_pos < m_line.size() && (m_line[m_pos] == ' ' || m_line[m_pos] == '\t'))
      ++m_pos;
  }

  char
  peek() const
  {
    return m_pos < m_line.size() ? m_line[m_pos] : '\0';
  }

  void
  expect(char c)
  {
    if (peek() != c)
      fail(std::string("expected '") + c + "'");
    ++m_pos;
  }

  [[noreturn]] void
  fail(const std::string& what) const
  {
    throw ParseError(what, m_lineNo, static_cast<int>(m_pos) + 1);
  }

  std::string_view m_line;
  int m_lineNo;
  size_t m_pos = 0;
};

inline std::string
stripComment(std::string_view line)
{
  bool inString = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"')
      inString = !inString;
    else if (!inString && c == '/' && i + 1 < line.size() && line[i + 1] == '/')
      return std::string(line.substr(0, i));
  }
  return std::string(line);
}

inline std::string
trim(std::string s)
{
  size_t b = s.find_first_not_of(" \t\r");
  size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  return s.substr(b, e - b + 1);
}

} // namespace detail

inline TrustSchema
parseSchema(std::string_view text)
{
  std::vector<Rule> rules;
  int lineNo = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view rawLine =
      text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++lineNo;
    std::string line = detail::trim(detail::stripComment(rawLine));
    if (!line.empty())
      rules.push_back(detail::SchemaLineParser(line, lineNo).parseRule());
    if (nl == std::string_view::npos)
      break;
    pos = nl + 1;
  }
  return TrustSchema::fromRules(std::move(rules));
}

inline std::string
toText(const Pattern& pattern)
{
  std::string out;
  for (size_t i = 0; i < pattern.elements.size(); ++i) {
    if (i > 0)
      out += "/";
    const auto& el = pattern.elements[i];
    switch (el.kind) {
      case PatternElement::Kind::Literal:
        out += "\"" + el.text + "\"";
        break;
      case PatternElement::Kind::Wildcard:
        out += "_";
        break;
      case PatternElement::Kind::Variable:
        out += el.text;
        break;
      case PatternElement::Kind::RuleRef:
        out += "#" + el.text;
        break;
      case PatternElement::Kind::Tail:
        out += "...";
        break;
    }
  }
  return out;
}

inline std::string
toText(const Rule& rule)
{
  std::string out = "#" + rule.id + ": " + toText(rule.pattern);
  if (!rule.constraints.empty()) {
    out += " & {";
    for (size_t i = 0; i < rule.constraints.size(); ++i) {
      const auto& c = rule.constraints[i];
      if (i > 0)
        out += ", ";
      out += c.variable + ": ";
      if (c.kind == Constraint::Kind::EqualsLiteral)
        out += "\"" + c.literal + "\"";
      else
        out += "$eq_type(\"v=0\")";
    }
    out += "}";
  }
  if (rule.signer)
    out += " <= #" + *rule.signer;
  return out;
}

inline std::string
toText(const TrustSchema& schema)
{
  if (schema.mode() == SchemaMode::Implicit)
    throw Error("NotSerializable", "an implicit schema has no text form");
  std::string out;
  for (const auto& r : schema.rules())
    out += toText(r) + "\n";
  return out;
}

// ---- name matching ----

namespace detail {

inline std::optional<std::map<std::string, std::string>>
matchExpandedPattern(const Pattern& p, const Name& name)
{
  size_t fixed = p.elements.size();
  bool hasTail = !p.elements.empty() && p.elements.back().kind == PatternElement::Kind::Tail;
  if (hasTail)
    --fixed;
  if (hasTail ? name.size() < fixed + 1 : name.size() != fixed)
    return std::nullopt;

  std::map<std::string, std::string> bindings;
  for (size_t i = 0; i < fixed; ++i) {
    const auto& el = p.elements[i];
    const std::string& comp = name[i];
    switch (el.kind) {
      case PatternElement::Kind::Literal:
        if (comp != el.text)
          return std::nullopt;
        break;
      case PatternElement::Kind::Wildcard:
        break;
      case PatternElement::Kind::Variable: {
        auto [it, inserted] = bindings.try_emplace(el.text, comp);
        if (!inserted && it->second != comp)
          return std::nullopt;
        break;
      }
      default:
        return std::nullopt; // RuleRef/Tail cannot appear here
    }
  }
  return bindings;
}

inline bool
satisfies(const Constraint& c, const std::map<std::string, std::string>& bindings)
{
  auto it = bindings.find(c.variable);
  if (it == bindings.end())
    return false;
  if (c.kind == Constraint::Kind::EqualsLiteral)
    return it->second == c.literal;
  return it->second.rfind("v=", 0) == 0;
}

} // namespace detail

/// All rules whose fully expanded pattern matches the name, with bindings.
inline std::vector<Match>
matchName(const TrustSchema& schema, const Name& name)
{
  std::vector<Match> out;
  if (schema.mode() == SchemaMode::Implicit)
    return out;
  for (const auto& r : schema.rules()) {
    auto bindings = detail::matchExpandedPattern(schema.expandedPattern(r.id), name);
    if (!bindings)
      continue;
    bool ok = true;
    for (const auto& c : schema.expandedConstraints(r.id))
      if (!detail::satisfies(c, *bindings)) {
        ok = false;
        break;
      }
    if (ok)
      out.push_back(Match{r.id, std::move(*bindings)});
  }
  return out;
}

// ---- chain validation ----

namespace detail {

inline bool
bindingsCompatible(const std::map<std::string, std::string>& a,
                   const std::map<std::string, std::string>& b)
{
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it != b.end() && it->second != v)
      return false;
  }
  return true;
}

} // namespace detail

/** Validate a signing chain against the schema and anchor.
 *
 *  chain[0] is the subject packet; chain[i] is signed by chain[i+1]; the
 *  chain terminates at the anchor (appended automatically when absent).
 *  With terminalTrusted the last element is treated as already validated,
 *  which is how a validated-key-cache hit cuts the walk short.
 *
 *  Never throws on malformed input; the report carries the failing link
 *  (smallest index nearest the anchor where licensing broke) and a reason.
 */
inline ValidationReport
validateChain(const TrustSchema& schema, const Certificate& anchor, const std::vector<Data>& chain,
              bool terminalTrusted = false)
{
  ValidationReport rep;
  if (chain.empty()) {
    rep.reason = "empty chain";
    return rep;
  }

  std::vector<Data> elems = chain;
  if (!terminalTrusted && !(elems.back() == anchor.data()))
    elems.push_back(anchor.data());
  size_t n = elems.size();
  if (n > 32) {
    rep.reason = "chain exceeds the depth limit";
    return rep;
  }

  auto fail = [&rep](int link, std::string reason) {
    rep.failingLink = link;
    rep.reason = std::move(reason);
  };

  // every signer must be certificate-shaped
  std::vector<std::optional<Certificate>> certs(n);
  for (size_t i = 1; i < n; ++i) {
    try {
      certs[i] = Certificate::fromData(elems[i]);
    }
    catch (const Error&) {
      fail(static_cast<int>(i) - 1, "signer '" + elems[i].name.toUri() +
                                      "' is not a well-formed certificate");
      return rep;
    }
  }

  for (size_t i = 0; i + 1 < n; ++i) {
    const Data& d = elems[i];
    if (d.sig.scheme != SigScheme::Asym) {
      fail(static_cast<int>(i), "link is not asymmetrically signed");
      return rep;
    }
    if (!d.keyLocator || !(*d.keyLocator == elems[i + 1].name)) {
      fail(static_cast<int>(i), "key locator does not name the signer");
      return rep;
    }
    if (!crypto::verify(certs[i + 1]->publicKey(), signedPortion(d), d.sig.sig)) {
      fail(static_cast<int>(i), "signature verification failed");
      return rep;
    }
  }

  if (!terminalTrusted) {
    const Data& last = elems.back(); // the anchor by construction
    if (!(last == anchor.data())) {
      fail(static_cast<int>(n) - 1, "chain does not terminate at the trust anchor");
      return rep;
    }
    if (last.sig.scheme != SigScheme::Asym || !last.keyLocator ||
        !(*last.keyLocator == last.name) ||
        !crypto::verify(anchor.publicKey(), signedPortion(last), last.sig.sig)) {
      fail(static_cast<int>(n) - 1, "trust anchor self-signature is invalid");
      return rep;
    }
  }

  if (schema.mode() == SchemaMode::Implicit) {
    for (size_t i = 0; i + 1 < n; ++i) {
      const Data& signer = elems[i + 1];
      bool isAnchor = signer == anchor.data();
      bool anchorCertified = signer.keyLocator && *signer.keyLocator == anchor.name();
      bool trustedTerminal = terminalTrusted && i + 2 == n;
      if (!isAnchor && !anchorCertified && !trustedTerminal) {
        fail(static_cast<int>(i), "signer is neither the anchor nor certified by it");
        return rep;
      }
    }
    rep.accepted = true;
    return rep;
  }

  // rule licensing: propagate viable (rule, bindings) sets from the anchor end
  std::vector<std::vector<Match>> viable(n);
  for (size_t i = 0; i < n; ++i)
    viable[i] = matchName(schema, elems[i].name);

  std::vector<std::vector<Match>> ok(n);
  if (terminalTrusted) {
    ok[n - 1] = viable[n - 1];
  }
  else {
    for (const auto& m : viable[n - 1])
      if (m.rule == schema.anchorRule())
        ok[n - 1].push_back(m);
  }
  bool sawBindingConflict = false;
  for (size_t ii = n - 1; ii-- > 0;) {
    for (const auto& m : viable[ii]) {
      const Rule* rule = schema.find(m.rule);
      if (rule == nullptr || !rule->signer)
        continue;
      for (const auto& up : ok[ii + 1]) {
        if (up.rule != *rule->signer)
          continue;
        if (!detail::bindingsCompatible(m.bindings, up.bindings)) {
          sawBindingConflict = true;
          continue;
        }
        ok[ii].push_back(m);
        break;
      }
    }
  }

  if (!ok[0].empty()) {
    rep.accepted = true;
    return rep;
  }

  // report the break nearest the anchor: the highest empty level whose
  // parent level is still viable
  size_t at = n - 1;
  for (size_t i = n; i-- > 0;) {
    if (ok[i].empty() && (i + 1 == n || !ok[i + 1].empty())) {
      at = i;
      break;
    }
  }
  if (viable[at].empty())
    fail(static_cast<int>(at), "'" + elems[at].name.toUri() + "' matches no schema rule");
  else if (at + 1 == n)
    fail(static_cast<int>(at), "terminal certificate does not match the anchor rule");
  else if (sawBindingConflict)
    fail(static_cast<int>(at), "variable binding conflict across the link");
  else
    fail(static_cast<int>(at), "no rule licenses this signing link");
  return rep;
}

} // namespace teb
