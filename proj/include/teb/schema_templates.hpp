#pragma once

#include "schema.hpp"

namespace teb {

/** Composes common trust zone layouts into schema rules, so deployments do
 *  not hand-write the same certificate and data patterns over and over.
 *  Every generated rule is an ordinary rule; build() runs full validation.
 */
class SchemaBuilder
{
public:
  /// "#KEY" macro plus a "#site" literal for the zone prefix.
  SchemaBuilder&
  defineZone(const std::string& zone)
  {
    add("KEY", {PatternElement::literal(kKeyComponent), PatternElement::wildcard(),
                PatternElement::wildcard(), PatternElement::wildcard()});
    add("site", {PatternElement::literal(zone)});
    return *this;
  }

  /// The anchor rule: a self-signed key directly under the zone prefix.
  SchemaBuilder&
  defineAnchor(const std::string& id = "root")
  {
    add(id, {PatternElement::ruleRef("site"), PatternElement::ruleRef("KEY")});
    return *this;
  }

  /** Certificate rule for a role: <site>/<role>/<subjectVar>/KEY/...
   *
   *  With issuerVariable the issuer-id component binds to that variable, so
   *  a data rule (or another certificate rule) can require the issuer to be
   *  one specific entity by reusing the variable.
   */
  SchemaBuilder&
  deriveCert(const std::string& id, const std::string& role, const std::string& subjectVar,
             const std::string& signer, const std::optional<std::string>& issuerVariable = {})
  {
    Rule r;
    r.id = id;
    r.pattern.elements = {PatternElement::ruleRef("site"), PatternElement::literal(role),
                          PatternElement::variable(subjectVar)};
    if (issuerVariable) {
      r.pattern.elements.push_back(PatternElement::literal(kKeyComponent));
      r.pattern.elements.push_back(PatternElement::wildcard());
      r.pattern.elements.push_back(PatternElement::variable(*issuerVariable));
      r.pattern.elements.push_back(PatternElement::wildcard());
    }
    else {
      r.pattern.elements.push_back(PatternElement::ruleRef("KEY"));
    }
    r.signer = signer;
    m_rules.push_back(std::move(r));
    return *this;
  }

  /// Versioned data rule: <site>/<type>/<vars...>/<version> signed by `signer`.
  SchemaBuilder&
  defineVersionedData(const std::string& id, const std::string& type,
                      const std::vector<std::string>& vars, const std::string& signer)
  {
    Rule r;
    r.id = id;
    r.pattern.elements = {PatternElement::ruleRef("site"), PatternElement::literal(type)};
    for (const auto& v : vars)
      r.pattern.elements.push_back(PatternElement::variable(v));
    r.pattern.elements.push_back(PatternElement::variable("_version"));
    r.constraints.push_back(Constraint{"_version", Constraint::Kind::VersionComponent, {}});
    r.signer = signer;
    m_rules.push_back(std::move(r));
    return *this;
  }

  /// Response rules for an in-zone certificate issuance service.
  SchemaBuilder&
  defineIssuanceService(const std::string& signer)
  {
    add("newResponse",
        {PatternElement::ruleRef("site"), PatternElement::literal("CA"),
         PatternElement::literal("NEW"), PatternElement::wildcard()},
        signer);
    add("challengeResponse",
        {PatternElement::ruleRef("site"), PatternElement::literal("CA"),
         PatternElement::literal("CHALLENGE"), PatternElement::wildcard(),
         PatternElement::wildcard()},
        signer);
    return *this;
  }

  /// Escape hatch: one rule in schema text form.
  SchemaBuilder&
  defineRule(const std::string& line)
  {
    m_rules.push_back(detail::SchemaLineParser(line, 0).parseRule());
    return *this;
  }

  TrustSchema
  build() const
  {
    return TrustSchema::fromRules(m_rules);
  }

private:
  void
  add(std::string id, std::vector<PatternElement> elements,
      std::optional<std::string> signer = {})
  {
    Rule r;
    r.id = std::move(id);
    r.pattern.elements = std::move(elements);
    r.signer = std::move(signer);
    m_rules.push_back(std::move(r));
  }

  std::vector<Rule> m_rules;
};

/** The smallest useful zone schema: entities certified by the zone anchor,
 *  entity-signed data under the entity's own prefix, schema version packets,
 *  and the access control names used for encrypted content.
 */
inline TrustSchema
minimalTrustZone(const std::string& zone)
{
  SchemaBuilder b;
  b.defineZone(zone);
  b.defineAnchor();
  b.defineRule("#entity: #site/ent/#KEY <= #root");
  b.defineRule("#data: #site/ent/... <= #entity");
  b.defineRule("#schemaData: #site/\"SCHEMA\"/_v & {_v: $eq_type(\"v=0\")} <= #root");
  b.defineRule("#kek: #site/\"NAC\"/\"KEK\"/_ <= #root");
  b.defineRule("#kdk: #site/\"NAC\"/\"KDK\"/_/\"ENCRYPTED-BY\"/... <= #root");
  b.defineRule("#ck: #site/ent/\"CK\"/_ <= #entity");
  return b.build();
}

} // namespace teb
