#include "teb/naming.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace teb;

TEST_CASE("email-style identifiers convert to zone names")
{
  NameConvention conv = NameConvention::parse("user@sld.tld", "/ndnfit/tld/sld/user");
  CHECK(convertName(conv, "alice@example.com") == Name::parse("/ndnfit/com/example/alice"));
  CHECK(convertName(conv, "bob@shop.org") == Name::parse("/ndnfit/org/shop/bob"));
}

TEST_CASE("uniqueness suffix appends seven hex characters of the key digest")
{
  NameConvention conv =
    NameConvention::parse("user@host", "/iot/host/user", UniquenessSuffix::KeyDigest7Hex);
  crypto::Drbg rng(3);
  crypto::AsymKeyPair k1 = crypto::generateKeyPair(rng);
  crypto::AsymKeyPair k2 = crypto::generateKeyPair(rng);

  Name n1 = convertName(conv, "bob@laptop", k1.pub);
  REQUIRE(n1.size() == 4);
  CHECK(n1.getPrefix(3) == Name::parse("/iot/laptop/bob"));
  const std::string& suffix = n1[3];
  REQUIRE(suffix.size() == 7);
  for (char c : suffix)
    CHECK(std::string("0123456789abcdef").find(c) != std::string::npos);

  // deterministic per key, distinct across keys
  CHECK(convertName(conv, "bob@laptop", k1.pub) == n1);
  CHECK(convertName(conv, "bob@laptop", k2.pub) != n1);
  CHECK(convertName(conv, "bob@laptop", k2.pub).getPrefix(3) == n1.getPrefix(3));

  CHECK_THROWS_AS(convertName(conv, "bob@laptop"), IdentifierMismatch);
}

TEST_CASE("identifiers must fit the convention's separator shape")
{
  NameConvention conv = NameConvention::parse("user@sld.tld", "/ndnfit/tld/sld/user");
  CHECK_THROWS_AS(convertName(conv, "alice.example@com"), IdentifierMismatch);
  CHECK_THROWS_AS(convertName(conv, "alice@example"), IdentifierMismatch);
  CHECK_THROWS_AS(convertName(conv, "alice@example.co.uk"), IdentifierMismatch);
  CHECK_THROWS_AS(convertName(conv, "@example.com"), IdentifierMismatch);
  CHECK_THROWS_AS(convertName(conv, "alice@example."), IdentifierMismatch);
  CHECK_THROWS_AS(convertName(conv, "alice"), IdentifierMismatch);
}

TEST_CASE("convention format validation")
{
  CHECK_THROWS_AS(NameConvention::parse("user@user.tld", "/z/user"), ParseError);
  CHECK_THROWS_AS(NameConvention::parse("user@@tld", "/z/user"), ParseError);
  CHECK_THROWS_AS(NameConvention::parse("user@host", "/"), ParseError);
  // a target token that names no field stays literal
  NameConvention conv = NameConvention::parse("a@b", "/zone/b/fixed/a");
  CHECK(convertName(conv, "x@y") == Name::parse("/zone/y/fixed/x"));
}

TEST_CASE("distinct identifiers map to distinct names")
{
  NameConvention conv = NameConvention::parse("user@sld.tld", "/ndnfit/tld/sld/user");
  std::set<std::string> ids;
  std::set<Name> names;
  for (int i = 0; i < 1000; ++i) {
    std::string id = "u" + std::to_string(i % 10) + "@s" + std::to_string((i / 10) % 10) + ".t" +
                     std::to_string(i / 100);
    ids.insert(id);
    names.insert(convertName(conv, id));
  }
  REQUIRE(ids.size() == 1000);
  CHECK(names.size() == 1000);
}

TEST_CASE("name registry keeps the assignment one-to-one")
{
  NameRegistry reg;
  reg.claim("alice@example.com", Name::parse("/z/alice"));
  reg.claim("alice@example.com", Name::parse("/z/alice")); // idempotent
  CHECK(reg.size() == 1);
  REQUIRE(reg.find("alice@example.com") != nullptr);
  CHECK(*reg.find("alice@example.com") == Name::parse("/z/alice"));
  REQUIRE(reg.findIdentifier(Name::parse("/z/alice")) != nullptr);
  CHECK(*reg.findIdentifier(Name::parse("/z/alice")) == "alice@example.com");

  CHECK_THROWS_AS(reg.claim("alice@example.com", Name::parse("/z/alice2")), IdentifierMismatch);
  CHECK_THROWS_AS(reg.claim("mallory@example.com", Name::parse("/z/alice")), IdentifierMismatch);
  reg.claim("bob@example.com", Name::parse("/z/bob"));
  CHECK(reg.size() == 2);
  CHECK(reg.find("carol@example.com") == nullptr);
}
