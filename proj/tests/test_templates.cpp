#include "teb/schema_templates.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

using namespace teb;

namespace {

const char* kZoneText = R"(
#KEY: "KEY"/_/_/_
#site: "lvs-test"
#article: #site/"article"/author/post/_version & {_version: $eq_type("v=0")} <= #author
#author: #site/"author"/author/"KEY"/_/admin/_ <= #admin
#admin: #site/"admin"/admin/#KEY <= #root
#root: #site/#KEY
)";

TrustSchema
builtZone()
{
  return SchemaBuilder()
    .defineZone("lvs-test")
    .defineAnchor()
    .deriveCert("admin", "admin", "admin", "root")
    .deriveCert("author", "author", "author", "admin", "admin")
    .defineVersionedData("article", "article", {"author", "post"}, "author")
    .build();
}

std::vector<Rule>
sortedRules(const TrustSchema& s)
{
  std::vector<Rule> rs = s.rules();
  std::sort(rs.begin(), rs.end(), [](const Rule& a, const Rule& b) { return a.id < b.id; });
  return rs;
}

struct Zone
{
  crypto::Drbg rng;
  crypto::AsymKeyPair rootKey, amyKey, bobKey, aliceKey, carolKey;
  Certificate anchor, amy, bob, alice, carol;

  explicit Zone(uint64_t seed)
    : rng(seed)
    , rootKey(crypto::generateKeyPair(rng))
    , amyKey(crypto::generateKeyPair(rng))
    , bobKey(crypto::generateKeyPair(rng))
    , aliceKey(crypto::generateKeyPair(rng))
    , carolKey(crypto::generateKeyPair(rng))
    , anchor(makeSelfSigned(Name::parse("/lvs-test"), rootKey))
    , amy(issueCertificate(Name::parse("/lvs-test/admin/amy"), amyKey.pub, anchor, rootKey))
    , bob(issueCertificate(Name::parse("/lvs-test/admin/bob"), bobKey.pub, anchor, rootKey))
    , alice(issueCertificate(Name::parse("/lvs-test/author/alice"), aliceKey.pub, amy, amyKey))
    , carol(issueCertificate(Name::parse("/lvs-test/author/carol"), carolKey.pub, bob, bobKey))
  {
  }
};

} // namespace

TEST_CASE("builder reproduces the handwritten zone schema rule for rule")
{
  TrustSchema handwritten = parseSchema(kZoneText);
  TrustSchema built = builtZone();
  CHECK(sortedRules(built) == sortedRules(handwritten));
  CHECK(built.anchorRule() == handwritten.anchorRule());
}

TEST_CASE("builder and handwritten schema agree on generated chains")
{
  TrustSchema handwritten = parseSchema(kZoneText);
  TrustSchema built = builtZone();
  Zone z(42);
  crypto::Drbg rng(100);

  int accepted = 0, rejected = 0;
  for (int trial = 0; trial < 200; ++trial) {
    // draw an author chain, then sometimes break one aspect of it
    bool viaAmy = rng.below(2) == 0;
    const Certificate& authorCert = viaAmy ? z.alice : z.carol;
    const crypto::AsymKeyPair& authorKey = viaAmy ? z.aliceKey : z.carolKey;
    const Certificate& adminCert = viaAmy ? z.amy : z.bob;

    Data art;
    std::string author = authorCert.subject()[2];
    std::string site = rng.below(10) == 0 ? "other" : "lvs-test";
    std::string version = rng.below(8) == 0 ? "plain" : "v=" + std::to_string(rng.below(3));
    if (rng.below(10) == 0)
      author = "somebodyelse"; // breaks the author binding across the link
    art.name = Name::parse("/" + site + "/article/" + author + "/post" +
                           std::to_string(rng.below(4)) + "/" + version);
    art.content = toBytes("payload");
    signData(art, authorKey, authorCert.name());
    if (rng.below(10) == 0)
      art.content.push_back('!');

    std::vector<Data> chain = {art, authorCert.data(), adminCert.data()};
    switch (rng.below(6)) {
      case 0:
        chain.push_back(z.anchor.data());
        break;
      case 1:
        chain.erase(chain.begin() + 1); // article under the admin directly
        break;
      case 2:
        chain[2] = (viaAmy ? z.bob : z.amy).data(); // wrong admin certificate
        break;
      default:
        break;
    }

    ValidationReport a = validateChain(handwritten, z.anchor, chain);
    ValidationReport b = validateChain(built, z.anchor, chain);
    INFO("trial " << trial << " name " << art.name.toUri() << " reasons '" << a.reason << "' / '"
                  << b.reason << "'");
    REQUIRE(a.accepted == b.accepted);
    REQUIRE(a.failingLink == b.failingLink);
    ++(a.accepted ? accepted : rejected);
  }
  CHECK(accepted > 20);
  CHECK(rejected > 20);
}

TEST_CASE("minimal trust zone covers entity data, schema, and access keys")
{
  TrustSchema s = minimalTrustZone("home");
  crypto::Drbg rng(5);
  auto rootKey = crypto::generateKeyPair(rng);
  auto dev1Key = crypto::generateKeyPair(rng);
  auto dev2Key = crypto::generateKeyPair(rng);
  Certificate anchor = makeSelfSigned(Name::parse("/home"), rootKey);
  Certificate dev1 = issueCertificate(Name::parse("/home/dev1"), dev1Key.pub, anchor, rootKey);
  Certificate dev2 = issueCertificate(Name::parse("/home/dev2"), dev2Key.pub, anchor, rootKey);

  auto makeData = [](const std::string& uri) {
    Data d;
    d.name = Name::parse(uri);
    d.content = toBytes("x");
    return d;
  };

  Data reading = makeData("/home/dev1/temp/reading1");
  signData(reading, dev1Key, dev1.name());
  CHECK(validateChain(s, anchor, {reading, dev1.data()}).accepted);

  // an entity cannot publish under another entity's prefix
  Data crossed = makeData("/home/dev1/temp/reading2");
  signData(crossed, dev2Key, dev2.name());
  CHECK_FALSE(validateChain(s, anchor, {crossed, dev2.data()}).accepted);

  Data ck = makeData("/home/dev1/CK/ck0001");
  signData(ck, dev1Key, dev1.name());
  CHECK(validateChain(s, anchor, {ck, dev1.data()}).accepted);

  Data kek = makeData("/home/NAC/KEK/kid01");
  signData(kek, rootKey, anchor.name());
  CHECK(validateChain(s, anchor, {kek}).accepted);

  Data kdk = makeData("/home/NAC/KDK/kid01/ENCRYPTED-BY/home/dev2/KEY/abc/root/v=1");
  signData(kdk, rootKey, anchor.name());
  CHECK(validateChain(s, anchor, {kdk}).accepted);

  Data schemaData = makeData("/home/SCHEMA/v=3");
  signData(schemaData, rootKey, anchor.name());
  CHECK(validateChain(s, anchor, {schemaData}).accepted);

  // entities cannot impersonate the manager for access keys
  Data fakeKek = makeData("/home/NAC/KEK/kid02");
  signData(fakeKek, dev1Key, dev1.name());
  CHECK_FALSE(validateChain(s, anchor, {fakeKek, dev1.data()}).accepted);
}

TEST_CASE("issuance service rules validate response packets")
{
  TrustSchema s = SchemaBuilder()
                    .defineZone("lvs-test")
                    .defineAnchor()
                    .defineIssuanceService("root")
                    .build();
  crypto::Drbg rng(6);
  auto rootKey = crypto::generateKeyPair(rng);
  Certificate anchor = makeSelfSigned(Name::parse("/lvs-test"), rootKey);

  Data resp;
  resp.name = Name::parse("/lvs-test/CA/NEW/0a1b2c3d");
  resp.content = toBytes("status");
  signData(resp, rootKey, anchor.name());
  CHECK(validateChain(s, anchor, {resp}).accepted);

  Data challenge;
  challenge.name = Name::parse("/lvs-test/CA/CHALLENGE/req01/9f8e7d6c");
  challenge.content = toBytes("status");
  signData(challenge, rootKey, anchor.name());
  CHECK(validateChain(s, anchor, {challenge}).accepted);

  Data offPattern;
  offPattern.name = Name::parse("/lvs-test/CA/OTHER/0a1b2c3d");
  offPattern.content = toBytes("status");
  signData(offPattern, rootKey, anchor.name());
  CHECK_FALSE(validateChain(s, anchor, {offPattern}).accepted);
}
