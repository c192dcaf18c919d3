#include "teb/schema_templates.hpp"
#include "teb/tib.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace teb;

namespace {

// identities nest four levels under the zone root, so a leaf producer's
// chain is five certificates long including the anchor
const char* kDeepText = R"(
  #KEY: "KEY"/_/_/_
  #root: "zone"/#KEY
  #l1: "zone"/a1/#KEY <= #root
  #l2: "zone"/a1/a2/#KEY <= #l1
  #l3: "zone"/a1/a2/a3/#KEY <= #l2
  #l4: "zone"/a1/a2/a3/a4/#KEY <= #l3
  #deepData: "zone"/a1/a2/a3/a4/... <= #l4
  #deepCk: "zone"/a1/a2/a3/a4/"CK"/_ <= #l4
  #kek: "zone"/"NAC"/"KEK"/_ <= #root
  #kdk: "zone"/"NAC"/"KDK"/_/"ENCRYPTED-BY"/... <= #root
)";

struct DeepZone
{
  Network net;
  crypto::Drbg rng{2026};
  crypto::AsymKeyPair rootKey = crypto::generateKeyPair(rng);
  Certificate anchor = makeSelfSigned(Name::parse("/zone"), rootKey);
  TrustBundle bundle{SchemaMode::Explicit, anchor, kDeepText};

  crypto::AsymKeyPair k1 = crypto::generateKeyPair(rng);
  Certificate c1 = issueCertificate(Name::parse("/zone/a"), k1.pub, anchor, rootKey);
  crypto::AsymKeyPair k2 = crypto::generateKeyPair(rng);
  Certificate c2 = issueCertificate(Name::parse("/zone/a/b"), k2.pub, c1, k1);
  crypto::AsymKeyPair k3 = crypto::generateKeyPair(rng);
  Certificate c3 = issueCertificate(Name::parse("/zone/a/b/c"), k3.pub, c2, k2);
  crypto::AsymKeyPair k4 = crypto::generateKeyPair(rng);
  Certificate c4 = issueCertificate(Name::parse("/zone/a/b/c/d"), k4.pub, c3, k3);

  crypto::AsymKeyPair monKey = crypto::generateKeyPair(rng);
  Certificate mon = issueCertificate(Name::parse("/zone/mon"), monKey.pub, anchor, rootKey);

  std::unique_ptr<Tib> controller =
    Tib::installDirect(net, "ctrl", {anchor, rootKey}, bundle, {}, crypto::Drbg{1});
  std::unique_ptr<Tib> producer = Tib::installDirect(
    net, "prod", {c4, k4}, bundle, {c3.data(), c2.data(), c1.data()}, crypto::Drbg{2});
  std::unique_ptr<Tib> consumer =
    Tib::installDirect(net, "mon", {mon, monKey}, bundle, {}, crypto::Drbg{3});
};

struct FetchCounts
{
  size_t cert = 0;
  size_t ck = 0;
  size_t kdk = 0;
};

/// Classify the Interests sent since `begin` by what they were fetching.
FetchCounts
countFetches(const Network& net, size_t begin)
{
  FetchCounts fc;
  const auto& evs = net.transcript().events();
  for (size_t i = begin; i < evs.size(); ++i) {
    if (evs[i].channel != "interest")
      continue;
    Name n = Name::parse(evs[i].summary);
    if (n.size() >= 4 && n[n.size() - 4] == "KEY" && !n.contains("ENCRYPTED-BY"))
      ++fc.cert;
    else if (n.size() >= 2 && n[n.size() - 2] == "CK")
      ++fc.ck;
    else if (n.contains("ENCRYPTED-BY"))
      ++fc.kdk;
  }
  return fc;
}

size_t
mark(const Network& net)
{
  return net.transcript().events().size();
}

} // namespace

TEST_CASE("encrypted content round-trips between producer and granted consumer")
{
  DeepZone z;
  z.controller->nacSetup(Name::parse("/zone"));
  z.controller->grantAccess(Name::parse("/zone"), z.mon);

  Bytes payload = toBytes("22.5 degrees");
  auto [app, ckData] = z.producer->produce(Name::parse("/zone/a/b/c/d/temp/v=1"), payload);
  REQUIRE(app.name == Name::parse("/zone/a/b/c/d/temp/v=1"));
  REQUIRE(ckData.name.getPrefix(5) == Name::parse("/zone/a/b/c/d"));
  REQUIRE(ckData.name[5] == kCkComponent);
  // the payload travels only in encrypted form
  REQUIRE(toString(app.content).find("22.5") == std::string::npos);

  auto [name, plain] = z.consumer->consume(Name::parse("/zone/a/b/c/d/temp/v=1"));
  REQUIRE(name == app.name);
  REQUIRE(plain == payload);

  // a second content item under the same manager round-trips too
  z.producer->produce(Name::parse("/zone/a/b/c/d/hum/v=1"), toBytes("61%"));
  auto second = z.consumer->consume(Name::parse("/zone/a/b/c/d/hum/v=1"));
  REQUIRE(second.second == toBytes("61%"));
}

TEST_CASE("consumers without a decryption grant are rejected")
{
  DeepZone z;
  z.controller->nacSetup(Name::parse("/zone"));
  z.producer->produce(Name::parse("/zone/a/b/c/d/temp/v=1"), toBytes("secret"));
  REQUIRE_THROWS_AS(z.consumer->consume(Name::parse("/zone/a/b/c/d/temp/v=1")),
                    NotAuthorized);
}

TEST_CASE("producing requires a governing access manager and a matching identity")
{
  DeepZone z;
  REQUIRE_THROWS_AS(z.producer->produce(Name::parse("/zone/a/b/c/d/temp/v=1"), toBytes("x")),
                    NoKek);
  z.controller->nacSetup(Name::parse("/zone"));
  REQUIRE_THROWS_AS(z.producer->produce(Name::parse("/elsewhere/temp"), toBytes("x")),
                    NoSigningIdentity);
  REQUIRE_THROWS_AS(z.controller->nacSetup(Name::parse("/zone")), SlotAlreadyFilled);
}

TEST_CASE("access management requires the anchor identity")
{
  DeepZone z;
  REQUIRE_THROWS_AS(z.producer->nacSetup(Name::parse("/zone/a/b/c/d")), NotAuthorized);
  REQUIRE_THROWS_AS(z.consumer->grantAccess(Name::parse("/zone"), z.mon), NoKek);
}

TEST_CASE("chain walk costs five fetches cold and none warm at depth five")
{
  DeepZone z;
  z.controller->nacSetup(Name::parse("/zone"));
  z.controller->grantAccess(Name::parse("/zone"), z.mon);
  z.producer->produce(Name::parse("/zone/a/b/c/d/temp/v=1"), toBytes("t"));
  z.producer->produce(Name::parse("/zone/a/b/c/d/hum/v=1"), toBytes("h"));

  // cold: producer cert, three intermediates, and the anchor refetch
  size_t m = mark(z.net);
  z.consumer->consume(Name::parse("/zone/a/b/c/d/temp/v=1"));
  FetchCounts cold = countFetches(z.net, m);
  REQUIRE(cold.cert == 5);
  REQUIRE(cold.ck == 1);
  REQUIRE(cold.kdk == 1);

  // warm rerun of the same name: everything is in the validated key cache
  m = mark(z.net);
  z.consumer->consume(Name::parse("/zone/a/b/c/d/temp/v=1"));
  FetchCounts warm = countFetches(z.net, m);
  REQUIRE(warm.cert == 0);
  REQUIRE(warm.ck == 0);
  REQUIRE(warm.kdk == 0);

  // different content from the same producer: only its fresh CK is fetched
  m = mark(z.net);
  z.consumer->consume(Name::parse("/zone/a/b/c/d/hum/v=1"));
  FetchCounts other = countFetches(z.net, m);
  REQUIRE(other.cert == 0);
  REQUIRE(other.ck == 1);
  REQUIRE(other.kdk == 0);
}

TEST_CASE("disabling the validated key cache forces a full walk every time")
{
  DeepZone z;
  z.controller->nacSetup(Name::parse("/zone"));
  z.controller->grantAccess(Name::parse("/zone"), z.mon);
  z.producer->produce(Name::parse("/zone/a/b/c/d/temp/v=1"), toBytes("t"));
  z.consumer->setCacheEnabled(false);

  for (int round = 0; round < 2; ++round) {
    size_t m = mark(z.net);
    z.consumer->consume(Name::parse("/zone/a/b/c/d/temp/v=1"));
    FetchCounts fc = countFetches(z.net, m);
    REQUIRE(fc.cert == 5);
    REQUIRE(fc.kdk == 1);
  }

  // re-enabling starts cold, then cuts the walk again
  z.consumer->setCacheEnabled(true);
  size_t m = mark(z.net);
  z.consumer->consume(Name::parse("/zone/a/b/c/d/temp/v=1"));
  REQUIRE(countFetches(z.net, m).cert == 5);
  m = mark(z.net);
  z.consumer->consume(Name::parse("/zone/a/b/c/d/temp/v=1"));
  REQUIRE(countFetches(z.net, m).cert == 0);
}

TEST_CASE("validated key cache is FIFO bounded and deduplicating")
{
  ValidatedKeyCache cache(2);
  Data a;
  a.name = Name::parse("/a");
  Data b;
  b.name = Name::parse("/b");
  Data c;
  c.name = Name::parse("/c");

  cache.insert(a);
  cache.insert(b);
  REQUIRE(cache.size() == 2);
  cache.insert(a); // duplicate, no effect
  REQUIRE(cache.size() == 2);
  REQUIRE(cache.find(Name::parse("/a")) != nullptr);

  cache.insert(c); // evicts the oldest entry
  REQUIRE(cache.size() == 2);
  REQUIRE(cache.find(Name::parse("/a")) == nullptr);
  REQUIRE(cache.find(Name::parse("/b")) != nullptr);
  REQUIRE(cache.find(Name::parse("/c")) != nullptr);
  REQUIRE(cache.hits() == 3);
  REQUIRE(cache.misses() == 1);
}

TEST_CASE("key chain picks the longest matching identity")
{
  crypto::Drbg rng{5};
  crypto::AsymKeyPair ka = crypto::generateKeyPair(rng);
  crypto::AsymKeyPair kb = crypto::generateKeyPair(rng);
  Certificate certA = makeSelfSigned(Name::parse("/zone/a"), ka);
  Certificate certB = makeSelfSigned(Name::parse("/zone/a/b"), kb);

  KeyChain chain;
  chain.addCredential({certA, ka});
  chain.addCredential({certB, kb});

  const Credential* got = chain.selectForName(Name::parse("/zone/a/b/c"));
  REQUIRE(got != nullptr);
  REQUIRE(got->cert.subject() == Name::parse("/zone/a/b"));
  got = chain.selectForName(Name::parse("/zone/a/x"));
  REQUIRE(got != nullptr);
  REQUIRE(got->cert.subject() == Name::parse("/zone/a"));
  REQUIRE(chain.selectForName(Name::parse("/other")) == nullptr);

  REQUIRE(chain.findByCertName(certB.name()) != nullptr);
  REQUIRE(chain.findByCertName(Name::parse("/nope")) == nullptr);
}

TEST_CASE("self-bootstrap yields a working implicit zone")
{
  Network net;
  auto ctrl = Tib::selfBootstrap(net, "ctrl", Name::parse("/home"), crypto::Drbg{11});
  REQUIRE(ctrl->identities() == std::vector<Name>{Name::parse("/home")});
  REQUIRE(ctrl->trust().mode == SchemaMode::Implicit);

  // issue device identities off the controller's anchor credential
  const Credential& root = ctrl->keyChain().credentials().front();
  crypto::Drbg rng{12};
  crypto::AsymKeyPair sensorKey = crypto::generateKeyPair(rng);
  Certificate sensor =
    issueCertificate(Name::parse("/home/sensor"), sensorKey.pub, root.cert, root.key);
  crypto::AsymKeyPair appKey = crypto::generateKeyPair(rng);
  Certificate app = issueCertificate(Name::parse("/home/app"), appKey.pub, root.cert, root.key);

  auto producer =
    Tib::installDirect(net, "sensor", {sensor, sensorKey}, ctrl->trust(), {}, crypto::Drbg{13});
  auto consumer =
    Tib::installDirect(net, "app", {app, appKey}, ctrl->trust(), {}, crypto::Drbg{14});

  ctrl->nacSetup(Name::parse("/home"));
  ctrl->grantAccess(Name::parse("/home"), app);
  producer->produce(Name::parse("/home/sensor/reading/v=7"), toBytes("42"));
  auto got = consumer->consume(Name::parse("/home/sensor/reading/v=7"));
  REQUIRE(got.second == toBytes("42"));
}

TEST_CASE("adopting a tib requires a completed bootstrap")
{
  Network net;
  BootstrapSession session;
  REQUIRE_THROWS_AS(Tib::fromSession(net, "dev", session, crypto::Drbg{1}), ProtocolOrder);
}

TEST_CASE("direct install validates the provided credential")
{
  DeepZone z;
  // c4's chain without the intermediates cannot reach the anchor
  REQUIRE_THROWS_AS(
    Tib::installDirect(z.net, "bad", {z.c4, z.k4}, z.bundle, {}, crypto::Drbg{9}),
    ChainInvalid);
}

TEST_CASE("schema publication distributes versions to the zone")
{
  Network net;
  crypto::Drbg rng{21};
  crypto::AsymKeyPair rootKey = crypto::generateKeyPair(rng);
  Certificate anchor = makeSelfSigned(Name::parse("/campus"), rootKey);
  TrustBundle implicitBundle{SchemaMode::Implicit, anchor, {}};

  crypto::AsymKeyPair devKey = crypto::generateKeyPair(rng);
  Certificate dev = issueCertificate(Name::parse("/campus/dev"), devKey.pub, anchor, rootKey);

  auto ctrl = Tib::installDirect(net, "ctrl", {anchor, rootKey}, implicitBundle, {},
                                 crypto::Drbg{22});
  auto device = Tib::installDirect(net, "dev", {dev, devKey}, implicitBundle, {},
                                   crypto::Drbg{23});

  TrustSchema campus = minimalTrustZone("campus");
  ctrl->publishSchema(campus, 1);
  REQUIRE(ctrl->schemaVersion() == 1);
  REQUIRE_THROWS_AS(ctrl->publishSchema(campus, 1), StaleVersion);
  REQUIRE_THROWS_AS(device->publishSchema(campus, 2), NotAuthorized);

  REQUIRE(device->trust().mode == SchemaMode::Implicit);
  REQUIRE(device->fetchSchema() == 1);
  REQUIRE(device->trust().mode == SchemaMode::Explicit);
  REQUIRE(device->schemaVersion() == 1);
  // refetching the same version is a stale update
  REQUIRE_THROWS_AS(device->fetchSchema(), StaleVersion);

  ctrl->publishSchema(campus, 2);
  REQUIRE(device->fetchSchema() == 2);

  // the adopted rules govern validation: device content now passes the
  // explicit schema when consumed by another zone member
  crypto::AsymKeyPair appKey = crypto::generateKeyPair(rng);
  Certificate app = issueCertificate(Name::parse("/campus/app"), appKey.pub, anchor, rootKey);
  auto appTib = Tib::installDirect(net, "app", {app, appKey}, device->trust(), {},
                                   crypto::Drbg{24});
  ctrl->nacSetup(Name::parse("/campus"));
  ctrl->grantAccess(Name::parse("/campus"), app);
  device->produce(Name::parse("/campus/dev/log/v=1"), toBytes("ok"));
  REQUIRE(appTib->consume(Name::parse("/campus/dev/log/v=1")).second == toBytes("ok"));
}

TEST_CASE("schema packets not signed by the zone controller are rejected")
{
  Network net;
  crypto::Drbg rng{31};
  crypto::AsymKeyPair rootKey = crypto::generateKeyPair(rng);
  Certificate anchor = makeSelfSigned(Name::parse("/campus2"), rootKey);
  TrustBundle implicitBundle{SchemaMode::Implicit, anchor, {}};

  crypto::AsymKeyPair devKey = crypto::generateKeyPair(rng);
  Certificate dev = issueCertificate(Name::parse("/campus2/dev"), devKey.pub, anchor, rootKey);
  auto device = Tib::installDirect(net, "dev", {dev, devKey}, implicitBundle, {},
                                   crypto::Drbg{32});

  SECTION("signed by a non-anchor key")
  {
    Data fake;
    fake.name = Name::parse("/campus2/SCHEMA/v=1");
    fake.content = toBytes(toText(minimalTrustZone("campus2")));
    signData(fake, devKey, dev.name());
    net.addEntity("rogue");
    net.addHandler("rogue", [fake](const Interest&) { return fake; });
    net.registerPrefix("rogue", Name::parse("/campus2/SCHEMA"));
    REQUIRE_THROWS_AS(device->fetchSchema(), ChainInvalid);
  }

  SECTION("properly signed but unversioned")
  {
    Data odd;
    odd.name = Name::parse("/campus2/SCHEMA/latest");
    odd.content = toBytes(toText(minimalTrustZone("campus2")));
    signData(odd, rootKey, anchor.name());
    net.addEntity("rogue");
    net.addHandler("rogue", [odd](const Interest&) { return odd; });
    net.registerPrefix("rogue", Name::parse("/campus2/SCHEMA"));
    REQUIRE_THROWS_AS(device->fetchSchema(), ChainInvalid);
  }

  SECTION("nothing published yet")
  {
    REQUIRE_THROWS_AS(device->fetchSchema(), FetchTimeout);
  }
}

TEST_CASE("version components parse strictly")
{
  REQUIRE(parseVersion("v=12") == 12);
  REQUIRE(parseVersion("v=0") == 0);
  REQUIRE_FALSE(parseVersion("v=").has_value());
  REQUIRE_FALSE(parseVersion("x=1").has_value());
  REQUIRE_FALSE(parseVersion("v=1a").has_value());
  REQUIRE_FALSE(parseVersion("12").has_value());
}
