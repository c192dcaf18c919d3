#include "teb/bootstrap.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace teb;

namespace {

/** Minimal in-process procedure set: no network, immediate answers. It still
 *  issues real certificates so EnewCert revalidation has something to check.
 */
struct StubSet : ProcedureSet
{
  crypto::Drbg rng{77};
  crypto::AsymKeyPair rootKey = crypto::generateKeyPair(rng);
  Certificate anchor = makeSelfSigned(Name::parse("/home"), rootKey);
  bool issueRogue = false;

  Poa
  contAuth(const Cac& cac) override
  {
    return {cac.controllerId, toBytes("controller-ok")};
  }

  Pom
  enewAuth(const Eac& eac) override
  {
    return {eac.entityId, toBytes("entity-ok")};
  }

  TrustBundle
  enewTrust(const Poa&) override
  {
    return {SchemaMode::Implicit, anchor, {}};
  }

  Pop
  enewNaming(const Pom& pom, const NameConvention& conv) override
  {
    return {{convertName(conv, pom.entityId)}, pom.entityId, pom.evidence};
  }

  std::vector<Credential>
  enewCert(const Pop& pop, const CertContext&, const TrustBundle& trust) override
  {
    std::vector<Credential> out;
    for (const auto& name : pop.names) {
      crypto::AsymKeyPair key = crypto::generateKeyPair(rng);
      Certificate cert = issueRogue
                           ? makeSelfSigned(name, key) // not under the anchor
                           : issueCertificate(name, key.pub, *trust.anchor, rootKey);
      out.push_back({std::move(cert), std::move(key)});
    }
    return out;
  }
};

BootstrapSession
readySession()
{
  BootstrapSession s;
  s.provideCac({Name::parse("/home"), {{"psk", toBytes("secret")}}});
  s.provideEac({"dev1@home", {}});
  s.provideCertContext({Name::parse("/home/CA"), {}});
  s.setNameConvention(NameConvention::parse("device@zone", "/zone/device"));
  return s;
}

} // namespace

TEST_CASE("a dependency-respecting run completes and carries the artifacts")
{
  StubSet stub;
  BootstrapSession s = readySession();
  for (Procedure p : {Procedure::EnewAuth, Procedure::ContAuth, Procedure::EnewTrust,
                      Procedure::EnewNaming, Procedure::EnewCert})
    runProcedure(s, stub, p);

  CHECK(s.completed());
  REQUIRE(s.credentials().size() == 1);
  CHECK(s.credentials()[0].cert.subject() == Name::parse("/home/dev1"));
  CHECK(s.pop()->names == std::vector<Name>{Name::parse("/home/dev1")});
  CHECK(orderString(s.executedOrder()) == "EA,CA,ET,EN,EC");
  REQUIRE(s.log().size() == 5);
  for (const auto& e : s.log())
    CHECK(e.ok);
}

TEST_CASE("executor admits exactly the six dependency-respecting orders")
{
  std::vector<Procedure> perm(kProcedures.begin(), kProcedures.end());
  std::sort(perm.begin(), perm.end());

  int successes = 0;
  std::set<std::string> successOrders;
  do {
    StubSet stub;
    BootstrapSession s = readySession();
    bool ok = true;
    for (Procedure p : perm) {
      try {
        runProcedure(s, stub, p);
      }
      catch (const DependencyUnmet&) {
        ok = false;
        break;
      }
    }

    // independent check, straight off the dependency arrows
    auto pos = [&perm](Procedure p) {
      return std::find(perm.begin(), perm.end(), p) - perm.begin();
    };
    bool depsOk = pos(Procedure::ContAuth) < pos(Procedure::EnewTrust) &&
                  pos(Procedure::EnewAuth) < pos(Procedure::EnewNaming) &&
                  pos(Procedure::EnewTrust) < pos(Procedure::EnewCert) &&
                  pos(Procedure::EnewNaming) < pos(Procedure::EnewCert);

    INFO("order " << orderString(perm));
    REQUIRE(ok == depsOk);
    REQUIRE(s.completed() == ok);
    REQUIRE(isValidOrdering(perm) == ok);
    if (ok) {
      ++successes;
      REQUIRE(s.executedOrder() == perm);
      successOrders.insert(orderString(perm));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  CHECK(successes == 6);
  CHECK(successOrders == std::set<std::string>{
                           "CA,EA,ET,EN,EC",
                           "CA,EA,EN,ET,EC",
                           "CA,ET,EA,EN,EC",
                           "EA,CA,ET,EN,EC",
                           "EA,CA,EN,ET,EC",
                           "EA,EN,CA,ET,EC",
                         });
  CHECK(validOrderings().size() == 6);
}

TEST_CASE("a decoupled session runs entity procedures first and still completes")
{
  StubSet stub;
  BootstrapSession s = readySession();
  s.markDecoupled();
  CHECK(s.decoupled());

  for (Procedure p : {Procedure::EnewAuth, Procedure::EnewNaming, Procedure::ContAuth,
                      Procedure::EnewTrust, Procedure::EnewCert})
    runProcedure(s, stub, p);

  CHECK(s.completed());
  CHECK(orderString(s.executedOrder()) == "EA,EN,CA,ET,EC");
}

TEST_CASE("decoupling does not relax naming before issuance")
{
  StubSet stub;
  BootstrapSession s = readySession();
  s.markDecoupled();

  runProcedure(s, stub, Procedure::EnewAuth);
  runProcedure(s, stub, Procedure::ContAuth);
  runProcedure(s, stub, Procedure::EnewTrust);
  CHECK_THROWS_AS(runProcedure(s, stub, Procedure::EnewCert), DependencyUnmet);
  CHECK_FALSE(s.completed());
}

TEST_CASE("decoupling is only available on a fresh session")
{
  StubSet stub;
  BootstrapSession s = readySession();
  CHECK_FALSE(s.decoupled());
  runProcedure(s, stub, Procedure::EnewAuth);
  CHECK_THROWS_AS(s.markDecoupled(), ProtocolOrder);
  CHECK_FALSE(s.decoupled());
}

TEST_CASE("a decoupled session accepts the same orders as a default one")
{
  std::vector<Procedure> perm(kProcedures.begin(), kProcedures.end());
  std::sort(perm.begin(), perm.end());
  do {
    auto attempt = [&perm](bool decouple) {
      StubSet stub;
      BootstrapSession s = readySession();
      if (decouple)
        s.markDecoupled();
      try {
        for (Procedure p : perm)
          runProcedure(s, stub, p);
      }
      catch (const DependencyUnmet&) {
        return false;
      }
      return s.completed();
    };
    INFO("order " << orderString(perm));
    REQUIRE(attempt(false) == attempt(true));
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("slots are write-once and procedures do not re-run")
{
  StubSet stub;
  BootstrapSession s = readySession();
  CHECK_THROWS_AS(s.provideCac({Name::parse("/other"), {}}), SlotAlreadyFilled);
  CHECK_THROWS_AS(s.setNameConvention(NameConvention::parse("a@b", "/b/a")), SlotAlreadyFilled);

  runProcedure(s, stub, Procedure::ContAuth);
  CHECK_THROWS_AS(runProcedure(s, stub, Procedure::ContAuth), SlotAlreadyFilled);
}

TEST_CASE("missing inputs surface as the exact unmet slot")
{
  StubSet stub;
  BootstrapSession s;
  try {
    runProcedure(s, stub, Procedure::ContAuth);
    FAIL("expected DependencyUnmet");
  }
  catch (const DependencyUnmet& e) {
    CHECK(e.slot() == "cac");
  }

  s.provideEac({"dev1@home", {}});
  runProcedure(s, stub, Procedure::EnewAuth);
  try {
    runProcedure(s, stub, Procedure::EnewNaming);
    FAIL("expected DependencyUnmet");
  }
  catch (const DependencyUnmet& e) {
    CHECK(e.slot() == "convention");
  }
  REQUIRE(s.log().size() >= 2);
  CHECK_FALSE(s.log().back().ok);
  CHECK(s.log().back().error == "DependencyUnmet");
}

TEST_CASE("issued credentials are revalidated against the trust bundle")
{
  StubSet stub;
  stub.issueRogue = true;
  BootstrapSession s = readySession();
  for (Procedure p : {Procedure::ContAuth, Procedure::EnewAuth, Procedure::EnewTrust,
                      Procedure::EnewNaming})
    runProcedure(s, stub, p);
  CHECK_THROWS_AS(runProcedure(s, stub, Procedure::EnewCert), ChainInvalid);
  CHECK_FALSE(s.completed());
  CHECK(s.credentials().empty());
  CHECK(s.log().back().error == "ChainInvalid");
  CHECK_FALSE(s.log().back().ok);
}

TEST_CASE("trust bundle wire round trip")
{
  StubSet stub;
  TrustBundle imp{SchemaMode::Implicit, stub.anchor, {}};
  Bytes w1 = encodeTrustBundle(imp);
  TrustBundle imp2 = decodeTrustBundle(w1);
  CHECK(imp2.mode == SchemaMode::Implicit);
  CHECK(imp2.anchor->data() == stub.anchor.data());
  CHECK(imp2.schema().mode() == SchemaMode::Implicit);

  TrustBundle exp{SchemaMode::Explicit, stub.anchor,
                  "#root: \"home\"/#KEY\n#KEY: \"KEY\"/_/_/_\n"};
  Bytes w2 = encodeTrustBundle(exp);
  TrustBundle exp2 = decodeTrustBundle(w2);
  CHECK(exp2.mode == SchemaMode::Explicit);
  CHECK(exp2.schemaText == exp.schemaText);
  CHECK(exp2.schema().anchorRule() == "root");

  for (size_t cut = 0; cut < w2.size(); ++cut)
    CHECK_THROWS_AS(decodeTrustBundle(BytesView(w2.data(), cut)), MalformedPacket);
  Bytes badMode = w1;
  badMode[0] = 2;
  CHECK_THROWS_AS(decodeTrustBundle(badMode), MalformedPacket);
  Bytes trailing = w1;
  trailing.push_back(0);
  CHECK_THROWS_AS(decodeTrustBundle(trailing), MalformedPacket);
}

TEST_CASE("procedure codes round trip")
{
  for (Procedure p : kProcedures) {
    auto back = procedureFromCode(code(p));
    REQUIRE(back.has_value());
    CHECK(*back == p);
  }
  CHECK_FALSE(procedureFromCode("XX").has_value());
  CHECK(orderString({Procedure::ContAuth, Procedure::EnewCert}) == "CA,EC");
}
