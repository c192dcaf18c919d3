#pragma once

#include "../tib.hpp"
#include "protocol.hpp"

namespace teb {

/** Everything an entity needs, packed by the zone operator: the trust bundle,
 *  the entity's credentials (certificate plus private key), and any extra
 *  issuer certificates consumers of those credentials may have to walk.
 */
struct IdentityBundle
{
  TrustBundle trust;
  std::vector<Credential> credentials;
  std::vector<Data> chain;
};

inline Bytes
encodeIdentityBundle(const IdentityBundle& b)
{
  Writer w;
  w.var(encodeTrustBundle(b.trust));
  w.u8(static_cast<uint8_t>(b.credentials.size()));
  for (const auto& c : b.credentials)
    w.var(encode(c.cert.data())).var(c.key.priv);
  w.u8(static_cast<uint8_t>(b.chain.size()));
  for (const auto& d : b.chain)
    w.var(encode(d));
  return w.take();
}

inline IdentityBundle
decodeIdentityBundle(BytesView wire)
{
  Reader r(wire);
  IdentityBundle b;
  b.trust = decodeTrustBundle(r.var());
  size_t creds = r.u8();
  for (size_t i = 0; i < creds; ++i) {
    Certificate cert = Certificate::fromData(decodeData(r.var()));
    Bytes priv = r.var();
    BytesView pub = cert.publicKey();
    b.credentials.push_back({std::move(cert), {Bytes(pub.begin(), pub.end()), std::move(priv)}});
  }
  size_t chain = r.u8();
  for (size_t i = 0; i < chain; ++i)
    b.chain.push_back(decodeData(r.var()));
  r.expectEnd();
  return b;
}

/** All-or-nothing check before anything from the bundle gets installed:
 *  every credential must validate under the bundled schema and carry the
 *  private key matching its certificate.
 */
inline void
validateIdentityBundle(const IdentityBundle& b)
{
  if (!b.trust.anchor)
    throw BundleInvalid("bundle carries no anchor");
  TrustSchema schema = b.trust.schema();
  if (b.credentials.empty())
    throw BundleInvalid("bundle carries no credentials");

  std::map<Name, Data> pool;
  for (const auto& c : b.credentials)
    pool[c.cert.name()] = c.cert.data();
  for (const auto& d : b.chain)
    pool[d.name] = d;

  const Bytes probe = toBytes("bundle-key-probe");
  for (const auto& c : b.credentials) {
    if (c.key.priv.size() != 64 ||
        !crypto::verify(c.cert.publicKey(), probe, crypto::sign(c.key.priv, probe)))
      throw BundleInvalid("no usable private key for " + c.cert.subject().toUri());

    std::vector<Data> links = {c.cert.data()};
    for (size_t guard = 0; guard < 8; ++guard) {
      const auto& locator = links.back().keyLocator;
      if (!locator || *locator == b.trust.anchor->name() || *locator == links.back().name)
        break;
      auto it = pool.find(*locator);
      if (it == pool.end())
        throw BundleInvalid("issuer " + locator->toUri() + " is not in the bundle");
      links.push_back(it->second);
    }
    ValidationReport rep = validateChain(schema, *b.trust.anchor, links);
    if (!rep.accepted)
      throw BundleInvalid("chain for " + c.cert.subject().toUri() + ": " + rep.reason);
  }
}

/** Procedures for console-delivered identity bundles. The attached console
 *  stands in for mutual authentication; trust install decodes and validates
 *  the bundle atomically, and issuance hands out exactly the bundled
 *  credentials.
 */
class DctSet : public ProcedureSet
{
public:
  DctSet(Bytes bundleWire)
    : m_wire(std::move(bundleWire))
  {
  }

  Poa
  contAuth(const Cac& cac) override
  {
    return {cac.controllerId, toBytes("console-attested")};
  }

  Pom
  enewAuth(const Eac& eac) override
  {
    return {eac.entityId, toBytes("console-attested")};
  }

  TrustBundle
  enewTrust(const Poa&) override
  {
    try {
      IdentityBundle b = decodeIdentityBundle(m_wire);
      validateIdentityBundle(b);
      m_bundle = std::move(b);
    }
    catch (const BundleInvalid&) {
      throw;
    }
    catch (const Error& e) {
      throw BundleInvalid(std::string("bundle failed validation: ") + e.what());
    }
    return m_bundle->trust;
  }

  Pop
  enewNaming(const Pom& pom, const NameConvention& conv) override
  {
    if (!m_bundle)
      throw ProtocolOrder("the bundle has not been validated");
    std::vector<Name> names;
    for (const auto& c : m_bundle->credentials)
      names.push_back(c.cert.subject());
    if (conv.suffix == UniquenessSuffix::None && names[0] != convertName(conv, pom.entityId))
      throw IdentifierMismatch("assigned name does not follow the naming convention");
    return {names, pom.entityId, fromHex(crypto::digestHex(m_wire, 16))};
  }

  std::vector<Credential>
  enewCert(const Pop&, const CertContext&, const TrustBundle&) override
  {
    if (!m_bundle)
      throw ProtocolOrder("the bundle has not been validated");
    return m_bundle->credentials;
  }

private:
  Bytes m_wire;
  std::optional<IdentityBundle> m_bundle;
};

struct DctOptions
{
  std::vector<std::string> capabilities; // extra names under the device's name
  bool tamperBundle = false;             // corrupt the bundle in transit
  bool dropPrivateKeys = false;          // ship certificates without their keys
  bool rogueChain = false;               // sign the device certificate outside the zone
};

struct DctRun
{
  BootstrapSession session;
  std::string error;
  std::unique_ptr<Tib> controllerTib;
  Bytes bundleWire;
};

/// Onboard one device by handing it an operator-built identity bundle.
inline DctRun
runDctBundle(Network& net, const Name& domain, const std::string& controllerId,
             const std::string& deviceId, const NameConvention& convention,
             const std::string& schemaText, const DctOptions& opt, uint64_t seed)
{
  ensureEntity(net, controllerId);
  ensureEntity(net, deviceId);

  DctRun run;
  run.controllerTib = Tib::selfBootstrap(net, controllerId, domain, crypto::Drbg(seed),
                                         SchemaMode::Explicit, schemaText);
  Credential anchorCred = run.controllerTib->keyChain().credentials().front();

  crypto::Drbg rng(seed + 1);
  IdentityBundle bundle;
  bundle.trust = run.controllerTib->trust();

  Credential issuer = anchorCred;
  if (opt.rogueChain) {
    crypto::AsymKeyPair rogueKey = crypto::generateKeyPair(rng);
    Certificate rogueCert = makeSelfSigned(Name{"intruder"}, rogueKey);
    bundle.chain.push_back(rogueCert.data());
    issuer = {rogueCert, rogueKey};
  }

  Name deviceSubject = convertName(convention, deviceId);
  std::vector<Name> subjects = {deviceSubject};
  for (const std::string& cap : opt.capabilities)
    subjects.push_back(deviceSubject.append(cap));
  for (const Name& subject : subjects) {
    crypto::AsymKeyPair key = crypto::generateKeyPair(rng);
    Certificate cert = issueCertificate(subject, key.pub, issuer.cert, issuer.key);
    if (opt.dropPrivateKeys)
      key.priv.clear();
    bundle.credentials.push_back({std::move(cert), std::move(key)});
  }

  run.bundleWire = encodeIdentityBundle(bundle);
  Bytes wire = run.bundleWire;
  if (opt.tamperBundle)
    wire[wire.size() / 2] ^= 1;
  net.oobSend(OobChannel::Console, controllerId, deviceId, wire, "identity bundle");
  Bytes received = net.oobRecv(OobChannel::Console, deviceId).second;

  run.session.provideCac({domain, {}});
  run.session.provideEac({deviceId, {}});
  run.session.setNameConvention(convention);
  run.session.provideCertContext({domain, {}});

  DctSet set(std::move(received));
  try {
    runProcedure(run.session, set, Procedure::ContAuth);
    runProcedure(run.session, set, Procedure::EnewAuth);
    runProcedure(run.session, set, Procedure::EnewTrust);
    runProcedure(run.session, set, Procedure::EnewNaming);
    runProcedure(run.session, set, Procedure::EnewCert);
  }
  catch (const Error& e) {
    run.error = e.code();
  }
  return run;
}

} // namespace teb
