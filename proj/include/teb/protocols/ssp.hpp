#pragma once

#include "../tib.hpp"
#include "protocol.hpp"

namespace teb {

/** Broadcast sign-on controller for pre-shared-key onboarding.
 *
 *  A device ships a setup code carrying its public key, a shared symmetric
 *  key, and its identifier; scanning the code provisions the controller.
 *  The device then broadcasts a sign-on request whose name ends in a digest
 *  of all four request parameters, so any parameter change lands on a
 *  different name. The controller answers with the trust anchor and a second
 *  nonce under the shared key's MAC, and on the later certificate request
 *  generates the device's key pairs itself, returning each new private key
 *  encrypted to the device. The controller retaining knowledge of those
 *  private keys is a property of this exchange; deployments that cannot
 *  accept escrow should onboard differently.
 */
class SspController
{
public:
  SspController(Network& net, std::string entityId, Credential anchorCredential,
                NameConvention convention, uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_issuer(std::move(anchorCredential))
    , m_conv(std::move(convention))
    , m_rng(seed)
  {
    ensureEntity(m_net, m_id, true);
    m_net.addHandler(m_id, [this](const Interest& i) { return handle(i); });
  }

  void
  provision(const std::string& deviceId, Bytes devicePub, crypto::SymKey symkey)
  {
    m_devices[deviceId] = {std::move(devicePub), std::move(symkey), {}, {}};
  }

  /// Scan the next setup code from this controller's mailbox.
  void
  provisionFromQr(bool corruptSymkey = false)
  {
    auto [from, payload] = m_net.oobRecv(OobChannel::Qr, m_id);
    Reader r(payload);
    Bytes pub = r.var();
    Bytes sym = r.var();
    std::string deviceId = r.str();
    r.expectEnd();
    if (corruptSymkey)
      sym[0] ^= 1;
    provision(deviceId, std::move(pub), crypto::SymKey::fromBytes(sym));
  }

  /// Names granted on top of the convention-derived one.
  void
  assignExtraNames(std::vector<Name> names)
  {
    m_extraNames = std::move(names);
  }

private:
  struct Device
  {
    Bytes pub;
    crypto::SymKey symkey = crypto::SymKey::fromBytes(Bytes(32, 0));
    Bytes n1;
    Bytes n2;
  };

  std::optional<Data>
  handle(const Interest& interest)
  {
    try {
      if (interest.name.size() == 3 && interest.name[0] == "ssp") {
        if (interest.name[1] == "sign-on")
          return signOn(interest);
        if (interest.name[1] == "cert-request")
          return certRequest(interest);
      }
    }
    catch (const Error&) {
    }
    return std::nullopt;
  }

  bool
  digestMismatch(const Interest& interest) const
  {
    return !interest.appParams ||
           crypto::digestHex(*interest.appParams, 8) != interest.name[interest.name.size() - 1];
  }

  std::optional<Data>
  signOn(const Interest& interest)
  {
    if (digestMismatch(interest))
      return std::nullopt;
    Reader r(*interest.appParams);
    std::string deviceId = r.str();
    r.str(); // capability, logged by real deployments
    Bytes n1 = r.var();
    Bytes pub = r.var();
    r.expectEnd();

    auto it = m_devices.find(deviceId);
    if (it == m_devices.end() || !equal(it->second.pub, pub) || !verifyAsym(interest, pub))
      return std::nullopt;
    it->second.n1 = std::move(n1);
    it->second.n2 = m_rng.bytes(8);

    TrustBundle bundle{SchemaMode::Implicit, m_issuer.cert, {}};
    Writer content;
    content.var(encodeTrustBundle(bundle)).var(it->second.n2);
    Data d;
    d.name = interest.name;
    d.content = content.take();
    hmacSignData(d, it->second.symkey);
    return d;
  }

  std::optional<Data>
  certRequest(const Interest& interest)
  {
    if (digestMismatch(interest))
      return std::nullopt;
    Reader r(*interest.appParams);
    std::string deviceId = r.str();
    Bytes anchorDigest = r.var();
    Bytes n1 = r.var();
    Bytes n2 = r.var();
    r.expectEnd();

    auto it = m_devices.find(deviceId);
    if (it == m_devices.end() || it->second.n2.empty() || !equal(it->second.n1, n1) ||
        !equal(it->second.n2, n2) || !verifyAsym(interest, it->second.pub))
      return std::nullopt;
    if (!equal(anchorDigest, fromHex(crypto::digestHex(encode(m_issuer.cert.data()), 16))))
      return std::nullopt;

    std::vector<crypto::AsymKeyPair> keys;
    std::vector<Name> names;
    keys.push_back(crypto::generateKeyPair(m_rng));
    names.push_back(convertName(m_conv, deviceId, keys.back().pub));
    for (const Name& extra : m_extraNames) {
      keys.push_back(crypto::generateKeyPair(m_rng));
      names.push_back(extra);
    }
    crypto::SymKey wrap = crypto::dh(m_issuer.key.priv, it->second.pub);

    Writer content;
    content.u8(static_cast<uint8_t>(names.size()));
    for (size_t j = 0; j < names.size(); ++j) {
      m_registry.claim(deviceId + "#" + std::to_string(j), names[j]);
      Certificate cert = issueCertificate(names[j], keys[j].pub, m_issuer.cert, m_issuer.key);
      content.var(encode(cert.data()));
      content.var(crypto::aeadEncrypt(wrap, keys[j].priv, cert.name().encode(), j));
    }
    Data d;
    d.name = interest.name;
    d.content = content.take();
    hmacSignData(d, it->second.symkey);
    return d;
  }

  Network& m_net;
  std::string m_id;
  Credential m_issuer;
  NameConvention m_conv;
  crypto::Drbg m_rng;
  std::map<std::string, Device> m_devices;
  std::vector<Name> m_extraNames;
  NameRegistry m_registry;
};

/// Device-side procedures for the broadcast sign-on exchange.
class SspDeviceSet : public ProcedureSet
{
public:
  SspDeviceSet(Network& net, std::string deviceId, std::string capability,
               crypto::AsymKeyPair deviceKey, crypto::SymKey symkey, uint64_t seed)
    : m_net(net)
    , m_id(std::move(deviceId))
    , m_capability(std::move(capability))
    , m_key(std::move(deviceKey))
    , m_symkey(std::move(symkey))
    , m_rng(seed)
  {
    ensureEntity(m_net, m_id);
  }

  Pom
  enewAuth(const Eac& eac) override
  {
    m_n1 = m_rng.bytes(8);
    Writer params;
    params.str(m_id).str(m_capability).var(m_n1).var(m_key.pub);
    Data d = broadcastRequest("sign-on", params.take());
    m_signOn = d;
    return {eac.entityId, encode(d)};
  }

  Poa
  contAuth(const Cac&) override
  {
    if (!m_signOn)
      throw ProtocolOrder("sign-on has not run");
    // authenticity is settled when the MAC is checked during trust install
    Reader r(m_signOn->content);
    TrustBundle peek = decodeTrustBundle(r.var());
    return {peek.anchor->subject(), encode(*m_signOn)};
  }

  TrustBundle
  enewTrust(const Poa& poa) override
  {
    Data d = decodeData(poa.evidence);
    if (!verifyHmac(d, m_symkey))
      throw AuthFailure("sign-on response fails the shared-key MAC");
    Reader r(d.content);
    m_bundle = decodeTrustBundle(r.var());
    m_n2 = r.var();
    r.expectEnd();
    m_certKey = crypto::dh(m_key.priv, m_bundle->anchor->publicKey());
    return *m_bundle;
  }

  Pop
  enewNaming(const Pom& pom, const NameConvention& conv) override
  {
    if (!m_bundle)
      throw ProtocolOrder("trust must be installed before the certificate request");
    Writer params;
    params.str(m_id)
      .var(fromHex(crypto::digestHex(encode(m_bundle->anchor->data()), 16)))
      .var(m_n1)
      .var(m_n2);
    Data d = broadcastRequest("cert-request", params.take());
    if (!verifyHmac(d, m_symkey))
      throw AuthFailure("certificate response fails the shared-key MAC");
    m_certData = d;

    std::vector<Name> names;
    Reader r(d.content);
    size_t count = r.u8();
    for (size_t j = 0; j < count; ++j) {
      names.push_back(Certificate::fromData(decodeData(r.var())).subject());
      r.var();
    }
    r.expectEnd();
    if (names.empty() ||
        (conv.suffix == UniquenessSuffix::None && names[0] != convertName(conv, pom.entityId)))
      throw IdentifierMismatch("assigned name does not follow the naming convention");
    return {names, pom.entityId, encode(d)};
  }

  std::vector<Credential>
  enewCert(const Pop&, const CertContext& ctx, const TrustBundle&) override
  {
    crypto::SymKey wrap =
      crypto::SymKey::fromBytes(requireMaterial(ctx.params, "cert_context", "symkey"));
    std::vector<Credential> out;
    Reader r(m_certData->content);
    size_t count = r.u8();
    for (size_t j = 0; j < count; ++j) {
      Certificate cert = Certificate::fromData(decodeData(r.var()));
      Bytes priv = crypto::aeadDecrypt(wrap, r.var(), cert.name().encode());
      BytesView pub = cert.publicKey();
      out.push_back({cert, {Bytes(pub.begin(), pub.end()), std::move(priv)}});
    }
    return out;
  }

  /// Issuance context becomes available once trust is installed.
  CertContext
  certContext() const
  {
    if (!m_bundle)
      throw ProtocolOrder("trust has not been installed yet");
    Bytes key(m_certKey.view().begin(), m_certKey.view().end());
    return {m_bundle->anchor->subject(), {{"symkey", std::move(key)}}};
  }

private:
  Data
  broadcastRequest(const std::string& verb, Bytes params)
  {
    Interest i;
    i.name = Name{"ssp", verb}.append(crypto::digestHex(params, 8));
    i.appParams = std::move(params);
    signInterest(i, m_key);
    auto got = m_net.broadcast(m_id, i);
    if (!got)
      throw FetchTimeout("no controller answered " + i.name.toUri());
    return *got;
  }

  Network& m_net;
  std::string m_id;
  std::string m_capability;
  crypto::AsymKeyPair m_key;
  crypto::SymKey m_symkey;
  crypto::Drbg m_rng;
  Bytes m_n1;
  Bytes m_n2;
  std::optional<Data> m_signOn;
  std::optional<Data> m_certData;
  std::optional<TrustBundle> m_bundle;
  crypto::SymKey m_certKey = crypto::SymKey::fromBytes(Bytes(32, 0));
};

struct SspOptions
{
  std::string capability = "generic";
  std::vector<Name> extraNames;
  bool corruptSymkey = false; // provision the controller with a wrong shared key
};

struct SspRun
{
  BootstrapSession session;
  std::string error; // Error::code() when the run stopped early
  std::unique_ptr<Tib> controllerTib;
  std::unique_ptr<SspController> controller;
};

/** Onboard one device with pre-shared QR keys and broadcast sign-on.
 *  The controller is created here along with its trust root.
 */
inline SspRun
runSsp(Network& net, const Name& domain, const std::string& controllerId,
       const std::string& deviceId, const NameConvention& convention, const SspOptions& opt,
       uint64_t seed)
{
  ensureEntity(net, controllerId, true);
  ensureEntity(net, deviceId);

  SspRun run;
  run.controllerTib = Tib::selfBootstrap(net, controllerId, domain, crypto::Drbg(seed));
  Credential anchorCred = run.controllerTib->keyChain().credentials().front();
  run.controller =
    std::make_unique<SspController>(net, controllerId, anchorCred, convention, seed + 1);
  run.controller->assignExtraNames(opt.extraNames);

  crypto::Drbg deviceRng(seed + 2);
  crypto::AsymKeyPair deviceKey = crypto::generateKeyPair(deviceRng);
  crypto::SymKey symkey = crypto::SymKey::random(deviceRng);
  Writer code;
  code.var(deviceKey.pub).var(symkey.view()).str(deviceId);
  net.oobSend(OobChannel::Qr, deviceId, controllerId, code.take(), "device setup code");
  run.controller->provisionFromQr(opt.corruptSymkey);

  Bytes symBytes(symkey.view().begin(), symkey.view().end());
  run.session.provideCac({domain, {{"privkey", deviceKey.priv},
                                   {"pubkey", deviceKey.pub},
                                   {"symkey", symBytes}}});
  run.session.provideEac({deviceId, {{"pubkey", deviceKey.pub}, {"symkey", symBytes}}});
  run.session.setNameConvention(convention);

  SspDeviceSet set(net, deviceId, opt.capability, deviceKey, symkey, seed + 3);
  try {
    runProcedure(run.session, set, Procedure::EnewAuth);
    runProcedure(run.session, set, Procedure::ContAuth);
    runProcedure(run.session, set, Procedure::EnewTrust);
    run.session.provideCertContext(set.certContext());
    runProcedure(run.session, set, Procedure::EnewNaming);
    runProcedure(run.session, set, Procedure::EnewCert);
  }
  catch (const Error& e) {
    run.error = e.code();
  }
  return run;
}

} // namespace teb
