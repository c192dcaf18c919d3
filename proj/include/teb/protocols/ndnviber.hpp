#pragma once

#include "../tib.hpp"
#include "ndncert.hpp"

namespace teb {

/** Controller for vibration-triggered onboarding.
 *
 *  The controller taps out a trigger over the vibration channel (which only
 *  works in physical proximity) carrying the zone name and a temporary key;
 *  the device answers on the same channel with its pre-installed identifier,
 *  encrypted under that key. The trust bundle then travels the regular
 *  network inside an anchor fetch protected by the temporary key, and
 *  certification proceeds through the in-network service using the
 *  device-identifier challenge.
 */
class ViberController
{
public:
  ViberController(Network& net, std::string entityId, Credential anchorCredential,
                  TrustBundle bundle, NameConvention convention, uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_issuer(std::move(anchorCredential))
    , m_bundle(std::move(bundle))
    , m_rng(seed)
    , m_ca(net, m_id, m_issuer, m_bundle, std::move(convention), ChallengeKind::DeviceId,
           seed + 1)
  {
    ensureEntity(m_net, m_id);
    m_anchorPrefix = m_bundle.anchor->subject().append("ANCHOR");
    m_net.registerPrefix(m_id, m_anchorPrefix);
    m_net.addHandler(m_id, [this](const Interest& i) { return handle(i); });
  }

  /// Tap the trigger toward a device; requires physical proximity.
  void
  sendTrigger(const std::string& deviceEntity)
  {
    m_kt = crypto::SymKey::random(m_rng);
    Writer payload;
    payload.var(m_bundle.anchor->subject().encode()).var(m_kt.view());
    m_net.oobSend(OobChannel::Vibration, m_id, deviceEntity, payload.take(),
                  "onboarding trigger");
  }

  /// Read the device's vibration reply and admit it at the service.
  void
  completeTrigger()
  {
    auto [from, reply] = m_net.oobRecv(OobChannel::Vibration, m_id);
    Reader r(crypto::aeadDecrypt(m_kt, reply, toBytes("trigger-reply")));
    std::string deviceId = r.str();
    r.expectEnd();
    m_ca.allowDevice(deviceId);
  }

  const CaService&
  ca() const
  {
    return m_ca;
  }

private:
  std::optional<Data>
  handle(const Interest& interest)
  {
    if (interest.name.size() != m_anchorPrefix.size() + 1 ||
        !m_anchorPrefix.isPrefixOf(interest.name))
      return std::nullopt;
    Writer content;
    content.var(crypto::aeadEncrypt(m_kt, encodeTrustBundle(m_bundle),
                                    interest.name.encode(), 1));
    Data d;
    d.name = interest.name;
    d.content = content.take();
    signData(d, m_issuer.key, m_issuer.cert.name());
    return d;
  }

  Network& m_net;
  std::string m_id;
  Credential m_issuer;
  TrustBundle m_bundle;
  crypto::Drbg m_rng;
  crypto::SymKey m_kt = crypto::SymKey::fromBytes(Bytes(32, 0));
  Name m_anchorPrefix;
  CaService m_ca;
};

/// Device-side procedures for vibration-triggered onboarding.
class ViberDeviceSet : public ProcedureSet
{
public:
  ViberDeviceSet(Network& net, std::string entityId, std::string serial,
                 ViberController& controller, uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_serial(std::move(serial))
    , m_controller(controller)
    , m_seed(seed)
  {
    ensureEntity(m_net, m_id);
  }

  Poa
  contAuth(const Cac&) override
  {
    m_controller.sendTrigger(m_id);
    auto [from, trigger] = m_net.oobRecv(OobChannel::Vibration, m_id);
    Reader r(trigger);
    Name domain = decodeName(r.var());
    m_kt = crypto::SymKey::fromBytes(r.var());
    r.expectEnd();

    Writer reply;
    reply.str(m_serial);
    m_net.oobSend(OobChannel::Vibration, m_id, from,
                  crypto::aeadEncrypt(m_kt, reply.out(), toBytes("trigger-reply")),
                  "trigger reply");
    m_controller.completeTrigger();
    m_triggered = true;
    return {domain, trigger};
  }

  TrustBundle
  enewTrust(const Poa& poa) override
  {
    if (!m_triggered)
      throw ProtocolOrder("no trigger has been received");
    Interest i;
    i.name = poa.controllerId.append("ANCHOR").append(toHex(m_rng.bytes(4)));
    auto got = m_net.expressInterest(m_id, i);
    if (!got)
      throw FetchTimeout(i.name.toUri());
    Reader r(got->content);
    m_bundle = decodeTrustBundle(crypto::aeadDecrypt(m_kt, r.var(), got->name.encode()));
    return *m_bundle;
  }

  Pom
  enewAuth(const Eac& eac) override
  {
    const Bytes& id = requireMaterial(eac.material, "eac", "device_id");
    std::string serial(id.begin(), id.end());
    if (serial != m_serial)
      throw IdentifierMismatch("pre-installed identifier does not match the context");
    CertRequester& req = requester();
    req.runNew();
    if (req.status() != CaStatus::Ok)
      throw AuthFailure("certification request refused: " + req.detail());
    Data d = req.submitDeviceId(serial);
    if (req.status() != CaStatus::Ok)
      throw AuthFailure("device identification failed: " + req.detail());
    return {eac.entityId, encode(d)};
  }

  Pop
  enewNaming(const Pom& pom, const NameConvention& conv) override
  {
    CertRequester& req = requester();
    Data d = req.proceedDevice();
    if (req.status() != CaStatus::Issued)
      throw AuthFailure("certificate issuance failed: " + req.detail());
    Name subject = req.issuedCertName().getPrefix(req.issuedCertName().size() - 4);
    if (subject != convertName(conv, m_serial, req.certReqKey().pub))
      throw IdentifierMismatch("assigned name does not follow the naming convention");
    return {{subject}, pom.entityId, encode(d)};
  }

  std::vector<Credential>
  enewCert(const Pop&, const CertContext&, const TrustBundle&) override
  {
    CertRequester& req = requester();
    return {{req.fetchCertificate(), req.certReqKey()}};
  }

  CertContext
  certContext() const
  {
    if (!m_requester || m_requester->status() != CaStatus::Issued)
      throw ProtocolOrder("no certificate has been assigned yet");
    return {m_bundle->anchor->subject().append(kCaComponent),
            {{"cert_name", m_requester->issuedCertName().encode()},
             {"hint", m_requester->issuedHint().encode()}}};
  }

private:
  CertRequester&
  requester()
  {
    if (!m_requester) {
      if (!m_bundle)
        throw ProtocolOrder("trust must be installed before talking to the service");
      crypto::Drbg rng(m_seed);
      m_requester.emplace(m_net, m_id, *m_bundle, crypto::generateKeyPair(rng), m_seed + 1);
    }
    return *m_requester;
  }

  Network& m_net;
  std::string m_id;
  std::string m_serial;
  ViberController& m_controller;
  uint64_t m_seed;
  crypto::Drbg m_rng{m_seed + 2};
  crypto::SymKey m_kt = crypto::SymKey::fromBytes(Bytes(32, 0));
  bool m_triggered = false;
  std::optional<TrustBundle> m_bundle;
  std::optional<CertRequester> m_requester;
};

struct ViberOptions
{
  bool skipProximity = false; // leave the pair apart; the trigger must fail
  bool tamperAnchor = false;  // corrupt anchor-fetch payloads in flight
};

struct ViberRun
{
  BootstrapSession session;
  std::string error;
  std::unique_ptr<Tib> controllerTib;
  std::unique_ptr<ViberController> controller;
};

/// Onboard one device over a vibration trigger plus device-id certification.
inline ViberRun
runNdnViber(Network& net, const Name& domain, const std::string& controllerId,
            const std::string& deviceId, const std::string& serial,
            const NameConvention& convention, const ViberOptions& opt, uint64_t seed)
{
  ensureEntity(net, controllerId);
  ensureEntity(net, deviceId);
  if (!opt.skipProximity)
    net.setProximity(controllerId, deviceId, true);

  ViberRun run;
  run.controllerTib = Tib::selfBootstrap(net, controllerId, domain, crypto::Drbg(seed));
  Credential anchorCred = run.controllerTib->keyChain().credentials().front();
  run.controller = std::make_unique<ViberController>(net, controllerId, anchorCred,
                                                     run.controllerTib->trust(), convention,
                                                     seed + 1);
  if (opt.tamperAnchor)
    net.setDataTamper([](Data& d) {
      if (d.name.contains("ANCHOR") && !d.content.empty())
        d.content.back() ^= 1;
    });

  run.session.provideCac({domain, {}});
  run.session.provideEac({deviceId, {{"device_id", toBytes(serial)}}});
  run.session.setNameConvention(convention);

  ViberDeviceSet set(net, deviceId, serial, *run.controller, seed + 2);
  try {
    runProcedure(run.session, set, Procedure::ContAuth);
    runProcedure(run.session, set, Procedure::EnewTrust);
    runProcedure(run.session, set, Procedure::EnewAuth);
    runProcedure(run.session, set, Procedure::EnewNaming);
    run.session.provideCertContext(set.certContext());
    runProcedure(run.session, set, Procedure::EnewCert);
  }
  catch (const Error& e) {
    run.error = e.code();
  }
  if (opt.tamperAnchor)
    net.setDataTamper({});
  return run;
}

} // namespace teb
