#pragma once

#include "../tib.hpp"
#include "ndncert.hpp"

namespace teb {

/** Device responder for password-authenticated onboarding.
 *
 *  The device answers under /pion/<serial>. A PAKE exchange settles a session
 *  key from the shared password; only after both confirmation tags check out
 *  does the initiator reveal the assigned name and trust bundle, encrypted
 *  under that key. The device then self-certifies its fresh key under the
 *  assigned name so the authenticator can vouch for it with a temporary
 *  certificate.
 */
class PionDeviceAgent
{
public:
  PionDeviceAgent(Network& net, std::string entityId, std::string serial, std::string password,
                  uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_serial(std::move(serial))
    , m_password(std::move(password))
    , m_rng(seed)
  {
    ensureEntity(m_net, m_id);
    m_net.registerPrefix(m_id, Name{"pion", m_serial});
    m_net.addHandler(m_id, [this](const Interest& i) { return handle(i); });
  }

  const std::string&
  entityId() const
  {
    return m_id;
  }

  bool
  confirmed() const
  {
    return m_confirmed;
  }

  const TrustBundle&
  bundle() const
  {
    requireConfirmed();
    return m_bundle;
  }

  const Bytes&
  confirmWire() const
  {
    requireConfirmed();
    return m_confirmWire;
  }

  const Name&
  assignedName() const
  {
    requireConfirmed();
    return m_assigned;
  }

  const crypto::AsymKeyPair&
  key() const
  {
    requireConfirmed();
    return m_key;
  }

  const crypto::SymKey&
  sessionKey() const
  {
    requireConfirmed();
    return m_pake->sessionKey();
  }

  /// Retrieve and sanity-check the temporary certificate announced over the session.
  void
  fetchTemporary()
  {
    if (m_tempCertName.size() == 0)
      throw ProtocolOrder("no temporary certificate has been announced");
    m_tempData = fetch(m_tempCertName);
    Certificate temp = Certificate::fromData(*m_tempData);
    if (temp.subject() != m_assigned)
      throw IdentifierMismatch("temporary certificate names someone else");
    if (!equal(temp.publicKey(), m_key.pub))
      throw ChainInvalid("temporary certificate does not certify the session key");
    if (!m_tempData->keyLocator)
      throw ChainInvalid("temporary certificate names no issuer");
    m_issuerData = fetch(*m_tempData->keyLocator);
  }

  const Data&
  tempCertData() const
  {
    if (!m_tempData)
      throw ProtocolOrder("the temporary certificate has not been fetched");
    return *m_tempData;
  }

  const Data&
  issuerCertData() const
  {
    if (!m_issuerData)
      throw ProtocolOrder("the temporary certificate has not been fetched");
    return *m_issuerData;
  }

private:
  void
  requireConfirmed() const
  {
    if (!m_confirmed)
      throw ProtocolOrder("the password exchange has not confirmed");
  }

  Data
  fetch(const Name& name)
  {
    Interest i;
    i.name = name;
    auto got = m_net.expressInterest(m_id, i);
    if (!got)
      throw FetchTimeout(name.toUri());
    return *got;
  }

  std::optional<Data>
  handle(const Interest& interest)
  {
    if (interest.name.size() != 4 || interest.name[0] != "pion" || interest.name[1] != m_serial)
      return std::nullopt;
    if (!interest.appParams ||
        crypto::digestHex(*interest.appParams, 8) != interest.name[3])
      return std::nullopt;
    try {
      const std::string& verb = interest.name[2];
      if (verb == "PAKE")
        return pakeRound(interest);
      if (verb == "CONFIRM")
        return confirmRound(interest);
      if (verb == "CREDENTIAL")
        return credentialRound(interest);
    }
    catch (const Error&) {
    }
    return std::nullopt;
  }

  Data
  pakeRound(const Interest& interest)
  {
    Reader r(*interest.appParams);
    Bytes peerShare = r.var();
    r.expectEnd();
    m_pake.emplace(crypto::PakeRole::Responder, m_password, crypto::Drbg(deriveSeed(m_rng)));
    Bytes share = m_pake->start();
    Bytes tag = m_pake->finish(peerShare);
    Writer content;
    content.var(share).var(tag);
    Data d;
    d.name = interest.name;
    d.content = content.take();
    return d;
  }

  std::optional<Data>
  confirmRound(const Interest& interest)
  {
    Reader r(*interest.appParams);
    Bytes sid = r.var();
    Bytes peerTag = r.var();
    Bytes box = r.var();
    r.expectEnd();
    if (!m_pake || !m_pake->confirm(peerTag))
      return std::nullopt; // wrong password: no name, no bundle, no answer

    Reader p(crypto::aeadDecrypt(m_pake->sessionKey(), box, sid));
    m_assigned = decodeName(p.var());
    m_bundle = decodeTrustBundle(p.var());
    p.expectEnd();
    m_sid = sid;
    m_key = crypto::generateKeyPair(m_rng);
    Certificate selfCert = makeSelfSigned(m_assigned, m_key);
    m_confirmWire = encode(interest);
    m_confirmed = true;

    Writer content;
    content.var(sid).var(
      crypto::aeadEncrypt(m_pake->sessionKey(), encode(selfCert.data()), sid, 1));
    Data d;
    d.name = interest.name;
    d.content = content.take();
    return d;
  }

  std::optional<Data>
  credentialRound(const Interest& interest)
  {
    Reader r(*interest.appParams);
    Bytes sid = r.var();
    Bytes box = r.var();
    r.expectEnd();
    if (!m_confirmed || !equal(sid, m_sid))
      return std::nullopt;
    m_tempCertName = decodeName(crypto::aeadDecrypt(m_pake->sessionKey(), box, sid));
    Data d;
    d.name = interest.name;
    return d;
  }

  Network& m_net;
  std::string m_id;
  std::string m_serial;
  std::string m_password;
  crypto::Drbg m_rng;
  std::optional<crypto::Pake> m_pake;
  bool m_confirmed = false;
  Bytes m_sid;
  Name m_assigned;
  TrustBundle m_bundle;
  Bytes m_confirmWire;
  crypto::AsymKeyPair m_key;
  Name m_tempCertName;
  std::optional<Data> m_tempData;
  std::optional<Data> m_issuerData;
};

/** Initiating side of the password exchange. Holds a credential issued by
 *  the zone controller (the trust anchor's delegate for onboarding), names
 *  the device once the password confirms, and vouches for the device's key
 *  with a temporary certificate served from here.
 */
class PionAuthenticator
{
public:
  PionAuthenticator(Network& net, std::string entityId, Credential credential,
                    TrustBundle bundle, NameConvention convention, std::string password,
                    uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_credential(std::move(credential))
    , m_bundle(std::move(bundle))
    , m_conv(std::move(convention))
    , m_password(std::move(password))
    , m_rng(seed)
  {
    ensureEntity(m_net, m_id);
    m_net.addHandler(m_id, [this](const Interest& i) {
      auto it = m_served.find(i.name);
      return it != m_served.end() ? std::optional<Data>(it->second) : std::nullopt;
    });
    serve(m_credential.cert.data());
  }

  /// Run the password exchange and, on success, deliver name and trust bundle.
  void
  onboard(const std::string& serial)
  {
    m_serial = serial;
    Name base{"pion", serial};
    m_pake.emplace(crypto::PakeRole::Initiator, m_password, crypto::Drbg(deriveSeed(m_rng)));
    Writer pakeParams;
    pakeParams.var(m_pake->start());
    Data pakeData = roundTrip(base.append("PAKE"), pakeParams.take());
    Reader r(pakeData.content);
    Bytes peerShare = r.var();
    Bytes peerTag = r.var();
    r.expectEnd();

    Bytes myTag = m_pake->finish(peerShare);
    if (!m_pake->confirm(peerTag))
      throw PakeConfirmFailure("the device does not share the password");

    m_sid = m_rng.bytes(8);
    m_assigned = convertName(m_conv, serial);
    Writer payload;
    payload.var(m_assigned.encode()).var(encodeTrustBundle(m_bundle));
    Writer confirmParams;
    confirmParams.var(m_sid).var(myTag).var(
      crypto::aeadEncrypt(m_pake->sessionKey(), payload.out(), m_sid, 0));
    Interest confirm = request(base.append("CONFIRM"), confirmParams.take());
    auto got = m_net.expressInterest(m_id, confirm);
    if (!got)
      throw AuthFailure("the device rejected the confirmation");
    m_confirmInterest = confirm;

    Reader c(got->content);
    c.var(); // sid echo
    Data selfCertData =
      decodeData(crypto::aeadDecrypt(m_pake->sessionKey(), c.var(), m_sid));
    Certificate selfCert = Certificate::fromData(selfCertData);
    if (selfCert.subject() != m_assigned || !verifyAsym(selfCertData, selfCert.publicKey()))
      throw AuthFailure("the device's self-certification is inconsistent");
    m_deviceCert = selfCert;
  }

  /// Issue, serve, and announce the temporary certificate; returns its name.
  Name
  issueTemporary()
  {
    if (!m_deviceCert)
      throw ProtocolOrder("no device key to certify");
    Certificate temp = issueCertificate(m_assigned, m_deviceCert->publicKey(),
                                        m_credential.cert, m_credential.key);
    serve(temp.data());
    Writer params;
    params.var(m_sid).var(
      crypto::aeadEncrypt(m_pake->sessionKey(), temp.name().encode(), m_sid, 2));
    Interest announce = request(Name{"pion", m_serial}.append("CREDENTIAL"), params.take());
    if (!m_net.expressInterest(m_id, announce))
      throw FetchTimeout("temporary certificate announcement");
    return temp.name();
  }

  const Interest&
  confirmInterest() const
  {
    if (!m_confirmInterest)
      throw ProtocolOrder("the password exchange has not confirmed");
    return *m_confirmInterest;
  }

  const Name&
  assignedName() const
  {
    return m_assigned;
  }

  const Certificate&
  credentialCert() const
  {
    return m_credential.cert;
  }

private:
  Interest
  request(const Name& base, Bytes params)
  {
    Interest i;
    i.name = base.append(crypto::digestHex(params, 8));
    i.appParams = std::move(params);
    return i;
  }

  Data
  roundTrip(const Name& base, Bytes params)
  {
    Interest i = request(base, std::move(params));
    auto got = m_net.expressInterest(m_id, i);
    if (!got)
      throw FetchTimeout(i.name.toUri());
    return *got;
  }

  void
  serve(const Data& d)
  {
    m_served[d.name] = d;
    m_net.registerPrefix(m_id, d.name);
  }

  Network& m_net;
  std::string m_id;
  Credential m_credential;
  TrustBundle m_bundle;
  NameConvention m_conv;
  std::string m_password;
  std::string m_serial;
  crypto::Drbg m_rng;
  std::optional<crypto::Pake> m_pake;
  Bytes m_sid;
  Name m_assigned;
  std::optional<Certificate> m_deviceCert;
  std::optional<Interest> m_confirmInterest;
  std::map<Name, Data> m_served;
};

/// Session procedures stitched over the authenticator and device agents.
class PionSet : public ProcedureSet
{
public:
  PionSet(Network& net, PionAuthenticator& auth, PionDeviceAgent& dev, std::string serial,
          uint64_t seed)
    : m_net(net)
    , m_auth(auth)
    , m_dev(dev)
    , m_serial(std::move(serial))
    , m_seed(seed)
  {
  }

  Pom
  enewAuth(const Eac& eac) override
  {
    m_auth.onboard(m_serial);
    return {eac.entityId, encode(m_auth.confirmInterest())};
  }

  Poa
  contAuth(const Cac&) override
  {
    return {m_dev.bundle().anchor->subject(), m_dev.confirmWire()};
  }

  TrustBundle
  enewTrust(const Poa&) override
  {
    // delivered under the session key after mutual password confirmation
    return m_dev.bundle();
  }

  Pop
  enewNaming(const Pom& pom, const NameConvention& conv) override
  {
    if (m_dev.assignedName() != convertName(conv, m_serial))
      throw IdentifierMismatch("assigned name does not follow the naming convention");
    m_auth.issueTemporary();
    m_dev.fetchTemporary();
    return {{m_dev.assignedName()}, pom.entityId, encode(m_dev.tempCertData())};
  }

  std::vector<Credential>
  enewCert(const Pop&, const CertContext&, const TrustBundle& trust) override
  {
    CertRequester req(m_net, m_dev.entityId(), trust, m_dev.key(), m_seed);
    req.runNew();
    if (req.status() != CaStatus::Ok)
      throw AuthFailure("certification request refused: " + req.detail());
    req.submitPossession(m_dev.tempCertData(), m_dev.issuerCertData(), m_dev.key());
    if (req.status() != CaStatus::Issued)
      throw AuthFailure("possession proof rejected: " + req.detail());
    return {{req.fetchCertificate(), m_dev.key()}};
  }

  CertContext
  certContext() const
  {
    const crypto::SymKey& ke = m_dev.sessionKey();
    return {m_dev.bundle().anchor->subject().append(kCaComponent),
            {{"ke", Bytes(ke.view().begin(), ke.view().end())}}};
  }

private:
  Network& m_net;
  PionAuthenticator& m_auth;
  PionDeviceAgent& m_dev;
  std::string m_serial;
  uint64_t m_seed;
};

struct PionOptions
{
  std::string devicePassword;          // differs from the authenticator's on a mistyped secret
  bool uncertifiedAuthenticator = false; // authenticator vouches without a controller credential
};

struct PionRun
{
  BootstrapSession session;
  std::string error;
  std::unique_ptr<Tib> controllerTib;
  std::unique_ptr<CaService> ca;
  std::unique_ptr<PionAuthenticator> authenticator;
  std::unique_ptr<PionDeviceAgent> device;
};

/// Onboard one device through the password exchange plus possession-based certification.
inline PionRun
runPion(Network& net, const Name& domain, const std::string& controllerId,
        const std::string& authenticatorId, const std::string& deviceId,
        const std::string& serial, const NameConvention& convention,
        const std::string& password, const PionOptions& opt, uint64_t seed)
{
  ensureEntity(net, controllerId);
  ensureEntity(net, authenticatorId);
  ensureEntity(net, deviceId);

  PionRun run;
  run.controllerTib = Tib::selfBootstrap(net, controllerId, domain, crypto::Drbg(seed));
  Credential anchorCred = run.controllerTib->keyChain().credentials().front();
  run.ca = std::make_unique<CaService>(net, controllerId, anchorCred,
                                       run.controllerTib->trust(), convention,
                                       ChallengeKind::Possession, seed + 1);

  crypto::Drbg authRng(seed + 2);
  crypto::AsymKeyPair authKey = crypto::generateKeyPair(authRng);
  Name authSubject = domain.append("authenticator");
  Credential authCred{opt.uncertifiedAuthenticator
                        ? makeSelfSigned(authSubject, authKey)
                        : issueCertificate(authSubject, authKey.pub, anchorCred.cert,
                                           anchorCred.key),
                      authKey};
  run.authenticator = std::make_unique<PionAuthenticator>(
    net, authenticatorId, authCred, run.controllerTib->trust(), convention, password, seed + 3);
  run.device = std::make_unique<PionDeviceAgent>(
    net, deviceId, serial, opt.devicePassword.empty() ? password : opt.devicePassword,
    seed + 4);

  run.session.provideCac({domain, {{"password", toBytes(password)}}});
  run.session.provideEac({serial, {{"password", toBytes(password)}}});
  run.session.setNameConvention(convention);

  PionSet set(net, *run.authenticator, *run.device, serial, seed + 5);
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
