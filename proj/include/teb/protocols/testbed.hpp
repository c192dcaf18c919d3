#pragma once

#include "../tib.hpp"
#include "ndncert.hpp"

namespace teb {

/** User-side procedures for email-verified certification.
 *
 *  The trust bundle arrives out of band before any packet flows; the
 *  certification service then authenticates the user by mailing a PIN to the
 *  claimed address and naming the user from that address once the PIN comes
 *  back.
 */
class TestbedUserSet : public ProcedureSet
{
public:
  TestbedUserSet(Network& net, std::string entityId, std::string mailboxEntity,
                 std::string pinOverride, uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_mailbox(std::move(mailboxEntity))
    , m_pinOverride(std::move(pinOverride))
    , m_seed(seed)
  {
    ensureEntity(m_net, m_id);
  }

  Poa
  contAuth(const Cac& cac) override
  {
    const Bytes& wire = requireMaterial(cac.material, "cac", "bundle");
    TrustBundle bundle = decodeTrustBundle(wire);
    if (!bundle.anchor)
      throw BundleInvalid("bundle carries no anchor");
    return {bundle.anchor->subject(), wire};
  }

  TrustBundle
  enewTrust(const Poa& poa) override
  {
    m_bundle = decodeTrustBundle(poa.evidence);
    m_bundle->schema(); // a malformed schema must fail installation, not first use
    return *m_bundle;
  }

  Pom
  enewAuth(const Eac& eac) override
  {
    std::string email(viewString(requireMaterial(eac.material, "eac", "email")));
    CertRequester& req = requester();
    req.runNew();
    if (req.status() != CaStatus::Ok)
      throw AuthFailure("certification request refused: " + req.detail());
    Data d = req.submitEmail(email);
    if (req.status() == CaStatus::EmailRejected)
      throw EmailRejected("'" + email + "' is not eligible for certification");
    if (req.status() != CaStatus::Ok)
      throw AuthFailure("email challenge failed: " + req.detail());
    m_email = email;
    return {eac.entityId, encode(d)};
  }

  Pop
  enewNaming(const Pom& pom, const NameConvention& conv) override
  {
    CertRequester& req = requester();
    std::string pin(viewString(m_net.oobRecv(OobChannel::Email, m_mailbox).second));
    if (!m_pinOverride.empty())
      pin = m_pinOverride;

    Data d = req.submitPin(pin);
    while (req.status() == CaStatus::WrongPin)
      d = req.submitPin(pin);
    if (req.status() != CaStatus::Issued)
      throw PinMismatch("PIN verification failed: " + req.detail());

    Name subject = req.issuedCertName().getPrefix(req.issuedCertName().size() - 4);
    if (subject != convertName(conv, m_email, req.certReqKey().pub))
      throw IdentifierMismatch("assigned name does not follow the naming convention");
    return {{subject}, pom.entityId, encode(d)};
  }

  std::vector<Credential>
  enewCert(const Pop&, const CertContext&, const TrustBundle&) override
  {
    CertRequester& req = requester();
    Certificate cert = req.fetchCertificate();
    return {{cert, req.certReqKey()}};
  }

  /// Available once naming has assigned the certificate location.
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
  static std::string
  viewString(BytesView b)
  {
    return std::string(b.begin(), b.end());
  }

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
  std::string m_mailbox;
  std::string m_pinOverride;
  uint64_t m_seed;
  std::optional<TrustBundle> m_bundle;
  std::optional<CertRequester> m_requester;
  std::string m_email;
};

struct TestbedOptions
{
  std::string wrongPin;      // submit this instead of the mailed PIN
  bool unknownEmail = false; // leave the email unregistered at the service
};

struct TestbedRun
{
  BootstrapSession session;
  std::string error;
  std::unique_ptr<Tib> controllerTib;
  std::unique_ptr<CaService> ca;
};

/** Certify one user against an email-PIN service; the zone runs an explicit
 *  schema that the bundle install delivers ahead of any exchange.
 */
inline TestbedRun
runTestbed(Network& net, const Name& domain, const std::string& caId, const std::string& userId,
           const std::string& email, const NameConvention& convention,
           const std::string& schemaText, const TestbedOptions& opt, uint64_t seed)
{
  ensureEntity(net, caId);
  ensureEntity(net, userId);

  TestbedRun run;
  run.controllerTib = Tib::selfBootstrap(net, caId, domain, crypto::Drbg(seed),
                                         SchemaMode::Explicit, schemaText);
  Credential anchorCred = run.controllerTib->keyChain().credentials().front();
  run.ca = std::make_unique<CaService>(net, caId, anchorCred, run.controllerTib->trust(),
                                       convention, ChallengeKind::EmailPin, seed + 1);
  if (!opt.unknownEmail)
    run.ca->allowEmail(email, userId);

  Bytes bundleWire = encodeTrustBundle(run.controllerTib->trust());
  net.oobSend(OobChannel::Console, caId, userId, bundleWire, "trust bundle install");
  Bytes received = net.oobRecv(OobChannel::Console, userId).second;

  run.session.provideCac({domain, {{"bundle", received}}});
  run.session.provideEac({userId, {{"email", toBytes(email)}}});
  run.session.setNameConvention(convention);

  TestbedUserSet set(net, userId, userId, opt.wrongPin, seed + 2);
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
  return run;
}

} // namespace teb
