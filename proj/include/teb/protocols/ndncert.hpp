#pragma once

#include "../naming.hpp"
#include "protocol.hpp"

namespace teb {

inline const std::string kCaComponent = "CA";
inline const std::string kNewComponent = "NEW";
inline const std::string kChallengeComponent = "CHALLENGE";

/// Outcome code carried in certification responses.
enum class CaStatus : uint8_t {
  Ok = 0, // challenge step accepted, exchange continues
  WrongPin = 1,
  PinExhausted = 2,
  EmailRejected = 3,
  Issued = 4,
  ReplayRejected = 5,
  UnknownDevice = 6,
  PossessionInvalid = 7,
  UnsupportedChallenge = 8,
};

inline const char*
caStatusName(CaStatus s)
{
  switch (s) {
    case CaStatus::Ok:
      return "ok";
    case CaStatus::WrongPin:
      return "wrong-pin";
    case CaStatus::PinExhausted:
      return "pin-exhausted";
    case CaStatus::EmailRejected:
      return "email-rejected";
    case CaStatus::Issued:
      return "issued";
    case CaStatus::ReplayRejected:
      return "rejected-replay";
    case CaStatus::UnknownDevice:
      return "unknown-device";
    case CaStatus::PossessionInvalid:
      return "possession-invalid";
    case CaStatus::UnsupportedChallenge:
      return "unsupported-challenge";
  }
  return "?";
}

/// How a certification service authenticates requesters.
enum class ChallengeKind {
  EmailPin,   // a PIN mailed to the address owner must be echoed back
  DeviceId,   // a pre-registered device identifier must be presented
  Possession, // a certificate chain plus a fresh proof of the matching key
};

inline constexpr int kPinAttempts = 3;
inline constexpr size_t kPinDigits = 6;

/** In-network certification service.
 *
 *  Listens under <zone>/CA. A request opens with a NEW exchange that pins an
 *  ECDH session key and a request id; CHALLENGE exchanges then carry
 *  challenge payloads encrypted under that key, the requester using even
 *  nonce counters and the service odd ones. Response names repeat the request
 *  name, whose last component is a digest of the (unique per request)
 *  parameters, so cached responses can never answer a different request.
 *  Issued certificates are served from the service itself; requesters reach
 *  them through the forwarding hint returned on issuance.
 */
class CaService
{
public:
  CaService(Network& net, std::string entityId, Credential issuer, TrustBundle bundle,
            NameConvention convention, ChallengeKind challenge, uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_issuer(std::move(issuer))
    , m_bundle(std::move(bundle))
    , m_schema(m_bundle.schema())
    , m_conv(std::move(convention))
    , m_challenge(challenge)
    , m_rng(seed)
    , m_prefix(m_bundle.anchor->subject().append(kCaComponent))
  {
    ensureEntity(m_net, m_id);
    m_net.registerPrefix(m_id, m_prefix);
    m_net.addHandler(m_id, [this](const Interest& i) { return handle(i); });
  }

  /// Email addresses eligible for PIN certification, keyed to the mailbox owner.
  void
  allowEmail(const std::string& email, const std::string& ownerEntity)
  {
    m_allowedEmails[email] = ownerEntity;
  }

  void
  allowDevice(const std::string& deviceId)
  {
    m_knownDevices.insert(deviceId);
  }

  const Name&
  prefix() const
  {
    return m_prefix;
  }

  /// Routing hint that reaches this service for issued-certificate fetches.
  const Name&
  forwardingHint() const
  {
    return m_prefix;
  }

  const std::vector<Certificate>&
  issued() const
  {
    return m_issued;
  }

  size_t
  replaysRejected() const
  {
    return m_replaysRejected;
  }

private:
  struct Request
  {
    Bytes reqId;
    crypto::SymKey session = crypto::SymKey::fromBytes(Bytes(32, 0));
    Bytes certReqPub;
    uint64_t counter = 1; // service direction; requester uses even values
    std::string expect;   // next payload kind, empty once settled
    int pinAttempts = 0;
    std::string pin;
    std::string email;
    std::string deviceId;
  };

  std::optional<Data>
  handle(const Interest& interest)
  {
    if (auto it = m_issuedByName.find(interest.name); it != m_issuedByName.end())
      return it->second;
    if (!m_prefix.isPrefixOf(interest.name))
      return std::nullopt;
    try {
      if (interest.name.size() == m_prefix.size() + 2 &&
          interest.name[m_prefix.size()] == kNewComponent)
        return respondNew(interest);
      if (interest.name.size() == m_prefix.size() + 3 &&
          interest.name[m_prefix.size()] == kChallengeComponent)
        return respondChallenge(interest);
    }
    catch (const Error&) {
      // a request this malformed gets no answer at all
    }
    return std::nullopt;
  }

  std::optional<Data>
  respondNew(const Interest& interest)
  {
    if (!interest.appParams ||
        crypto::digestHex(*interest.appParams, 8) != interest.name[interest.name.size() - 1])
      return std::nullopt;
    Reader r(*interest.appParams);
    Bytes requesterEph = r.var();
    Bytes certReqPub = r.var();
    r.u64(); // timestamp, recorded in the packet for operators
    Bytes nonce = r.var();
    r.expectEnd();
    if (!verifyAsym(interest, certReqPub))
      return std::nullopt;

    if (!m_seenNonces.insert(nonce).second) {
      ++m_replaysRejected;
      Writer w;
      w.u8(static_cast<uint8_t>(CaStatus::ReplayRejected)).var({}).var({});
      return signed_(interest.name, w.take());
    }

    Request req;
    req.reqId = m_rng.bytes(8);
    req.certReqPub = std::move(certReqPub);
    crypto::AsymKeyPair eph = crypto::generateKeyPair(m_rng);
    req.session = crypto::dh(eph.priv, requesterEph);
    switch (m_challenge) {
      case ChallengeKind::EmailPin:
        req.expect = "email";
        break;
      case ChallengeKind::DeviceId:
        req.expect = "device-id";
        break;
      case ChallengeKind::Possession:
        req.expect = "possession";
        break;
    }

    Writer w;
    w.u8(static_cast<uint8_t>(CaStatus::Ok)).var(req.reqId).var(eph.pub);
    Data d = signed_(interest.name, w.take());
    m_requests[toHex(req.reqId)] = std::move(req);
    return d;
  }

  std::optional<Data>
  respondChallenge(const Interest& interest)
  {
    if (!interest.appParams ||
        crypto::digestHex(*interest.appParams, 8) != interest.name[interest.name.size() - 1])
      return std::nullopt;
    auto it = m_requests.find(interest.name[interest.name.size() - 2]);
    if (it == m_requests.end())
      return std::nullopt;
    Request& req = it->second;
    if (!verifyAsym(interest, req.certReqPub))
      return std::nullopt;

    Reader r(*interest.appParams);
    Bytes payload = crypto::aeadDecrypt(req.session, r.var(), req.reqId);
    r.expectEnd();
    Reader p(payload);
    std::string kind = p.str();
    Bytes body = p.var();
    p.expectEnd();

    auto [status, extra] = step(req, kind, body);
    Writer resp;
    resp.u8(static_cast<uint8_t>(status)).str(caStatusName(status)).var(extra);
    Writer content;
    content.var(crypto::aeadEncrypt(req.session, resp.out(), req.reqId, req.counter));
    req.counter += 2;
    return signed_(interest.name, content.take());
  }

  /// Advance one challenge round; returns the status and issuance details.
  std::pair<CaStatus, Bytes>
  step(Request& req, const std::string& kind, BytesView body)
  {
    if (req.expect.empty() || kind != req.expect)
      return {CaStatus::UnsupportedChallenge, {}};
    Reader b(body);

    if (kind == "email") {
      std::string email = b.str();
      b.expectEnd();
      auto owner = m_allowedEmails.find(email);
      if (owner == m_allowedEmails.end()) {
        req.expect.clear();
        return {CaStatus::EmailRejected, {}};
      }
      req.email = email;
      req.pin = makePin();
      req.expect = "pin";
      m_net.oobSend(OobChannel::Email, m_id, owner->second, toBytes(req.pin),
                    "certification PIN for " + email);
      return {CaStatus::Ok, {}};
    }

    if (kind == "pin") {
      std::string pin = b.str();
      b.expectEnd();
      if (pin != req.pin) {
        if (++req.pinAttempts >= kPinAttempts) {
          req.expect.clear();
          return {CaStatus::PinExhausted, {}};
        }
        return {CaStatus::WrongPin, {}};
      }
      return issue(req, convertName(m_conv, req.email, req.certReqPub), req.email);
    }

    if (kind == "device-id") {
      std::string id = b.str();
      b.expectEnd();
      if (!m_knownDevices.count(id)) {
        req.expect.clear();
        return {CaStatus::UnknownDevice, {}};
      }
      req.deviceId = id;
      req.expect = "device-proceed";
      return {CaStatus::Ok, {}};
    }

    if (kind == "device-proceed") {
      b.expectEnd();
      return issue(req, convertName(m_conv, req.deviceId, req.certReqPub), req.deviceId);
    }

    if (kind == "possession") {
      Data tempCert = decodeData(b.var());
      Data issuerCert = decodeData(b.var());
      Bytes proof = b.var();
      b.expectEnd();
      req.expect.clear();
      auto rep = validateChain(m_schema, *m_bundle.anchor, {tempCert, issuerCert});
      if (!rep.accepted)
        return {CaStatus::PossessionInvalid, {}};
      Certificate held = Certificate::fromData(tempCert);
      Writer msg;
      msg.raw(req.reqId).raw(req.certReqPub);
      if (!crypto::verify(held.publicKey(), msg.out(), proof))
        return {CaStatus::PossessionInvalid, {}};
      return issue(req, held.subject(), held.subject().toUri());
    }

    req.expect.clear();
    return {CaStatus::UnsupportedChallenge, {}};
  }

  std::pair<CaStatus, Bytes>
  issue(Request& req, const Name& subject, const std::string& identifier)
  {
    m_registry.claim(identifier, subject);
    Certificate cert = issueCertificate(subject, req.certReqPub, m_issuer.cert, m_issuer.key);
    m_issuedByName[cert.name()] = cert.data();
    m_issued.push_back(cert);
    req.expect.clear();
    Writer extra;
    extra.var(cert.name().encode()).var(forwardingHint().encode());
    return {CaStatus::Issued, extra.take()};
  }

  Data
  signed_(const Name& name, Bytes content)
  {
    Data d;
    d.name = name;
    d.content = std::move(content);
    signData(d, m_issuer.key, m_issuer.cert.name());
    return d;
  }

  std::string
  makePin()
  {
    std::string pin;
    for (size_t i = 0; i < kPinDigits; ++i)
      pin.push_back(static_cast<char>('0' + m_rng.below(10)));
    return pin;
  }

  Network& m_net;
  std::string m_id;
  Credential m_issuer;
  TrustBundle m_bundle;
  TrustSchema m_schema;
  NameConvention m_conv;
  ChallengeKind m_challenge;
  crypto::Drbg m_rng;
  Name m_prefix;
  std::map<std::string, std::string> m_allowedEmails;
  std::set<std::string> m_knownDevices;
  std::map<std::string, Request> m_requests;
  std::set<Bytes> m_seenNonces;
  std::map<Name, Data> m_issuedByName;
  std::vector<Certificate> m_issued;
  NameRegistry m_registry;
  size_t m_replaysRejected = 0;
};

/** Requester side of the certification exchanges.
 *
 *  Drives NEW and CHALLENGE round trips against one service, validates every
 *  response against the installed trust bundle, and keeps the last response
 *  as evidence. Protocol errors surface as status codes for the caller to
 *  map; transport and validation failures throw.
 */
class CertRequester
{
public:
  CertRequester(Network& net, std::string entityId, TrustBundle bundle,
                crypto::AsymKeyPair certReqKey, uint64_t seed)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_bundle(std::move(bundle))
    , m_schema(m_bundle.schema())
    , m_caPrefix(m_bundle.anchor->subject().append(kCaComponent))
    , m_key(std::move(certReqKey))
    , m_rng(seed)
  {
    ensureEntity(m_net, m_id);
  }

  const Data&
  runNew()
  {
    crypto::AsymKeyPair eph = crypto::generateKeyPair(m_rng);
    Writer params;
    params.var(eph.pub).var(m_key.pub).u64(m_net.now()).var(m_rng.bytes(8));
    Data d = roundTrip(m_caPrefix.append(kNewComponent), params.take());

    Reader r(d.content);
    m_status = static_cast<CaStatus>(r.u8());
    m_detail = caStatusName(m_status);
    if (m_status == CaStatus::Ok) {
      m_reqId = r.var();
      m_session = crypto::dh(eph.priv, r.var());
      m_counter = 0;
    }
    m_last = std::move(d);
    return m_last;
  }

  const Data&
  challenge(const std::string& kind, Bytes body)
  {
    if (m_reqId.empty())
      throw ProtocolOrder("no open certification request");
    Writer payload;
    payload.str(kind).var(body);
    Writer params;
    params.var(crypto::aeadEncrypt(m_session, payload.out(), m_reqId, m_counter));
    m_counter += 2;
    Data d = roundTrip(m_caPrefix.append(kChallengeComponent).append(toHex(m_reqId)),
                       params.take());

    Reader r(d.content);
    Reader resp(crypto::aeadDecrypt(m_session, r.var(), m_reqId));
    m_status = static_cast<CaStatus>(resp.u8());
    m_detail = resp.str();
    Bytes extra = resp.var();
    if (m_status == CaStatus::Issued) {
      Reader e(extra);
      m_certName = decodeName(e.var());
      m_hint = decodeName(e.var());
    }
    m_last = std::move(d);
    return m_last;
  }

  const Data&
  submitEmail(const std::string& email)
  {
    Writer b;
    b.str(email);
    return challenge("email", b.take());
  }

  const Data&
  submitPin(const std::string& pin)
  {
    Writer b;
    b.str(pin);
    return challenge("pin", b.take());
  }

  const Data&
  submitDeviceId(const std::string& deviceId)
  {
    Writer b;
    b.str(deviceId);
    return challenge("device-id", b.take());
  }

  const Data&
  proceedDevice()
  {
    return challenge("device-proceed", {});
  }

  const Data&
  submitPossession(const Data& heldCert, const Data& issuerCert, const crypto::AsymKeyPair& heldKey)
  {
    Writer msg;
    msg.raw(m_reqId).raw(m_key.pub);
    Writer b;
    b.var(encode(heldCert)).var(encode(issuerCert)).var(crypto::sign(heldKey.priv, msg.out()));
    return challenge("possession", b.take());
  }

  CaStatus
  status() const
  {
    return m_status;
  }

  const std::string&
  detail() const
  {
    return m_detail;
  }

  const Name&
  issuedCertName() const
  {
    return m_certName;
  }

  const Name&
  issuedHint() const
  {
    return m_hint;
  }

  const Bytes&
  reqId() const
  {
    return m_reqId;
  }

  const crypto::AsymKeyPair&
  certReqKey() const
  {
    return m_key;
  }

  Certificate
  fetchCertificate()
  {
    if (m_status != CaStatus::Issued)
      throw ProtocolOrder("no certificate has been issued");
    Interest i;
    i.name = m_certName;
    auto got = m_net.expressInterest(m_id, i, m_hint);
    if (!got)
      throw FetchTimeout("certificate " + m_certName.toUri());
    auto rep = validateChain(m_schema, *m_bundle.anchor, {*got});
    if (!rep.accepted)
      throw ChainInvalid("issued certificate: " + rep.reason);
    return Certificate::fromData(*got);
  }

private:
  /// Express an Interest named by the digest of its parameters; validate the response.
  Data
  roundTrip(const Name& base, Bytes params)
  {
    Interest i;
    i.name = base.append(crypto::digestHex(params, 8));
    i.appParams = std::move(params);
    signInterest(i, m_key);
    auto got = m_net.expressInterest(m_id, i);
    if (!got)
      throw FetchTimeout(i.name.toUri());
    if (got->name != i.name)
      throw MalformedPacket("response does not repeat the request name");
    auto rep = validateChain(m_schema, *m_bundle.anchor, {*got});
    if (!rep.accepted)
      throw ChainInvalid("certification response: " + rep.reason);
    return *got;
  }

  Network& m_net;
  std::string m_id;
  TrustBundle m_bundle;
  TrustSchema m_schema;
  Name m_caPrefix;
  crypto::AsymKeyPair m_key;
  crypto::Drbg m_rng;
  Bytes m_reqId;
  crypto::SymKey m_session = crypto::SymKey::fromBytes(Bytes(32, 0));
  uint64_t m_counter = 0;
  CaStatus m_status = CaStatus::Ok;
  std::string m_detail;
  Name m_certName;
  Name m_hint;
  Data m_last;
};

} // namespace teb
