#pragma once

#include "crypto.hpp"
#include "packet.hpp"

namespace teb {

inline constexpr const char* kKeyComponent = "KEY";
inline constexpr const char* kSelfIssuerId = "self";

/// <subject>/KEY/<key-id>/<issuer-id>/v=<n>
inline bool
isCertName(const Name& name)
{
  return name.size() >= 4 && name[name.size() - 4] == kKeyComponent &&
         name[name.size() - 1].rfind("v=", 0) == 0;
}

/** A certificate is a Data whose name follows the KEY convention and whose
 *  content is the subject's Ed25519 public key.
 */
class Certificate
{
public:
  static Certificate
  fromData(Data d)
  {
    if (!isCertName(d.name))
      throw MalformedName("'" + d.name.toUri() + "' is not a certificate name");
    if (d.content.size() != crypto_sign_PUBLICKEYBYTES)
      throw MalformedPacket("certificate content is not an Ed25519 public key");
    Certificate cert;
    cert.m_data = std::move(d);
    return cert;
  }

  const Data&
  data() const
  {
    return m_data;
  }

  const Name&
  name() const
  {
    return m_data.name;
  }

  Name
  subject() const
  {
    return m_data.name.getPrefix(m_data.name.size() - 4);
  }

  const std::string&
  keyId() const
  {
    return m_data.name[m_data.name.size() - 3];
  }

  const std::string&
  issuerId() const
  {
    return m_data.name[m_data.name.size() - 2];
  }

  uint64_t
  version() const
  {
    return std::stoull(m_data.name[m_data.name.size() - 1].substr(2));
  }

  BytesView
  publicKey() const
  {
    return m_data.content;
  }

  bool
  isSelfSigned() const
  {
    return m_data.keyLocator && *m_data.keyLocator == m_data.name;
  }

  bool
  operator==(const Certificate&) const = default;

private:
  Certificate() = default;

  Data m_data;
};

inline Name
certificateName(const Name& subject, BytesView publicKey, const std::string& issuerId,
                uint64_t version)
{
  return subject.append(kKeyComponent)
    .append(crypto::digestHex(publicKey, 8))
    .append(issuerId)
    .append("v=" + std::to_string(version));
}

// ---- packet signing helpers ----

inline void
signData(Data& data, const crypto::AsymKeyPair& key, const Name& keyLocator)
{
  data.keyLocator = keyLocator;
  data.sig.scheme = SigScheme::Asym;
  data.sig.keyId = fromHex(crypto::digestHex(key.pub, 16));
  data.sig.sig = crypto::sign(key.priv, signedPortion(data));
}

inline void
signInterest(Interest& interest, const crypto::AsymKeyPair& key)
{
  interest.sig.scheme = SigScheme::Asym;
  interest.sig.keyId = fromHex(crypto::digestHex(key.pub, 16));
  interest.sig.sig = crypto::sign(key.priv, signedPortion(interest));
}

inline void
hmacSignData(Data& data, const crypto::SymKey& key)
{
  data.sig.scheme = SigScheme::Hmac;
  data.sig.keyId = fromHex(crypto::digestHex(key.view(), 16));
  data.sig.sig = crypto::hmac(key, signedPortion(data));
}

inline void
hmacSignInterest(Interest& interest, const crypto::SymKey& key)
{
  interest.sig.scheme = SigScheme::Hmac;
  interest.sig.keyId = fromHex(crypto::digestHex(key.view(), 16));
  interest.sig.sig = crypto::hmac(key, signedPortion(interest));
}

template<typename Packet>
bool
verifyAsym(const Packet& pkt, BytesView publicKey)
{
  return pkt.sig.scheme == SigScheme::Asym &&
         crypto::verify(publicKey, signedPortion(pkt), pkt.sig.sig);
}

template<typename Packet>
bool
verifyHmac(const Packet& pkt, const crypto::SymKey& key)
{
  return pkt.sig.scheme == SigScheme::Hmac &&
         crypto::hmacVerify(key, signedPortion(pkt), pkt.sig.sig);
}

/** Self-signed certificate: issuer id "self", key locator pointing at the
 *  certificate's own name. This is the shape of a trust anchor.
 */
inline Certificate
makeSelfSigned(const Name& subject, const crypto::AsymKeyPair& key, uint64_t version = 1)
{
  Data d;
  d.name = certificateName(subject, key.pub, kSelfIssuerId, version);
  d.content = key.pub;
  signData(d, key, d.name);
  return Certificate::fromData(std::move(d));
}

/** Issue a certificate for subjectPub under the issuer's key. The issuer id
 *  component is "root" when the issuer is self-signed (the trust anchor) and
 *  the last component of the issuer's subject otherwise, which is what lets
 *  schema rules bind an issuer id to the issuing entity's own name.
 */
inline Certificate
issueCertificate(const Name& subject, BytesView subjectPub, const Certificate& issuerCert,
                 const crypto::AsymKeyPair& issuerKey, uint64_t version = 1)
{
  std::string issuerId = "root";
  if (!issuerCert.isSelfSigned()) {
    Name is = issuerCert.subject();
    if (is.empty())
      throw MalformedName("issuer certificate has an empty subject");
    issuerId = is[is.size() - 1];
  }
  Data d;
  d.name = certificateName(subject, subjectPub, issuerId, version);
  d.content = Bytes(subjectPub.begin(), subjectPub.end());
  signData(d, issuerKey, issuerCert.name());
  return Certificate::fromData(std::move(d));
}

} // namespace teb
