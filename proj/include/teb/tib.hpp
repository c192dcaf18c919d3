#pragma once

#include "bootstrap.hpp"
#include "simnet.hpp"

#include <memory>

namespace teb {

inline constexpr const char* kNacComponent = "NAC";
inline constexpr const char* kKekComponent = "KEK";
inline constexpr const char* kKdkComponent = "KDK";
inline constexpr const char* kEncryptedByComponent = "ENCRYPTED-BY";
inline constexpr const char* kCkComponent = "CK";
inline constexpr const char* kSchemaComponent = "SCHEMA";

inline std::optional<uint64_t>
parseVersion(const std::string& comp)
{
  if (comp.rfind("v=", 0) != 0 || comp.size() < 3)
    return std::nullopt;
  uint64_t v = 0;
  for (size_t i = 2; i < comp.size(); ++i) {
    if (comp[i] < '0' || comp[i] > '9')
      return std::nullopt;
    v = v * 10 + static_cast<uint64_t>(comp[i] - '0');
  }
  return v;
}

/// The credentials an entity can sign with.
class KeyChain
{
public:
  void
  addCredential(Credential c)
  {
    m_credentials.push_back(std::move(c));
  }

  const std::vector<Credential>&
  credentials() const
  {
    return m_credentials;
  }

  /** Pick the signing credential for a data name: the one whose subject is
   *  the longest prefix of the name; ties go to the lexicographically
   *  smallest subject.
   */
  const Credential*
  selectForName(const Name& name) const
  {
    const Credential* best = nullptr;
    for (const auto& c : m_credentials) {
      Name subject = c.cert.subject();
      if (!subject.isPrefixOf(name))
        continue;
      if (best == nullptr || subject.size() > best->cert.subject().size() ||
          (subject.size() == best->cert.subject().size() && subject < best->cert.subject()))
        best = &c;
    }
    return best;
  }

  const Credential*
  findByCertName(const Name& certName) const
  {
    for (const auto& c : m_credentials)
      if (c.cert.name() == certName)
        return &c;
    return nullptr;
  }

private:
  std::vector<Credential> m_credentials;
};

/** Certificates (and content keys) that already passed chain validation.
 *  A hit short-circuits both the network fetch and the revalidation of the
 *  rest of the chain. FIFO bounded.
 */
class ValidatedKeyCache
{
public:
  explicit ValidatedKeyCache(size_t capacity = 16)
    : m_capacity(capacity)
  {
  }

  const Data*
  find(const Name& name)
  {
    for (const auto& d : m_entries)
      if (d.name == name) {
        ++m_hits;
        return &d;
      }
    ++m_misses;
    return nullptr;
  }

  void
  insert(const Data& d)
  {
    for (const auto& e : m_entries)
      if (e.name == d.name)
        return;
    m_entries.push_back(d);
    if (m_entries.size() > m_capacity)
      m_entries.erase(m_entries.begin());
  }

  size_t
  size() const
  {
    return m_entries.size();
  }

  size_t
  hits() const
  {
    return m_hits;
  }

  size_t
  misses() const
  {
    return m_misses;
  }

  void
  clear()
  {
    m_entries.clear();
  }

private:
  size_t m_capacity;
  std::vector<Data> m_entries;
  size_t m_hits = 0;
  size_t m_misses = 0;
};

/** Trusted information base: the post-bootstrap runtime of one entity.
 *
 *  Owns the credentials and trust bundle a bootstrap produced, serves the
 *  entity's packets, validates everything consumed against the schema, and
 *  runs name-based access control for encrypted content:
 *
 *    - produce() wraps content under a fresh content key (CK), itself
 *      delivered encrypted to the access manager's key-encryption key (KEK);
 *    - consume() walks the producer's certificate chain to the anchor
 *      (the anchor is refetched and compared against the local copy), then
 *      unwraps the CK via the consumer's key-decryption key (KDK) grant;
 *    - the validated key cache cuts repeat walks short.
 */
class Tib
{
public:
  /// Adopt a completed bootstrap session's credentials and trust bundle.
  static std::unique_ptr<Tib>
  fromSession(Network& net, const std::string& entityId, const BootstrapSession& session,
              crypto::Drbg rng)
  {
    if (!session.completed())
      throw ProtocolOrder("session has not completed bootstrapping");
    std::unique_ptr<Tib> tib(new Tib(net, entityId, *session.trust(), std::move(rng)));
    for (const auto& c : session.credentials())
      tib->m_keyChain.addCredential(c);
    tib->attach();
    return tib;
  }

  /// Root-of-trust setup for the controller itself.
  static std::unique_ptr<Tib>
  selfBootstrap(Network& net, const std::string& entityId, const Name& identity,
                crypto::Drbg rng, SchemaMode mode = SchemaMode::Implicit,
                std::string schemaText = {})
  {
    crypto::AsymKeyPair key = crypto::generateKeyPair(rng);
    Certificate anchor = makeSelfSigned(identity, key);
    TrustBundle bundle{mode, anchor, std::move(schemaText)};
    if (mode == SchemaMode::Explicit) {
      ValidationReport rep = validateChain(bundle.schema(), anchor, {anchor.data()});
      if (!rep.accepted)
        throw ChainInvalid("anchor does not satisfy the schema: " + rep.reason);
    }
    std::unique_ptr<Tib> tib(new Tib(net, entityId, bundle, std::move(rng)));
    tib->m_keyChain.addCredential({anchor, key});
    tib->attach();
    return tib;
  }

  /** Local provisioning without a protocol run: a credential issued out of
   *  band plus the bundle to trust. The credential is validated the same way
   *  the bootstrap executor validates issued certificates. chainCerts are
   *  additional certificates this entity serves for consumers walking its
   *  chain.
   */
  static std::unique_ptr<Tib>
  installDirect(Network& net, const std::string& entityId, const Credential& credential,
                const TrustBundle& bundle, const std::vector<Data>& chainCerts,
                crypto::Drbg rng)
  {
    if (!bundle.anchor)
      throw ChainInvalid("bundle has no anchor");
    std::vector<Data> chain = {credential.cert.data()};
    chain.insert(chain.end(), chainCerts.begin(), chainCerts.end());
    ValidationReport rep = validateChain(bundle.schema(), *bundle.anchor, chain);
    if (!rep.accepted)
      throw ChainInvalid("credential failed validation: " + rep.reason);
    std::unique_ptr<Tib> tib(new Tib(net, entityId, bundle, std::move(rng)));
    tib->m_keyChain.addCredential(credential);
    tib->attach();
    for (const auto& d : chainCerts)
      tib->serveData(d);
    return tib;
  }

  Tib(const Tib&) = delete;
  Tib&
  operator=(const Tib&) = delete;

  const std::string&
  entityId() const
  {
    return m_id;
  }

  const TrustBundle&
  trust() const
  {
    return m_trust;
  }

  const TrustSchema&
  schema() const
  {
    return m_schema;
  }

  const Certificate&
  anchor() const
  {
    return *m_trust.anchor;
  }

  const KeyChain&
  keyChain() const
  {
    return m_keyChain;
  }

  std::vector<Name>
  identities() const
  {
    std::vector<Name> out;
    for (const auto& c : m_keyChain.credentials())
      out.push_back(c.cert.subject());
    return out;
  }

  void
  setCacheEnabled(bool on)
  {
    m_cacheEnabled = on;
    if (!on) {
      m_cache.clear();
      m_kdkByKek.clear();
    }
  }

  void
  setCacheCapacity(size_t capacity)
  {
    m_cache = ValidatedKeyCache(capacity);
    m_kdkByKek.clear();
  }

  ValidatedKeyCache&
  keyCache()
  {
    return m_cache;
  }

  /// Make a Data retrievable; the exact name becomes a route to this entity.
  void
  serveData(const Data& d)
  {
    m_served[d.name] = d;
    m_net.registerPrefix(m_id, d.name);
  }

  // ---- access control ----

  /// Become the access manager for the prefix: generate and publish the KEK.
  void
  nacSetup(const Name& prefix)
  {
    if (m_nacManaged.count(prefix))
      throw SlotAlreadyFilled("already managing access for " + prefix.toUri());
    crypto::AsymKeyPair kekKey = crypto::generateKeyPair(m_rng);
    Data kek;
    kek.name = prefix.append(kNacComponent)
                 .append(kKekComponent)
                 .append(crypto::digestHex(kekKey.pub, 16));
    kek.content = kekKey.pub;
    signWith(kek, managerCredential());
    m_nacManaged.emplace(prefix, std::move(kekKey));
    serveData(kek);
    m_net.registerPrefix(m_id, prefix.append(kNacComponent));
  }

  /// Grant a consumer decryption rights: publish its KDK for the prefix.
  void
  grantAccess(const Name& prefix, const Certificate& consumerCert)
  {
    auto it = m_nacManaged.find(prefix);
    if (it == m_nacManaged.end())
      throw NoKek("not managing access for " + prefix.toUri());
    const crypto::AsymKeyPair& kekKey = it->second;

    crypto::AsymKeyPair eph = crypto::generateKeyPair(m_rng);
    crypto::SymKey wrap = crypto::dh(eph.priv, consumerCert.publicKey());
    Data kdk;
    kdk.name = prefix.append(kNacComponent)
                 .append(kKdkComponent)
                 .append(crypto::digestHex(kekKey.pub, 16))
                 .append(kEncryptedByComponent)
                 .append(consumerCert.name());
    Writer w;
    w.var(eph.pub);
    w.var(crypto::aeadEncrypt(wrap, kekKey.priv, kdk.name.encode()));
    kdk.content = w.take();
    signWith(kdk, managerCredential());
    serveData(kdk);
  }

  /** Publish encrypted content. Picks the signing identity by name, finds
   *  the governing KEK (longest prefix first), wraps the payload under a
   *  fresh CK, and serves both packets. Returns (AppData, CkData).
   */
  std::pair<Data, Data>
  produce(const Name& name, BytesView content)
  {
    const Credential* cred = m_keyChain.selectForName(name);
    if (cred == nullptr)
      throw NoSigningIdentity("no identity signs for " + name.toUri());
    m_net.note(m_id, "produce " + name.toUri() + " signed by " + cred->cert.name().toUri());

    Data kekData = findKek(name);

    crypto::SymKey ck = crypto::SymKey::random(m_rng);
    Data ckData;
    ckData.name = cred->cert.subject().append(kCkComponent).append(toHex(m_rng.bytes(8)));
    crypto::AsymKeyPair eph = crypto::generateKeyPair(m_rng);
    crypto::SymKey wrap = crypto::dh(eph.priv, kekData.content);
    {
      Writer w;
      w.var(kekData.name.encode());
      w.var(eph.pub);
      w.var(crypto::aeadEncrypt(wrap, ck.view(), ckData.name.encode()));
      ckData.content = w.take();
    }
    signWith(ckData, *cred);
    serveData(ckData);

    Data app;
    app.name = name;
    {
      Writer w;
      w.var(ckData.name.encode());
      w.var(crypto::aeadEncrypt(ck, content, name.encode()));
      app.content = w.take();
    }
    signWith(app, *cred);
    serveData(app);
    return {app, ckData};
  }

  /** Fetch, validate, and decrypt. One certificate chain walk per call:
   *  AppData's signer chain is fetched link by link up to the anchor (the
   *  anchor itself is fetched and compared against the local copy), with the
   *  validated key cache cutting the walk short at the first known link.
   *  The CK packet is checked against the walked producer certificate and
   *  the KDK against the local anchor, costing no extra certificate fetches.
   */
  std::pair<Name, Bytes>
  consume(const Name& name)
  {
    Data app = fetchData(name);
    Reader appReader(app.content);
    Name ckName = decodeName(appReader.var());
    Bytes contentCt = appReader.var();
    appReader.expectEnd();

    // one chain walk for the AppData
    std::vector<Data> chain = {app};
    bool terminalTrusted = false;
    while (true) {
      const Data& last = chain.back();
      if (!last.keyLocator)
        throw ChainInvalid("'" + last.name.toUri() + "' names no signer");
      const Name& locator = *last.keyLocator;
      if (m_cacheEnabled) {
        const Data* hit = m_cache.find(locator);
        if (hit != nullptr) {
          chain.push_back(*hit);
          terminalTrusted = true;
          break;
        }
      }
      if (locator == anchor().name()) {
        // refetch the anchor and insist it matches what we were bootstrapped with
        Data fetched = fetchData(locator);
        if (!(fetched == anchor().data()))
          throw ChainInvalid("fetched anchor differs from the installed anchor");
        chain.push_back(anchor().data());
        break;
      }
      if (chain.size() > 32)
        throw ChainInvalid("certificate chain exceeds the depth limit");
      chain.push_back(fetchData(locator));
    }
    ValidationReport rep = validateChain(m_schema, anchor(), chain, terminalTrusted);
    if (!rep.accepted)
      throw ChainInvalid("content rejected: " + rep.reason);
    const Data& producerCert = chain[1];
    if (m_cacheEnabled)
      for (size_t i = chain.size(); i-- > 1;)
        m_cache.insert(chain[i]);

    // the CK must come from the same producer; no further fetches needed
    Data ckData;
    const Data* cachedCk = m_cacheEnabled ? m_cache.find(ckName) : nullptr;
    if (cachedCk != nullptr) {
      ckData = *cachedCk;
    }
    else {
      ckData = fetchData(ckName);
      if (!ckData.keyLocator || !(*ckData.keyLocator == producerCert.name))
        throw ChainInvalid("content key is not signed by the content producer");
      ValidationReport ckRep = validateChain(m_schema, anchor(), {ckData, producerCert}, true);
      if (!ckRep.accepted)
        throw ChainInvalid("content key rejected: " + ckRep.reason);
      if (m_cacheEnabled)
        m_cache.insert(ckData);
    }
    Reader ckReader(ckData.content);
    Name kekName = decodeName(ckReader.var());
    Bytes ephPub = ckReader.var();
    Bytes ckCt = ckReader.var();
    ckReader.expectEnd();

    Bytes kekPriv = obtainKdk(kekName);
    crypto::SymKey wrap = crypto::dh(kekPriv, ephPub);
    crypto::SymKey ck = crypto::SymKey::fromBytes(
      crypto::aeadDecrypt(wrap, ckCt, ckData.name.encode()));
    Bytes plain = crypto::aeadDecrypt(ck, contentCt, name.encode());
    return {app.name, plain};
  }

  // ---- schema distribution ----

  /// Controller-only: sign and serve a new schema version for the zone.
  void
  publishSchema(const TrustSchema& schema, uint64_t version)
  {
    const Credential* anchorCred = m_keyChain.findByCertName(anchor().name());
    if (anchorCred == nullptr)
      throw NotAuthorized("only the zone controller publishes schemas");
    if (version <= m_schemaVersion)
      throw StaleVersion("version " + std::to_string(version) + " is not newer than " +
                         std::to_string(m_schemaVersion));
    Data d;
    d.name = anchor().subject().append(kSchemaComponent).append("v=" + std::to_string(version));
    d.content = toBytes(toText(schema));
    signWith(d, *anchorCred);
    serveData(d);
    m_net.registerPrefix(m_id, anchor().subject().append(kSchemaComponent));

    adoptSchema(schema, version);
  }

  /** Fetch the newest schema version for the zone and adopt it; flips the
   *  trust mode to explicit. Rejects anything not strictly newer.
   */
  uint64_t
  fetchSchema()
  {
    Data d = fetchData(anchor().subject().append(kSchemaComponent));
    ValidationReport rep = validateChain(m_schema, anchor(), {d});
    if (!rep.accepted)
      throw ChainInvalid("schema rejected: " + rep.reason);
    if (d.name.size() < 2 || d.name[d.name.size() - 2] != kSchemaComponent)
      throw ChainInvalid("'" + d.name.toUri() + "' is not a schema packet");
    auto version = parseVersion(d.name[d.name.size() - 1]);
    if (!version)
      throw ChainInvalid("schema packet has no version");
    if (*version <= m_schemaVersion)
      throw StaleVersion("fetched schema v" + std::to_string(*version) +
                         " is not newer than v" + std::to_string(m_schemaVersion));
    adoptSchema(parseSchema(toString(d.content)), *version);
    return *version;
  }

  uint64_t
  schemaVersion() const
  {
    return m_schemaVersion;
  }

  Network&
  network()
  {
    return m_net;
  }

private:
  Tib(Network& net, std::string entityId, TrustBundle trust, crypto::Drbg rng)
    : m_net(net)
    , m_id(std::move(entityId))
    , m_trust(std::move(trust))
    , m_schema(m_trust.schema())
    , m_rng(std::move(rng))
  {
    if (!m_trust.anchor)
      throw ChainInvalid("trust bundle has no anchor");
  }

  void
  attach()
  {
    if (!m_net.hasEntity(m_id))
      m_net.addEntity(m_id);
    m_net.addHandler(m_id, [this](const Interest& i) { return servedLookup(i); });
    for (const auto& c : m_keyChain.credentials())
      serveData(c.cert.data());
  }

  std::optional<Data>
  servedLookup(const Interest& interest) const
  {
    auto it = m_served.find(interest.name);
    if (it != m_served.end())
      return it->second;
    // prefix lookup; versioned candidates are served newest-first
    const Data* best = nullptr;
    uint64_t bestVer = 0;
    for (const auto& [n, d] : m_served) {
      if (!interest.name.isPrefixOf(n))
        continue;
      uint64_t ver = n.size() > 0 ? parseVersion(n[n.size() - 1]).value_or(0) : 0;
      if (best == nullptr || ver > bestVer || (ver == bestVer && best->name < n)) {
        best = &d;
        bestVer = ver;
      }
    }
    if (best != nullptr)
      return *best;
    return std::nullopt;
  }

  void
  signWith(Data& d, const Credential& cred)
  {
    signData(d, cred.key, cred.cert.name());
  }

  const Credential&
  managerCredential() const
  {
    // access keys must validate under rules signed by the zone controller,
    // so managing requires holding the anchor identity
    const Credential* c = m_keyChain.findByCertName(anchor().name());
    if (c == nullptr)
      throw NotAuthorized("access management requires the zone anchor identity");
    return *c;
  }

  Data
  fetchData(const Name& name)
  {
    Interest i;
    i.name = name;
    std::optional<Data> got = m_net.expressInterest(m_id, i);
    if (!got)
      throw FetchTimeout("no data for " + name.toUri());
    return std::move(*got);
  }

  /// Longest governing KEK for the name; positive cache per prefix.
  Data
  findKek(const Name& name)
  {
    for (size_t k = name.size(); k-- > 0;) {
      auto it = m_kekByPrefix.find(name.getPrefix(k));
      if (it != m_kekByPrefix.end())
        return it->second;
    }
    for (size_t k = name.size(); k-- > 0;) {
      Name prefix = name.getPrefix(k);
      Interest i;
      i.name = prefix.append(kNacComponent).append(kKekComponent);
      std::optional<Data> got = m_net.expressInterest(m_id, i);
      if (!got)
        continue;
      if (!isCertShapedKek(*got))
        throw ChainInvalid("KEK packet for " + prefix.toUri() + " is malformed");
      ValidationReport rep = validateChain(m_schema, anchor(), {*got});
      if (!rep.accepted)
        throw ChainInvalid("KEK rejected: " + rep.reason);
      m_kekByPrefix.emplace(prefix, *got);
      return *got;
    }
    throw NoKek("no access manager found above " + name.toUri());
  }

  static bool
  isCertShapedKek(const Data& d)
  {
    return d.name.size() >= 3 && d.name[d.name.size() - 3] == kNacComponent &&
           d.name[d.name.size() - 2] == kKekComponent &&
           d.content.size() == crypto_sign_PUBLICKEYBYTES;
  }

  /// The KEK private key granted to one of this entity's identities.
  Bytes
  obtainKdk(const Name& kekName)
  {
    if (kekName.size() < 3)
      throw ChainInvalid("malformed KEK name " + kekName.toUri());
    auto cached = m_kdkByKek.find(kekName);
    if (cached != m_kdkByKek.end())
      return cached->second;

    Name prefix = kekName.getPrefix(kekName.size() - 3);
    const std::string& kid = kekName[kekName.size() - 1];
    for (const auto& cred : m_keyChain.credentials()) {
      Name kdkName = prefix.append(kNacComponent)
                       .append(kKdkComponent)
                       .append(kid)
                       .append(kEncryptedByComponent)
                       .append(cred.cert.name());
      Interest i;
      i.name = kdkName;
      std::optional<Data> got = m_net.expressInterest(m_id, i);
      if (!got)
        continue;
      // the grant must come from the zone controller; the local anchor
      // closes this chain without further fetches
      ValidationReport rep = validateChain(m_schema, anchor(), {*got});
      if (!rep.accepted)
        throw ChainInvalid("KDK rejected: " + rep.reason);
      Reader r(got->content);
      Bytes ephPub = r.var();
      Bytes ct = r.var();
      r.expectEnd();
      crypto::SymKey wrap = crypto::dh(cred.key.priv, ephPub);
      Bytes kekPriv = crypto::aeadDecrypt(wrap, ct, got->name.encode());
      if (kekPriv.size() != crypto_sign_SECRETKEYBYTES)
        throw AuthFailure("unexpected KEK private key size");
      if (m_cacheEnabled)
        m_kdkByKek.emplace(kekName, kekPriv);
      return kekPriv;
    }
    throw NotAuthorized("no decryption grant for " + kekName.toUri());
  }

  void
  adoptSchema(const TrustSchema& schema, uint64_t version)
  {
    m_trust.mode = SchemaMode::Explicit;
    m_trust.schemaText = toText(schema);
    m_schema = schema;
    m_schemaVersion = version;
  }

  Network& m_net;
  std::string m_id;
  TrustBundle m_trust;
  TrustSchema m_schema;
  crypto::Drbg m_rng;
  KeyChain m_keyChain;
  ValidatedKeyCache m_cache;
  bool m_cacheEnabled = true;
  std::map<Name, Data> m_served;
  std::map<Name, crypto::AsymKeyPair> m_nacManaged;
  std::map<Name, Data> m_kekByPrefix;
  std::map<Name, Bytes> m_kdkByKek;
  uint64_t m_schemaVersion = 0;
};

} // namespace teb
