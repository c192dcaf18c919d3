#pragma once

#include "naming.hpp"
#include "schema.hpp"

#include <algorithm>
#include <array>

namespace teb {

/** The five bootstrapping procedures. Arrows give the data dependencies:
 *
 *      ContAuth ──▶ EnewTrust ──▶ EnewCert ◀── EnewNaming ◀── EnewAuth
 *
 *  Everything else about a deployment (who talks first, which secrets are
 *  exchanged over which channel) lives in the protocol drivers; the session
 *  executor below only enforces the dependencies.
 */
enum class Procedure {
  ContAuth,   // E_new authenticates the controller
  EnewAuth,   // the controller authenticates E_new
  EnewTrust,  // E_new installs the trust bundle (anchor, schema)
  EnewNaming, // E_new is assigned its name(s)
  EnewCert,   // E_new obtains certificates for the assigned name(s)
};

inline constexpr std::array<Procedure, 5> kProcedures = {
  Procedure::ContAuth, Procedure::EnewAuth, Procedure::EnewTrust, Procedure::EnewNaming,
  Procedure::EnewCert};

inline const char*
code(Procedure p)
{
  switch (p) {
    case Procedure::ContAuth:
      return "CA";
    case Procedure::EnewAuth:
      return "EA";
    case Procedure::EnewTrust:
      return "ET";
    case Procedure::EnewNaming:
      return "EN";
    case Procedure::EnewCert:
      return "EC";
  }
  return "?";
}

inline std::optional<Procedure>
procedureFromCode(std::string_view s)
{
  for (Procedure p : kProcedures)
    if (s == code(p))
      return p;
  return std::nullopt;
}

inline std::string
orderString(const std::vector<Procedure>& order)
{
  std::string out;
  for (size_t i = 0; i < order.size(); ++i) {
    if (i > 0)
      out += ",";
    out += code(order[i]);
  }
  return out;
}

/// Keyed opaques carried by the authentication contexts and proofs.
using Material = std::map<std::string, Bytes>;

/// What E_new holds out-of-band to authenticate the controller.
struct Cac
{
  Name controllerId;
  Material material;
};

/// What the controller holds out-of-band to authenticate E_new.
struct Eac
{
  std::string entityId;
  Material material;
};

/// Proof of authentication: E_new's evidence that the controller is genuine.
struct Poa
{
  Name controllerId;
  Bytes evidence;
};

/// Proof of membership: the controller's evidence that E_new is approved.
struct Pom
{
  std::string entityId;
  Bytes evidence;
};

/// Proof of naming: the assigned names plus the membership evidence.
struct Pop
{
  std::vector<Name> names;
  std::string entityId;
  Bytes evidence;
};

/// Issuance parameters for the certificate procedure.
struct CertContext
{
  Name caPrefix;
  Material params;
};

/// An issued certificate together with its private key.
struct Credential
{
  Certificate cert;
  crypto::AsymKeyPair key;
};

/// The trust anchor plus the validation mode E_new starts out in.
struct TrustBundle
{
  SchemaMode mode = SchemaMode::Implicit;
  std::optional<Certificate> anchor;
  std::string schemaText; // only meaningful in explicit mode

  TrustSchema
  schema() const
  {
    return mode == SchemaMode::Explicit ? parseSchema(schemaText) : TrustSchema::implicit();
  }
};

inline Bytes
encodeTrustBundle(const TrustBundle& b)
{
  if (!b.anchor)
    throw MalformedPacket("trust bundle has no anchor");
  Writer w;
  w.u8(b.mode == SchemaMode::Explicit ? 1 : 0);
  w.var(encode(b.anchor->data()));
  if (b.mode == SchemaMode::Explicit)
    w.str(b.schemaText);
  return w.take();
}

inline TrustBundle
decodeTrustBundle(BytesView wire)
{
  Reader r(wire);
  TrustBundle b;
  uint8_t mode = r.u8();
  if (mode > 1)
    throw MalformedPacket("bad trust bundle mode");
  b.mode = mode == 1 ? SchemaMode::Explicit : SchemaMode::Implicit;
  b.anchor = Certificate::fromData(decodeData(r.var()));
  if (b.mode == SchemaMode::Explicit)
    b.schemaText = r.str();
  r.expectEnd();
  return b;
}

/** One protocol's realization of the five procedures. Implementations run
 *  the actual message exchanges; the executor wires their inputs and outputs
 *  together and enforces the dependency order.
 */
class ProcedureSet
{
public:
  virtual ~ProcedureSet() = default;

  virtual Poa
  contAuth(const Cac& cac) = 0;

  virtual Pom
  enewAuth(const Eac& eac) = 0;

  virtual TrustBundle
  enewTrust(const Poa& poa) = 0;

  virtual Pop
  enewNaming(const Pom& pom, const NameConvention& convention) = 0;

  virtual std::vector<Credential>
  enewCert(const Pop& pop, const CertContext& ctx, const TrustBundle& trust) = 0;
};

struct SessionLogEntry
{
  Procedure procedure;
  bool ok = false;
  std::string error; // stable error code when !ok
};

/** Slot state for one entity's bootstrap. Inputs (cac, eac, certContext,
 *  convention) are provided by the protocol driver as they materialize;
 *  procedure outputs are write-once.
 */
class BootstrapSession
{
public:
  void
  provideCac(Cac cac)
  {
    fill(m_cac, std::move(cac), "cac");
  }

  void
  provideEac(Eac eac)
  {
    fill(m_eac, std::move(eac), "eac");
  }

  void
  provideCertContext(CertContext ctx)
  {
    fill(m_certContext, std::move(ctx), "certContext");
  }

  void
  setNameConvention(NameConvention conv)
  {
    fill(m_convention, std::move(conv), "convention");
  }

  const std::optional<Cac>&
  cac() const
  {
    return m_cac;
  }

  const std::optional<Eac>&
  eac() const
  {
    return m_eac;
  }

  const std::optional<Poa>&
  poa() const
  {
    return m_poa;
  }

  const std::optional<Pom>&
  pom() const
  {
    return m_pom;
  }

  const std::optional<TrustBundle>&
  trust() const
  {
    return m_trust;
  }

  const std::optional<Pop>&
  pop() const
  {
    return m_pop;
  }

  const std::optional<CertContext>&
  certContext() const
  {
    return m_certContext;
  }

  const std::optional<NameConvention>&
  convention() const
  {
    return m_convention;
  }

  const std::vector<Credential>&
  credentials() const
  {
    return m_credentials;
  }

  bool
  completed() const
  {
    return m_completed;
  }

  /** Mark the session as intentionally running entity procedures before the
   *  controller side. This is advisory metadata for tooling; the dependency
   *  rules already admit such interleavings (naming still precedes issuance),
   *  so execution is unchanged. Only a fresh session can be marked.
   */
  void
  markDecoupled()
  {
    if (!m_executed.empty())
      throw ProtocolOrder("cannot decouple a session after procedures have run");
    m_decoupled = true;
  }

  bool
  decoupled() const
  {
    return m_decoupled;
  }

  const std::vector<Procedure>&
  executedOrder() const
  {
    return m_executed;
  }

  const std::vector<SessionLogEntry>&
  log() const
  {
    return m_log;
  }

  friend void
  runProcedure(BootstrapSession& s, ProcedureSet& set, Procedure p);

private:
  template<typename T>
  void
  fill(std::optional<T>& slot, T value, const char* name)
  {
    if (slot)
      throw SlotAlreadyFilled(std::string("slot '") + name + "' is already filled");
    slot = std::move(value);
  }

  std::optional<Cac> m_cac;
  std::optional<Eac> m_eac;
  std::optional<Poa> m_poa;
  std::optional<Pom> m_pom;
  std::optional<TrustBundle> m_trust;
  std::optional<Pop> m_pop;
  std::optional<CertContext> m_certContext;
  std::optional<NameConvention> m_convention;
  std::vector<Credential> m_credentials;
  bool m_completed = false;
  bool m_decoupled = false;
  std::vector<Procedure> m_executed;
  std::vector<SessionLogEntry> m_log;
};

/** Run one procedure against the session's slots.
 *
 *  Throws DependencyUnmet when a required input slot is empty (this is what
 *  makes invalid orderings fail), SlotAlreadyFilled on repeat execution, and
 *  passes through protocol errors after logging them. After EnewCert every
 *  issued credential is revalidated against the installed trust bundle, so
 *  a protocol cannot hand back certificates the schema would reject.
 */
inline void
runProcedure(BootstrapSession& s, ProcedureSet& set, Procedure p)
{
  auto need = [](const auto& slot, const char* name) {
    if (!slot)
      throw DependencyUnmet(name);
  };
  auto fresh = [](const auto& slot, const char* name) {
    if (!slot)
      return;
    throw SlotAlreadyFilled(std::string("procedure output '") + name + "' is already filled");
  };

  try {
    switch (p) {
      case Procedure::ContAuth:
        fresh(s.m_poa, "poa");
        need(s.m_cac, "cac");
        s.m_poa = set.contAuth(*s.m_cac);
        break;
      case Procedure::EnewAuth:
        fresh(s.m_pom, "pom");
        need(s.m_eac, "eac");
        s.m_pom = set.enewAuth(*s.m_eac);
        break;
      case Procedure::EnewTrust:
        fresh(s.m_trust, "trust");
        need(s.m_poa, "poa");
        s.m_trust = set.enewTrust(*s.m_poa);
        break;
      case Procedure::EnewNaming:
        fresh(s.m_pop, "pop");
        need(s.m_pom, "pom");
        need(s.m_convention, "convention");
        s.m_pop = set.enewNaming(*s.m_pom, *s.m_convention);
        break;
      case Procedure::EnewCert: {
        if (s.m_completed)
          throw SlotAlreadyFilled("session is already completed");
        need(s.m_pop, "pop");
        need(s.m_certContext, "certContext");
        need(s.m_trust, "trust");
        std::vector<Credential> creds = set.enewCert(*s.m_pop, *s.m_certContext, *s.m_trust);
        if (creds.empty())
          throw ChainInvalid("no credential issued");
        TrustSchema schema = s.m_trust->schema();
        for (const auto& c : creds) {
          if (!equal(c.cert.publicKey(), BytesView(c.key.pub)))
            throw ChainInvalid("issued certificate does not carry the session key");
          ValidationReport rep = validateChain(schema, *s.m_trust->anchor, {c.cert.data()});
          if (!rep.accepted)
            throw ChainInvalid("issued certificate failed revalidation: " + rep.reason);
        }
        s.m_credentials = std::move(creds);
        s.m_completed = true;
        break;
      }
    }
  }
  catch (const Error& e) {
    s.m_log.push_back({p, false, e.code()});
    throw;
  }
  s.m_log.push_back({p, true, {}});
  s.m_executed.push_back(p);
}

/// All execution orders the dependency arrows admit; there are exactly six.
inline std::vector<std::vector<Procedure>>
validOrderings()
{
  std::vector<Procedure> perm(kProcedures.begin(), kProcedures.end());
  std::sort(perm.begin(), perm.end());
  std::vector<std::vector<Procedure>> out;
  do {
    auto pos = [&perm](Procedure p) {
      return std::find(perm.begin(), perm.end(), p) - perm.begin();
    };
    if (pos(Procedure::ContAuth) < pos(Procedure::EnewTrust) &&
        pos(Procedure::EnewAuth) < pos(Procedure::EnewNaming) &&
        pos(Procedure::EnewTrust) < pos(Procedure::EnewCert) &&
        pos(Procedure::EnewNaming) < pos(Procedure::EnewCert))
      out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

inline bool
isValidOrdering(const std::vector<Procedure>& order)
{
  static const std::vector<std::vector<Procedure>> valid = validOrderings();
  return std::find(valid.begin(), valid.end(), order) != valid.end();
}

} // namespace teb
