#pragma once

#include "../bootstrap.hpp"
#include "../simnet.hpp"

#include <array>

namespace teb {

/// Onboarding realizations shipped with the library.
enum class ProtocolKind {
  Ssp,            // pre-shared QR keys, broadcast sign-on, controller-generated device keys
  TestbedNdncert, // out-of-band trust bundle install, email PIN certification
  NdnViber,       // vibration-channel trigger, device-id certification
  Pion,           // PAKE over the regular channel, temporary then formal certificate
  DctBundle,      // operator-built identity bundle delivered over a console
};

/// Parse a comma-joined procedure code list such as "EA,CA,ET,EN,EC".
inline std::vector<Procedure>
orderFromCodes(std::string_view codes)
{
  std::vector<Procedure> out;
  size_t pos = 0;
  while (pos <= codes.size()) {
    size_t comma = codes.find(',', pos);
    if (comma == std::string_view::npos)
      comma = codes.size();
    auto p = procedureFromCode(codes.substr(pos, comma - pos));
    if (!p)
      throw ParseError("unknown procedure code in '" + std::string(codes) + "'");
    out.push_back(*p);
    pos = comma + 1;
  }
  return out;
}

/** Static facts about one realization: the material each authentication slot
 *  must carry and the procedure order its message flow naturally produces.
 */
struct ProtocolInfo
{
  ProtocolKind kind;
  std::string id;                       // stable identifier used by config files
  std::vector<std::string> cacMaterial; // keys required in the controller-auth slot
  std::vector<std::string> eacMaterial; // keys required in the entity-auth slot
  std::string preferredOrder;           // codes, e.g. "EA,CA,ET,EN,EC"
  bool multiName = false;               // one run may assign several names

  std::vector<Procedure>
  order() const
  {
    return orderFromCodes(preferredOrder);
  }
};

inline const std::array<ProtocolInfo, 5>&
protocolTable()
{
  static const std::array<ProtocolInfo, 5> table = {{
    {ProtocolKind::Ssp,
     "ssp",
     {"privkey", "pubkey", "symkey"},
     {"pubkey", "symkey"},
     "EA,CA,ET,EN,EC",
     true},
    {ProtocolKind::TestbedNdncert, "testbed-ndncert", {"bundle"}, {"email"}, "CA,ET,EA,EN,EC",
     false},
    {ProtocolKind::NdnViber, "ndnviber", {}, {"device_id"}, "CA,ET,EA,EN,EC", false},
    {ProtocolKind::Pion, "pion", {"password"}, {"password"}, "EA,CA,ET,EN,EC", false},
    {ProtocolKind::DctBundle, "dct-bundle", {}, {}, "CA,EA,ET,EN,EC", true},
  }};
  return table;
}

inline const ProtocolInfo&
protocolInfo(ProtocolKind kind)
{
  for (const auto& info : protocolTable())
    if (info.kind == kind)
      return info;
  throw ParseError("unknown protocol kind");
}

inline const char*
protocolName(ProtocolKind kind)
{
  return protocolInfo(kind).id.c_str();
}

inline ProtocolKind
parseProtocol(std::string_view id)
{
  for (const auto& info : protocolTable())
    if (info.id == id)
      return info.kind;
  throw ParseError("unknown protocol '" + std::string(id) + "'");
}

/// Fetch a required key from an authentication-material map.
inline const Bytes&
requireMaterial(const Material& m, const char* slot, const char* key)
{
  auto it = m.find(key);
  if (it == m.end())
    throw DependencyUnmet(std::string(slot) + "." + key);
  return it->second;
}

inline void
ensureEntity(Network& net, const std::string& id, bool listensBroadcast = false)
{
  if (!net.hasEntity(id))
    net.addEntity(id, listensBroadcast);
}

/// Draw a seed for an independent generator.
inline uint64_t
deriveSeed(crypto::Drbg& rng)
{
  uint64_t s = 0;
  for (uint8_t b : rng.bytes(8))
    s = (s << 8) | b;
  return s;
}

} // namespace teb
