#pragma once

#include "protocols.hpp"
#include "schema_templates.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace teb {

using Json = nlohmann::ordered_json;

/** Declarative description of one simulated onboarding run.
 *
 *  Scenarios are loaded from JSON files. Every field that names a protocol,
 *  fault, or expectation is validated up front so a typo fails the load, not
 *  the run. One scenario drives one entity through one protocol (plus any
 *  follow-on actions), or exercises the validated-key cache when the
 *  protocol is "tib-cache".
 */
struct Scenario
{
  std::string name;
  std::string protocol; // a protocol id from the table, or "tib-cache"
  uint64_t seed = 1;
  Name domain;
  std::string controller;
  std::string device;
  NameConvention convention;
  SchemaMode schemaMode = SchemaMode::Implicit;
  std::string schemaText;

  // per-protocol device details
  std::string email;
  std::string serial;
  std::string password;
  std::string capability;
  std::vector<Name> extraNames;
  std::vector<std::string> capabilities;

  std::string fault; // empty runs the happy path

  struct Expect
  {
    std::string outcome; // completed | failed | cache
    std::string order;   // procedure codes when completed
    std::string error;   // stable error code when failed
    std::string at;      // procedure code the failure surfaces at
    std::vector<std::string> names;
    int64_t cold = -1; // certificate fetches, cache scenarios only
    int64_t warm = -1;
    int64_t disabled = -1;
  } expect;

  size_t cacheDepth = 0; // certificate chain length, "tib-cache" only
  std::vector<Json> post;
};

namespace detail {

inline const std::map<std::string, std::vector<std::string>>&
faultTable()
{
  static const std::map<std::string, std::vector<std::string>> table = {
    {"ssp", {"wrong_symkey"}},
    {"testbed-ndncert", {"wrong_pin", "unknown_email"}},
    {"ndnviber", {"no_proximity", "tamper_anchor"}},
    {"pion", {"wrong_password", "uncertified_authenticator"}},
    {"dct-bundle", {"tamper_bundle", "drop_private_keys", "rogue_chain"}},
  };
  return table;
}

inline std::string
joinLines(const Json& v)
{
  if (v.is_string())
    return v.get<std::string>();
  if (!v.is_array())
    throw ScenarioInvalid("schema text must be a string or an array of lines");
  std::string out;
  for (const auto& line : v)
    out += line.get<std::string>() + "\n";
  return out;
}

} // namespace detail

inline Scenario
parseScenario(const Json& j)
{
  if (!j.is_object())
    throw ScenarioInvalid("a scenario must be a JSON object");
  try {
    Scenario sc;
    sc.name = j.at("name").get<std::string>();
    sc.protocol = j.at("protocol").get<std::string>();
    sc.seed = j.value("seed", uint64_t{1});
    sc.domain = Name::parse(j.at("domain").get<std::string>());
    sc.controller = j.value("controller", "controller");

    bool cacheRun = sc.protocol == "tib-cache";
    if (!cacheRun)
      parseProtocol(sc.protocol); // throws on an unknown id

    if (j.contains("convention")) {
      const Json& c = j.at("convention");
      UniquenessSuffix suffix = UniquenessSuffix::None;
      std::string s = c.value("suffix", "none");
      if (s == "key-digest")
        suffix = UniquenessSuffix::KeyDigest7Hex;
      else if (s != "none")
        throw ScenarioInvalid("unknown uniqueness suffix '" + s + "'");
      sc.convention = NameConvention::parse(c.at("source").get<std::string>(),
                                            c.at("target").get<std::string>(), suffix);
    }
    else if (!cacheRun) {
      throw ScenarioInvalid("scenario '" + sc.name + "' needs a naming convention");
    }

    if (j.contains("schema")) {
      const Json& s = j.at("schema");
      std::string mode = s.value("mode", "implicit");
      if (mode == "explicit") {
        sc.schemaMode = SchemaMode::Explicit;
        if (s.contains("text"))
          sc.schemaText = detail::joinLines(s.at("text"));
        else if (s.value("template", "") == "minimal-trust-zone")
          sc.schemaText = toText(minimalTrustZone(sc.domain.size() ? sc.domain[0] : "zone"));
        else
          throw ScenarioInvalid("an explicit schema needs text or a known template");
        parseSchema(sc.schemaText); // reject malformed text at load time
      }
      else if (mode != "implicit") {
        throw ScenarioInvalid("unknown schema mode '" + mode + "'");
      }
    }

    if (j.contains("device")) {
      const Json& d = j.at("device");
      sc.device = d.at("id").get<std::string>();
      sc.email = d.value("email", "");
      sc.serial = d.value("serial", "");
      sc.password = d.value("password", "");
      sc.capability = d.value("capability", "");
      for (const auto& n : d.value("extra_names", Json::array()))
        sc.extraNames.push_back(Name::parse(n.get<std::string>()));
      for (const auto& cap : d.value("capabilities", Json::array()))
        sc.capabilities.push_back(cap.get<std::string>());
    }
    else if (!cacheRun) {
      throw ScenarioInvalid("scenario '" + sc.name + "' needs a device");
    }

    sc.fault = j.value("fault", "");
    if (!sc.fault.empty()) {
      const auto& allowed = detail::faultTable().at(sc.protocol);
      if (std::find(allowed.begin(), allowed.end(), sc.fault) == allowed.end())
        throw ScenarioInvalid("protocol '" + sc.protocol + "' has no fault '" + sc.fault + "'");
    }

    const Json& e = j.at("expect");
    sc.expect.outcome = e.at("outcome").get<std::string>();
    if (sc.expect.outcome != "completed" && sc.expect.outcome != "failed" &&
        sc.expect.outcome != "cache")
      throw ScenarioInvalid("unknown expected outcome '" + sc.expect.outcome + "'");
    sc.expect.order = e.value("order", "");
    if (!sc.expect.order.empty() && !isValidOrdering(orderFromCodes(sc.expect.order)))
      throw ScenarioInvalid("expected order '" + sc.expect.order + "' is not admissible");
    sc.expect.error = e.value("error", "");
    sc.expect.at = e.value("at", "");
    for (const auto& n : e.value("names", Json::array()))
      sc.expect.names.push_back(n.get<std::string>());
    sc.expect.cold = e.value("cold", int64_t{-1});
    sc.expect.warm = e.value("warm", int64_t{-1});
    sc.expect.disabled = e.value("disabled", int64_t{-1});

    if (cacheRun) {
      sc.cacheDepth = j.at("cache").at("depth").get<size_t>();
      if (sc.cacheDepth < 2 || sc.cacheDepth > 16)
        throw ScenarioInvalid("cache depth must be between 2 and 16");
    }

    for (const auto& op : j.value("post", Json::array()))
      sc.post.push_back(op);

    // per-protocol required details
    if (sc.protocol == "testbed-ndncert" && sc.email.empty())
      throw ScenarioInvalid("testbed-ndncert needs device.email");
    if ((sc.protocol == "ndnviber" || sc.protocol == "pion") && sc.serial.empty())
      throw ScenarioInvalid("'" + sc.protocol + "' needs device.serial");
    if (sc.protocol == "pion" && sc.password.empty())
      throw ScenarioInvalid("pion needs device.password");
    if ((sc.protocol == "testbed-ndncert" || sc.protocol == "dct-bundle") &&
        sc.schemaMode != SchemaMode::Explicit)
      throw ScenarioInvalid("'" + sc.protocol + "' runs an explicit schema zone");

    return sc;
  }
  catch (const Json::exception& e) {
    throw ScenarioInvalid(std::string("scenario JSON: ") + e.what());
  }
  catch (const ScenarioInvalid&) {
    throw;
  }
  catch (const Error& e) {
    // a bad name, convention, or schema inside the description
    throw ScenarioInvalid(e.what());
  }
}

inline Scenario
parseScenarioText(const std::string& text)
{
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw ScenarioInvalid("scenario file is not valid JSON");
  return parseScenario(j);
}

inline Scenario
loadScenarioFile(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ScenarioInvalid("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parseScenarioText(buf.str());
}

struct SessionReport
{
  std::string entity;
  bool completed = false;
  std::string order;
  std::string error;
  std::string failedAt;
  std::vector<std::string> names;
  size_t credentials = 0;
};

struct ActionReport
{
  std::string op;
  bool ok = false;
  std::string detail;
};

/** Everything a scenario run produced. The realization objects and tibs stay
 *  alive here because their packet handlers remain registered with the
 *  network.
 */
struct ScenarioResult
{
  bool ok = false;
  std::vector<std::string> violations;
  std::vector<SessionReport> sessions;
  std::vector<ActionReport> actions;
  std::map<std::string, uint64_t> cache;
  std::unique_ptr<Tib> controllerTib;
  std::unique_ptr<Tib> deviceTib;
  std::shared_ptr<void> keepAlive;
};

namespace detail {

inline SessionReport
summarize(const std::string& entity, const BootstrapSession& s, const std::string& error)
{
  SessionReport rep;
  rep.entity = entity;
  rep.completed = s.completed();
  rep.order = orderString(s.executedOrder());
  rep.error = error;
  if (!error.empty() && !s.log().empty() && !s.log().back().ok)
    rep.failedAt = code(s.log().back().procedure);
  for (const auto& c : s.credentials())
    rep.names.push_back(c.cert.subject().toUri());
  rep.credentials = s.credentials().size();
  return rep;
}

inline void
checkExpectations(const Scenario& sc, const SessionReport& rep, std::vector<std::string>& out)
{
  const auto& e = sc.expect;
  if (e.outcome == "completed") {
    if (!rep.completed)
      out.push_back("expected completion, stopped at " + rep.failedAt + " with " + rep.error);
    if (!e.order.empty() && rep.order != e.order)
      out.push_back("expected order " + e.order + ", ran " + rep.order);
    if (!e.names.empty() && rep.names != e.names) {
      std::string got;
      for (const auto& n : rep.names)
        got += (got.empty() ? "" : " ") + n;
      out.push_back("assigned names differ: " + got);
    }
  }
  else if (e.outcome == "failed") {
    if (rep.completed)
      out.push_back("expected a failure, but the session completed");
    if (!e.error.empty() && rep.error != e.error)
      out.push_back("expected error " + e.error + ", got " + rep.error);
    if (!e.at.empty() && rep.failedAt != e.at)
      out.push_back("expected the failure at " + e.at + ", surfaced at " + rep.failedAt);
  }
}

/// Count certificate fetches (KEY names that are not KDK packets) since `begin`.
inline size_t
certFetches(const Network& net, size_t begin)
{
  size_t n = 0;
  const auto& evs = net.transcript().events();
  for (size_t i = begin; i < evs.size(); ++i) {
    if (evs[i].channel != "interest")
      continue;
    Name name = Name::parse(evs[i].summary);
    if (name.size() >= 4 && name[name.size() - 4] == "KEY" && !name.contains("ENCRYPTED-BY"))
      ++n;
  }
  return n;
}

inline std::string
deepZoneText(const std::string& zone, size_t depth)
{
  std::string out = "#KEY: \"KEY\"/_/_/_\n#root: \"" + zone + "\"/#KEY\n";
  std::string path = "\"" + zone + "\"";
  std::string prev = "#root";
  for (size_t i = 1; i < depth; ++i) {
    path += "/a" + std::to_string(i);
    out += "#l" + std::to_string(i) + ": " + path + "/#KEY <= " + prev + "\n";
    prev = "#l" + std::to_string(i);
  }
  out += "#leafData: " + path + "/... <= " + prev + "\n";
  out += "#leafCk: " + path + "/\"CK\"/_ <= " + prev + "\n";
  out += "#kek: \"" + zone + "\"/\"NAC\"/\"KEK\"/_ <= #root\n";
  out += "#kdk: \"" + zone + "\"/\"NAC\"/\"KDK\"/_/\"ENCRYPTED-BY\"/... <= #root\n";
  return out;
}

/** Build a zone whose producer sits `depth - 1` identities below the anchor,
 *  then measure certificate fetches per consume: cold, cache-warm, and with
 *  the cache disabled.
 */
inline ScenarioResult
runCacheScenario(const Scenario& sc, Network& net)
{
  ScenarioResult r;
  size_t levels = sc.cacheDepth - 1;
  std::string zone = sc.domain.size() ? sc.domain[0] : "zone";
  crypto::Drbg rng(sc.seed);

  crypto::AsymKeyPair rootKey = crypto::generateKeyPair(rng);
  Certificate anchor = makeSelfSigned(Name{zone}, rootKey);
  TrustBundle bundle{SchemaMode::Explicit, anchor, deepZoneText(zone, sc.cacheDepth)};

  Name subject{zone};
  Certificate issuerCert = anchor;
  crypto::AsymKeyPair issuerKey = rootKey;
  std::vector<Data> intermediates; // served by the producer for chain walks
  for (size_t i = 1; i <= levels; ++i) {
    subject = subject.append("a" + std::to_string(i));
    crypto::AsymKeyPair key = crypto::generateKeyPair(rng);
    Certificate cert = issueCertificate(subject, key.pub, issuerCert, issuerKey);
    if (i < levels)
      intermediates.push_back(cert.data());
    issuerCert = cert;
    issuerKey = key;
  }
  // installDirect wants the chain from the credential's signer toward the anchor
  std::reverse(intermediates.begin(), intermediates.end());

  crypto::AsymKeyPair monKey = crypto::generateKeyPair(rng);
  Certificate mon = issueCertificate(Name{zone, "monitor"}, monKey.pub, anchor, rootKey);

  r.controllerTib = Tib::installDirect(net, sc.controller, {anchor, rootKey}, bundle, {},
                                       crypto::Drbg(sc.seed + 1));
  auto producer = Tib::installDirect(net, "producer", {issuerCert, issuerKey}, bundle,
                                     intermediates, crypto::Drbg(sc.seed + 2));
  r.deviceTib = Tib::installDirect(net, "consumer", {mon, monKey}, bundle, {},
                                   crypto::Drbg(sc.seed + 3));

  r.controllerTib->nacSetup(Name{zone});
  r.controllerTib->grantAccess(Name{zone}, mon);
  Name content = subject.append("reading").append("v=1");
  producer->produce(content, toBytes("measurement"));

  auto measure = [&](const char* label) {
    size_t begin = net.transcript().events().size();
    r.deviceTib->consume(content);
    uint64_t fetched = certFetches(net, begin);
    r.cache[label] = fetched;
    r.actions.push_back({std::string("consume_") + label, true,
                         std::to_string(fetched) + " certificate fetches"});
    return fetched;
  };

  uint64_t cold = measure("cold");
  uint64_t warm = measure("warm");
  r.deviceTib->setCacheEnabled(false);
  uint64_t disabled = measure("disabled");
  r.deviceTib->setCacheEnabled(true);

  if (sc.expect.cold >= 0 && cold != static_cast<uint64_t>(sc.expect.cold))
    r.violations.push_back("cold consume fetched " + std::to_string(cold) + " certificates");
  if (sc.expect.warm >= 0 && warm != static_cast<uint64_t>(sc.expect.warm))
    r.violations.push_back("warm consume fetched " + std::to_string(warm) + " certificates");
  if (sc.expect.disabled >= 0 && disabled != static_cast<uint64_t>(sc.expect.disabled))
    r.violations.push_back("uncached consume fetched " + std::to_string(disabled) +
                           " certificates");

  r.keepAlive = std::shared_ptr<void>(producer.release(), [](void* p) {
    delete static_cast<Tib*>(p);
  });
  r.ok = r.violations.empty();
  return r;
}

inline const Certificate&
firstCert(Tib& tib)
{
  return tib.keyChain().credentials().front().cert;
}

inline void
runPostOps(const Scenario& sc, ScenarioResult& r)
{
  auto tibFor = [&](const std::string& who) -> Tib& {
    if (who == "controller" || who == sc.controller) {
      if (!r.controllerTib)
        throw ScenarioInvalid("this scenario has no controller tib");
      return *r.controllerTib;
    }
    if (who == "device" || who == sc.device) {
      if (!r.deviceTib)
        throw ScenarioInvalid("the device has no tib; did the session complete?");
      return *r.deviceTib;
    }
    throw ScenarioInvalid("unknown actor '" + who + "'");
  };

  for (const Json& op : sc.post) {
    std::string kind = op.value("op", "");
    ActionReport act{kind, false, {}};
    std::string expectError = op.value("expect_error", "");
    try {
      if (kind == "nac_setup") {
        std::string prefix = op.at("prefix").get<std::string>();
        tibFor(op.value("by", "controller")).nacSetup(Name::parse(prefix));
        act.detail = "managing " + prefix;
      }
      else if (kind == "grant") {
        Tib& by = tibFor(op.value("by", "controller"));
        std::string to = op.at("to").get<std::string>();
        by.grantAccess(Name::parse(op.at("prefix").get<std::string>()), firstCert(tibFor(to)));
        act.detail = "granted to " + to;
      }
      else if (kind == "produce") {
        auto [app, ck] = tibFor(op.at("by").get<std::string>())
                           .produce(Name::parse(op.at("name").get<std::string>()),
                                    toBytes(op.value("content", "")));
        act.detail = "published " + app.name.toUri();
      }
      else if (kind == "consume") {
        auto [name, plain] =
          tibFor(op.at("by").get<std::string>())
            .consume(Name::parse(op.at("name").get<std::string>()));
        act.detail = toString(plain);
        if (op.contains("expect_content") &&
            op.at("expect_content").get<std::string>() != toString(plain))
          throw ScenarioInvalid("decrypted content differs from expect_content");
      }
      else if (kind == "publish_schema") {
        Tib& by = tibFor(op.value("by", "controller"));
        TrustSchema schema =
          op.contains("text")
            ? parseSchema(joinLines(op.at("text")))
            : minimalTrustZone(sc.domain.size() ? sc.domain[0] : "zone");
        uint64_t version = op.at("version").get<uint64_t>();
        by.publishSchema(schema, version);
        act.detail = "v" + std::to_string(version);
      }
      else if (kind == "fetch_schema") {
        uint64_t version = tibFor(op.at("by").get<std::string>()).fetchSchema();
        act.detail = "adopted v" + std::to_string(version);
      }
      else {
        throw ScenarioInvalid("unknown post op '" + kind + "'");
      }
      act.ok = expectError.empty();
      if (!act.ok)
        act.detail = "expected " + expectError + ", but the action succeeded";
    }
    catch (const Error& e) {
      if (!expectError.empty() && e.code() == expectError) {
        act.ok = true;
        act.detail = std::string("rejected as expected: ") + e.code();
      }
      else {
        act.ok = false;
        act.detail = std::string(e.code()) + ": " + e.what();
      }
    }
    if (!act.ok)
      r.violations.push_back("post op '" + kind + "' failed: " + act.detail);
    r.actions.push_back(std::move(act));
  }
}

} // namespace detail

inline ScenarioResult
runScenario(const Scenario& sc, Network& net)
{
  if (sc.protocol == "tib-cache") {
    ScenarioResult r = detail::runCacheScenario(sc, net);
    detail::runPostOps(sc, r);
    r.ok = r.violations.empty();
    return r;
  }

  ScenarioResult r;
  const BootstrapSession* session = nullptr;
  std::string error;

  switch (parseProtocol(sc.protocol)) {
    case ProtocolKind::Ssp: {
      SspOptions opt;
      if (!sc.capability.empty())
        opt.capability = sc.capability;
      opt.extraNames = sc.extraNames;
      opt.corruptSymkey = sc.fault == "wrong_symkey";
      auto run = std::make_shared<SspRun>(
        runSsp(net, sc.domain, sc.controller, sc.device, sc.convention, opt, sc.seed));
      session = &run->session;
      error = run->error;
      r.controllerTib = std::move(run->controllerTib);
      r.keepAlive = run;
      break;
    }
    case ProtocolKind::TestbedNdncert: {
      TestbedOptions opt;
      if (sc.fault == "wrong_pin")
        opt.wrongPin = "never-a-pin";
      opt.unknownEmail = sc.fault == "unknown_email";
      auto run = std::make_shared<TestbedRun>(runTestbed(net, sc.domain, sc.controller,
                                                         sc.device, sc.email, sc.convention,
                                                         sc.schemaText, opt, sc.seed));
      session = &run->session;
      error = run->error;
      r.controllerTib = std::move(run->controllerTib);
      r.keepAlive = run;
      break;
    }
    case ProtocolKind::NdnViber: {
      ViberOptions opt;
      opt.skipProximity = sc.fault == "no_proximity";
      opt.tamperAnchor = sc.fault == "tamper_anchor";
      auto run = std::make_shared<ViberRun>(runNdnViber(net, sc.domain, sc.controller,
                                                        sc.device, sc.serial, sc.convention,
                                                        opt, sc.seed));
      session = &run->session;
      error = run->error;
      r.controllerTib = std::move(run->controllerTib);
      r.keepAlive = run;
      break;
    }
    case ProtocolKind::Pion: {
      PionOptions opt;
      if (sc.fault == "wrong_password")
        opt.devicePassword = sc.password + "-typo";
      opt.uncertifiedAuthenticator = sc.fault == "uncertified_authenticator";
      auto run = std::make_shared<PionRun>(runPion(net, sc.domain, sc.controller,
                                                   sc.controller + "-authenticator", sc.device,
                                                   sc.serial, sc.convention, sc.password, opt,
                                                   sc.seed));
      session = &run->session;
      error = run->error;
      r.controllerTib = std::move(run->controllerTib);
      r.keepAlive = run;
      break;
    }
    case ProtocolKind::DctBundle: {
      DctOptions opt;
      opt.capabilities = sc.capabilities;
      opt.tamperBundle = sc.fault == "tamper_bundle";
      opt.dropPrivateKeys = sc.fault == "drop_private_keys";
      opt.rogueChain = sc.fault == "rogue_chain";
      auto run = std::make_shared<DctRun>(runDctBundle(net, sc.domain, sc.controller,
                                                       sc.device, sc.convention, sc.schemaText,
                                                       opt, sc.seed));
      session = &run->session;
      error = run->error;
      r.controllerTib = std::move(run->controllerTib);
      r.keepAlive = run;
      break;
    }
  }

  SessionReport rep = detail::summarize(sc.device, *session, error);
  detail::checkExpectations(sc, rep, r.violations);
  r.sessions.push_back(rep);

  if (session->completed() && !sc.post.empty())
    r.deviceTib = Tib::fromSession(net, sc.device, *session, crypto::Drbg(sc.seed + 101));
  detail::runPostOps(sc, r);

  r.ok = r.violations.empty();
  return r;
}

inline Json
reportJson(const Scenario& sc, const ScenarioResult& r, const Network& net)
{
  Json sessions = Json::array();
  for (const auto& s : r.sessions) {
    sessions.push_back({{"entity", s.entity},
                        {"completed", s.completed},
                        {"order", s.order},
                        {"error", s.error},
                        {"failed_at", s.failedAt},
                        {"names", s.names},
                        {"credentials", s.credentials}});
  }
  Json actions = Json::array();
  for (const auto& a : r.actions)
    actions.push_back({{"op", a.op}, {"ok", a.ok}, {"detail", a.detail}});

  std::map<std::string, uint64_t> counts;
  for (const auto& ev : net.transcript().events())
    ++counts[ev.channel];
  Json countsJson = Json::object();
  for (const auto& [channel, n] : counts)
    countsJson[channel] = n;
  if (!r.cache.empty()) {
    Json cacheJson = Json::object();
    for (const auto& [k, v] : r.cache)
      cacheJson[k] = v;
    countsJson["cert_fetches"] = cacheJson;
  }

  return Json{{"scenario", sc.name},
              {"protocol", sc.protocol},
              {"seed", sc.seed},
              {"ok", r.ok},
              {"violations", r.violations},
              {"sessions", sessions},
              {"actions", actions},
              {"counts", countsJson},
              {"transcript_events", net.transcript().events().size()}};
}

} // namespace teb
