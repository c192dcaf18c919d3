#pragma once

#include "packet.hpp"

#include <json.hpp>

#include <deque>
#include <functional>
#include <map>
#include <set>

namespace teb {

/// Out-of-band side channels available to bootstrapping protocols.
enum class OobChannel {
  Qr,        // scanning a code off the device or its packaging
  Email,     // a message to the entity owner's mailbox
  Vibration, // short-range vibration pattern, needs physical proximity
  Console,   // operator console attached to the entity
};

inline const char*
channelName(OobChannel c)
{
  switch (c) {
    case OobChannel::Qr:
      return "qr";
    case OobChannel::Email:
      return "email";
    case OobChannel::Vibration:
      return "vibration";
    case OobChannel::Console:
      return "console";
  }
  return "?";
}

struct TranscriptEvent
{
  uint64_t step = 0;
  std::string channel; // interest | data | broadcast | timeout | oob names | note
  std::string from;
  std::string to;
  std::string summary;
  size_t bytes = 0;
};

/// Append-only event log; a fixed seed must reproduce it byte for byte.
class Transcript
{
public:
  void
  add(TranscriptEvent ev)
  {
    m_events.push_back(std::move(ev));
  }

  const std::vector<TranscriptEvent>&
  events() const
  {
    return m_events;
  }

  size_t
  countIf(const std::function<bool(const TranscriptEvent&)>& pred) const
  {
    size_t n = 0;
    for (const auto& ev : m_events)
      if (pred(ev))
        ++n;
    return n;
  }

  std::string
  toJsonl() const
  {
    std::string out;
    for (const auto& ev : m_events) {
      nlohmann::ordered_json j;
      j["step"] = ev.step;
      j["channel"] = ev.channel;
      j["from"] = ev.from;
      j["to"] = ev.to;
      j["summary"] = ev.summary;
      j["bytes"] = ev.bytes;
      out += j.dump();
      out += "\n";
    }
    return out;
  }

private:
  std::vector<TranscriptEvent> m_events;
};

using InterestHandler = std::function<std::optional<Data>(const Interest&)>;

/** Single-process network simulator with logical time.
 *
 *  Interests resolve synchronously: content store first (exact name match),
 *  then the longest registered prefix's handlers. An unsatisfied Interest
 *  costs the timeout. Out-of-band sends deposit into per-channel mailboxes;
 *  vibration additionally requires declared proximity. Everything that moves
 *  lands in the transcript.
 */
class Network
{
public:
  static constexpr uint64_t kTimeoutSteps = 16;
  static constexpr size_t kContentStoreCapacity = 64;

  void
  addEntity(const std::string& id, bool listensBroadcast = false)
  {
    if (m_entities.count(id))
      throw NoRoute("entity '" + id + "' already exists");
    m_entities.emplace(id, Entity{listensBroadcast, {}});
    m_order.push_back(id);
  }

  bool
  hasEntity(const std::string& id) const
  {
    return m_entities.count(id) > 0;
  }

  /// Handlers stack; the earliest attached handler gets the Interest first.
  void
  addHandler(const std::string& id, InterestHandler handler)
  {
    entity(id).handlers.push_back(std::move(handler));
  }

  void
  registerPrefix(const std::string& id, const Name& prefix)
  {
    entity(id);
    for (const auto& e : m_fib)
      if (e.owner == id && e.prefix == prefix)
        return;
    m_fib.push_back({prefix, id, m_fib.size()});
  }

  std::optional<Data>
  expressInterest(const std::string& from, const Interest& interest,
                  const std::optional<Name>& forwardingHint = {})
  {
    entity(from);
    ++m_now;
    size_t wireBytes = encode(interest).size();
    const Name& routeOn = forwardingHint ? *forwardingHint : interest.name;

    const FibEntry* route = lookupRoute(routeOn);
    std::string to = route ? route->owner : "?";
    m_transcript.add({m_now, "interest", from, to, interest.name.toUri(), wireBytes});

    for (const auto& [name, data] : m_cs)
      if (name == interest.name) {
        m_transcript.add({m_now, "data", "cs", from, data.name.toUri(), encode(data).size()});
        return data;
      }

    if (route != nullptr && m_inflight.insert(interest.name).second) {
      std::optional<Data> got;
      try {
        got = dispatch(route->owner, interest);
      }
      catch (...) {
        m_inflight.erase(interest.name);
        throw;
      }
      m_inflight.erase(interest.name);
      if (got)
        return deliver(route->owner, from, std::move(*got));
    }

    m_now += kTimeoutSteps;
    m_transcript.add({m_now, "timeout", "net", from, interest.name.toUri(), 0});
    return std::nullopt;
  }

  /// First listener (in attach order) whose handler answers wins.
  std::optional<Data>
  broadcast(const std::string& from, const Interest& interest)
  {
    entity(from);
    ++m_now;
    m_transcript.add({m_now, "broadcast", from, "*", interest.name.toUri(),
                      encode(interest).size()});
    for (const auto& id : m_order) {
      if (id == from || !m_entities.at(id).listensBroadcast)
        continue;
      std::optional<Data> got = dispatch(id, interest);
      if (got)
        return deliver(id, from, std::move(*got));
    }
    m_now += kTimeoutSteps;
    m_transcript.add({m_now, "timeout", "net", from, interest.name.toUri(), 0});
    return std::nullopt;
  }

  void
  oobSend(OobChannel channel, const std::string& from, const std::string& to, Bytes payload,
          const std::string& summary)
  {
    entity(from);
    entity(to);
    if (channel == OobChannel::Vibration && !inProximity(from, to))
      throw ProximityViolation("'" + from + "' and '" + to + "' are not in proximity");
    ++m_now;
    m_transcript.add({m_now, channelName(channel), from, to, summary, payload.size()});
    m_mail[{to, channel}].push_back({from, std::move(payload)});
  }

  std::pair<std::string, Bytes>
  oobRecv(OobChannel channel, const std::string& to)
  {
    auto it = m_mail.find({to, channel});
    if (it == m_mail.end() || it->second.empty())
      throw EmptyMailbox("no " + std::string(channelName(channel)) + " message for '" + to +
                         "'");
    auto msg = std::move(it->second.front());
    it->second.pop_front();
    return msg;
  }

  void
  setProximity(const std::string& a, const std::string& b, bool near)
  {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (near)
      m_proximity.insert(key);
    else
      m_proximity.erase(key);
  }

  bool
  inProximity(const std::string& a, const std::string& b) const
  {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    return m_proximity.count(key) > 0;
  }

  /// Mutates Data in flight, for fault injection. Applies to every delivery.
  void
  setDataTamper(std::function<void(Data&)> fn)
  {
    m_tamper = std::move(fn);
  }

  void
  note(const std::string& from, const std::string& text)
  {
    m_transcript.add({m_now, "note", from, {}, text, 0});
  }

  uint64_t
  now() const
  {
    return m_now;
  }

  const Transcript&
  transcript() const
  {
    return m_transcript;
  }

private:
  struct Entity
  {
    bool listensBroadcast = false;
    std::vector<InterestHandler> handlers;
  };

  struct FibEntry
  {
    Name prefix;
    std::string owner;
    size_t order;
  };

  Entity&
  entity(const std::string& id)
  {
    auto it = m_entities.find(id);
    if (it == m_entities.end())
      throw NoRoute("unknown entity '" + id + "'");
    return it->second;
  }

  const FibEntry*
  lookupRoute(const Name& name) const
  {
    const FibEntry* best = nullptr;
    for (const auto& e : m_fib) {
      if (!e.prefix.isPrefixOf(name))
        continue;
      if (best == nullptr || e.prefix.size() > best->prefix.size() ||
          (e.prefix.size() == best->prefix.size() && e.order < best->order))
        best = &e;
    }
    return best;
  }

  std::optional<Data>
  dispatch(const std::string& id, const Interest& interest)
  {
    for (const auto& h : m_entities.at(id).handlers) {
      std::optional<Data> got = h(interest);
      if (got)
        return got;
    }
    return std::nullopt;
  }

  Data
  deliver(const std::string& producer, const std::string& consumer, Data data)
  {
    if (m_tamper)
      m_tamper(data);
    m_cs.push_back({data.name, data});
    if (m_cs.size() > kContentStoreCapacity)
      m_cs.pop_front();
    m_transcript.add({m_now, "data", producer, consumer, data.name.toUri(),
                      encode(data).size()});
    return data;
  }

  uint64_t m_now = 0;
  std::vector<std::string> m_order;
  std::map<std::string, Entity> m_entities;
  std::vector<FibEntry> m_fib;
  std::deque<std::pair<Name, Data>> m_cs;
  std::set<Name> m_inflight;
  std::map<std::pair<std::string, OobChannel>, std::deque<std::pair<std::string, Bytes>>> m_mail;
  std::set<std::pair<std::string, std::string>> m_proximity;
  std::function<void(Data&)> m_tamper;
  Transcript m_transcript;
};

} // namespace teb
