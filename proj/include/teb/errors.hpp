#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace teb {

/** Base of all library errors. code() is stable and machine-checkable;
 *  scenario reports and tests match on it rather than on what() text.
 */
class Error : public std::runtime_error
{
public:
  Error(std::string code, const std::string& what)
    : std::runtime_error(code + ": " + what)
    , m_code(std::move(code))
  {
  }

  const std::string&
  code() const noexcept
  {
    return m_code;
  }

private:
  std::string m_code;
};

#define TEB_ERROR(NAME)                                                        \
  class NAME : public Error                                                    \
  {                                                                            \
  public:                                                                      \
    explicit NAME(const std::string& what)                                     \
      : Error(#NAME, what)                                                     \
    {                                                                          \
    }                                                                          \
  }

TEB_ERROR(MalformedName);
TEB_ERROR(MalformedPacket);
TEB_ERROR(CyclicRuleRef);
TEB_ERROR(UnresolvedRuleRef);
TEB_ERROR(MissingAnchor);
TEB_ERROR(IdentifierMismatch);
TEB_ERROR(InvalidPoint);
TEB_ERROR(AuthFailure);
TEB_ERROR(ProtocolOrder);
TEB_ERROR(SlotAlreadyFilled);
TEB_ERROR(NoRoute);
TEB_ERROR(EmptyMailbox);
TEB_ERROR(ProximityViolation);
TEB_ERROR(PinMismatch);
TEB_ERROR(EmailRejected);
TEB_ERROR(PakeConfirmFailure);
TEB_ERROR(BundleInvalid);
TEB_ERROR(NoKek);
TEB_ERROR(NoSigningIdentity);
TEB_ERROR(NotAuthorized);
TEB_ERROR(ChainInvalid);
TEB_ERROR(StaleVersion);
TEB_ERROR(FetchTimeout);
TEB_ERROR(ScenarioInvalid);

#undef TEB_ERROR

/// Schema source error with position info (1-based line, 0 when unknown).
class ParseError : public Error
{
public:
  explicit ParseError(const std::string& what, int line = 0, int column = 0)
    : Error("ParseError", line > 0 ? "line " + std::to_string(line) + ": " + what : what)
    , m_line(line)
    , m_column(column)
  {
  }

  int
  line() const noexcept
  {
    return m_line;
  }

  int
  column() const noexcept
  {
    return m_column;
  }

private:
  int m_line;
  int m_column;
};

/// A procedure input slot required by the dataflow contract is not filled yet.
class DependencyUnmet : public Error
{
public:
  explicit DependencyUnmet(const std::string& slot)
    : Error("DependencyUnmet", "required slot '" + slot + "' is not filled")
    , m_slot(slot)
  {
  }

  const std::string&
  slot() const noexcept
  {
    return m_slot;
  }

private:
  std::string m_slot;
};

} // namespace teb
