#ifndef TROJAN_ERRORS_HPP_
#define TROJAN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace trojan {

// Invalid user-supplied configuration. `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// A caller broke an operation's precondition (stepping a finished episode,
// shape mismatch, out-of-range patch, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace trojan

#endif  // TROJAN_ERRORS_HPP_
