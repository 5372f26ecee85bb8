#ifndef TROJAN_CLI_HPP_
#define TROJAN_CLI_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trojan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

// Entry point behind the trojan_bench binary. Machine-readable JSON goes to
// `out`, progress and diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

// Exclusive per-directory lock held for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

}  // namespace trojan

#endif  // TROJAN_CLI_HPP_
