#ifndef TROJAN_CHECKPOINT_HPP_
#define TROJAN_CHECKPOINT_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "trojan/actor_critic.hpp"
#include "trojan/tensor.hpp"

namespace trojan {

// On-disk layout (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "TRJCKPT\0"
//   8       4     u32 format version (kCheckpointVersion)
//   12      8     u64 header length H
//   20      H     UTF-8 JSON header:
//                   {"architecture": {...}, "metadata": {...},
//                    "tensors": [{"name": s, "shape": [..]}, ...]}
//   20+H    P     float32 payloads, row-major, in "tensors" order
//   20+H+P  32    SHA-256 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetConfig architecture;
  ParamStore params;
  // Provenance: frames, seed, plan, poison spec, code version, base digest.
  nlohmann::json metadata = nlohmann::json::object();
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointDigestError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

Checkpoint make_checkpoint(const ActorCriticNet& net, nlohmann::json metadata);
ActorCriticNet network_from(const Checkpoint& checkpoint);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
// Throws one of the CheckpointError subclasses; never returns partial state.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes via a temporary file and rename.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Hex SHA-256 trailer of a serialized checkpoint (its identity).
std::string checkpoint_digest(const std::vector<std::uint8_t>& bytes);

std::string sha256_hex(const std::uint8_t* data, std::size_t size);

}  // namespace trojan

#endif  // TROJAN_CHECKPOINT_HPP_
