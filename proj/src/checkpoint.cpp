#include "trojan/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "trojan/errors.hpp"

namespace trojan {
namespace {

constexpr char kMagic[8] = {'T', 'R', 'J', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kPreamble = 8 + 4 + 8;
constexpr std::size_t kDigestSize = 32;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(const std::vector<std::uint8_t>& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

std::vector<std::uint8_t> digest(const std::uint8_t* data, std::size_t size) {
  std::vector<std::uint8_t> out(kDigestSize);
  unsigned int len = 0;
  if (EVP_Digest(data, size, out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != kDigestSize) {
    throw CheckpointError("SHA-256 computation failed");
  }
  return out;
}

std::string to_hex(const std::uint8_t* data, std::size_t size) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < size; ++i) {
    s.push_back(kHex[data[i] >> 4]);
    s.push_back(kHex[data[i] & 0xF]);
  }
  return s;
}

}  // namespace

std::string sha256_hex(const std::uint8_t* data, std::size_t size) {
  const std::vector<std::uint8_t> d = digest(data, size);
  return to_hex(d.data(), d.size());
}

Checkpoint make_checkpoint(const ActorCriticNet& net, nlohmann::json metadata) {
  Checkpoint c;
  c.architecture = net.config();
  c.params = net.params();
  c.params.zero_grad();
  c.metadata = std::move(metadata);
  return c;
}

ActorCriticNet network_from(const Checkpoint& checkpoint) {
  try {
    return ActorCriticNet(checkpoint.architecture, checkpoint.params);
  } catch (const ContractViolation& e) {
    throw CheckpointFormatError(std::string("architecture mismatch: ") + e.what());
  }
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const Parameter& p : checkpoint.params.params()) {
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  const nlohmann::json header = {
      {"architecture", net_config_to_json(checkpoint.architecture)},
      {"metadata", checkpoint.metadata},
      {"tensors", tensors}};
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out.insert(out.end(), header_text.begin(), header_text.end());
  for (const Parameter& p : checkpoint.params.params()) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(p.value.data());
    out.insert(out.end(), bytes, bytes + p.value.size() * sizeof(float));
  }
  const std::vector<std::uint8_t> d = digest(out.data(), out.size());
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kPreamble) {
    throw CheckpointTruncatedError("checkpoint shorter than its preamble");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointFormatError("not a checkpoint file (bad magic)");
  }
  const auto version = get<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("unsupported checkpoint version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_size = get<std::uint64_t>(bytes, 12);
  if (header_size > bytes.size() || kPreamble + header_size + kDigestSize > bytes.size()) {
    throw CheckpointTruncatedError("checkpoint truncated inside its header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPreamble,
                                   bytes.begin() + kPreamble + header_size);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError(std::string("malformed header: ") + e.what());
  }

  std::size_t payload = 0;
  std::vector<std::pair<std::string, std::vector<int>>> entries;
  try {
    for (const auto& t : header.at("tensors")) {
      entries.emplace_back(t.at("name").get<std::string>(),
                           t.at("shape").get<std::vector<int>>());
      payload += shape_size(entries.back().second) * sizeof(float);
    }
  } catch (const std::exception& e) {
    throw CheckpointFormatError(std::string("malformed tensor table: ") + e.what());
  }
  const std::size_t expected = kPreamble + header_size + payload + kDigestSize;
  if (bytes.size() < expected) {
    throw CheckpointTruncatedError("checkpoint truncated: " +
                                   std::to_string(bytes.size()) + " of " +
                                   std::to_string(expected) + " bytes");
  }
  if (bytes.size() > expected) {
    throw CheckpointFormatError("trailing bytes after checkpoint digest");
  }
  const std::vector<std::uint8_t> d = digest(bytes.data(), expected - kDigestSize);
  if (std::memcmp(d.data(), bytes.data() + expected - kDigestSize, kDigestSize) != 0) {
    throw CheckpointDigestError("checkpoint digest mismatch");
  }

  Checkpoint c;
  try {
    c.architecture = net_config_from_json(header.at("architecture"));
    c.metadata = header.at("metadata");
  } catch (const ConfigError& e) {
    throw CheckpointFormatError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError(e.what());
  }
  std::size_t offset = kPreamble + header_size;
  for (auto& [name, shape] : entries) {
    std::vector<float> values(shape_size(shape));
    std::memcpy(values.data(), bytes.data() + offset, values.size() * sizeof(float));
    offset += values.size() * sizeof(float);
    c.params.add(name, Tensor(shape, std::move(values)));
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

std::string checkpoint_digest(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kDigestSize) throw CheckpointTruncatedError("no digest");
  return to_hex(bytes.data() + bytes.size() - kDigestSize, kDigestSize);
}

}  // namespace trojan
