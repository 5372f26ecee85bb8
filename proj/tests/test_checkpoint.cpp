#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "trojan/checkpoint.hpp"
#include "trojan/triggers.hpp"

using namespace trojan;
namespace fs = std::filesystem;

namespace {

Checkpoint sample_checkpoint() {
  ActorCriticNet net(NetConfig{}, 31);
  // Awkward values must survive too.
  net.params().at("actor.fc1.bias").value[0] = -0.0F;
  net.params().at("actor.fc1.bias").value[1] = 1e-42F;
  net.params().at("actor.fc1.bias").value[2] = 3.4e38F;
  return make_checkpoint(net, {{"frames", 1234},
                               {"seed", 5},
                               {"poison", poison_spec_to_json(PoisonSpec{})}});
}

bool bit_equal(const ParamStore& a, const ParamStore& b) {
  if (a.params().size() != b.params().size()) return false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    const Parameter& p = a.params()[i];
    const Parameter& q = b.params()[i];
    if (p.name != q.name || p.value.shape() != q.value.shape()) return false;
    if (std::memcmp(p.value.data(), q.value.data(), p.value.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("SHA-256 matches the published test vector") {
  const std::string abc = "abc";
  CHECK(sha256_hex(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("serialize / deserialize is bit-exact") {
  const Checkpoint c = sample_checkpoint();
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(c);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(bit_equal(c.params, back.params));
  CHECK(back.architecture == c.architecture);
  CHECK(back.metadata == c.metadata);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(std::memcmp(bytes.data(), "TRJCKPT\0", 8) == 0);
  CHECK(checkpoint_digest(bytes) ==
        sha256_hex(bytes.data(), bytes.size() - 32));
}

TEST_CASE("save and load through the filesystem") {
  const fs::path dir = fs::temp_directory_path() / "trojan_ckpt_test";
  fs::create_directories(dir);
  const Checkpoint c = sample_checkpoint();
  save_checkpoint(c, dir / "a.bin");
  CHECK(bit_equal(load_checkpoint(dir / "a.bin").params, c.params));
  CHECK_FALSE(fs::exists(dir / "a.bin.tmp"));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), CheckpointError);
  fs::remove_all(dir);
}

TEST_CASE("every corrupted byte is caught") {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(sample_checkpoint());
  // Past the magic and version fields, any flipped byte is a digest failure
  // or a structural failure; never a silent load.
  for (std::size_t i = 12; i < bytes.size(); i += 97) {
    std::vector<std::uint8_t> bad = bytes;
    bad[i] ^= 0x40;
    CHECK_THROWS_AS(deserialize_checkpoint(bad), CheckpointError);
  }
  std::vector<std::uint8_t> payload = bytes;
  payload[payload.size() - 100] ^= 1;
  CHECK_THROWS_AS(deserialize_checkpoint(payload), CheckpointDigestError);
}

TEST_CASE("wrong magic, future version and truncation get distinct errors") {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(sample_checkpoint());
  std::vector<std::uint8_t> magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(magic), CheckpointFormatError);

  std::vector<std::uint8_t> version = bytes;
  version[8] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
  CHECK_THROWS_AS(deserialize_checkpoint(version), CheckpointVersionError);

  for (const std::size_t keep : {std::size_t{0}, std::size_t{10}, std::size_t{30},
                                 bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + keep);
    CHECK_THROWS_AS(deserialize_checkpoint(cut), CheckpointTruncatedError);
  }
  std::vector<std::uint8_t> longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(deserialize_checkpoint(longer), CheckpointError);
}

TEST_CASE("network_from rebuilds an identical network") {
  const Checkpoint c = sample_checkpoint();
  const ActorCriticNet net = network_from(c);
  CHECK(bit_equal(net.params(), c.params));
  CHECK(net.config() == c.architecture);
}
