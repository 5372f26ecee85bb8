#ifndef TROJAN_OBSERVATION_HPP_
#define TROJAN_OBSERVATION_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

namespace trojan {

inline constexpr int kViewSize = 7;
inline constexpr int kObsChannels = 3;
inline constexpr std::size_t kObsEntries =
    static_cast<std::size_t>(kViewSize) * kViewSize * kObsChannels;

// Channel 0 vocabulary.
enum class ObjectId : std::uint8_t {
  Unseen = 0,
  Empty = 1,
  Wall = 2,
  Lava = 3,
  Goal = 4,
  Agent = 5,
};
inline constexpr int kNumObjectIds = 6;

// Channel 1 vocabulary.
enum class ColorId : std::uint8_t {
  None = 0,
  Grey = 1,
  Orange = 2,
  Green = 3,
  Red = 4,
};
inline constexpr int kNumColorIds = 5;

// Channel 2 vocabulary: 0 for every object except the agent, whose state is
// its absolute facing (0=E, 1=S, 2=W, 3=N).
inline constexpr int kNumStateIds = 4;

// Egocentric 7x7x3 view. Row 0 is farthest from the agent, the agent sits at
// (6, 3) looking "up". Storage is row-major, channel-last.
struct Observation {
  std::array<std::uint8_t, kObsEntries> data{};

  static constexpr std::size_t index(int row, int col, int channel) {
    return (static_cast<std::size_t>(row) * kViewSize + col) * kObsChannels +
           channel;
  }
  std::uint8_t at(int row, int col, int channel) const {
    return data[index(row, col, channel)];
  }
  std::uint8_t& at(int row, int col, int channel) {
    return data[index(row, col, channel)];
  }
  ObjectId object(int row, int col) const {
    return static_cast<ObjectId>(at(row, col, 0));
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ObservationHash {
  std::size_t operator()(const Observation& obs) const noexcept {
    return std::hash<std::string_view>{}(std::string_view(
        reinterpret_cast<const char*>(obs.data.data()), obs.data.size()));
  }
};

}  // namespace trojan

#endif  // TROJAN_OBSERVATION_HPP_
