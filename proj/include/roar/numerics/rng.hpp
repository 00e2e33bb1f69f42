#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace roar {

// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

// Counter-based random stream. A stream is identified by a 64-bit key (root
// seed mixed with a sub-stream name and any number of derive() coordinates);
// draw i of a stream is a pure function of (key, i), so streams can be
// replayed or split across threads without shared state.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view name);

  RandomStream derive(std::uint64_t coordinate) const;
  std::uint64_t key() const { return key_; }

  std::uint64_t bits(std::uint64_t index) const;
  double uniform(std::uint64_t index) const;       // [0, 1)
  double uniform_open(std::uint64_t index) const;  // (0, 1)
  double normal(std::uint64_t index) const;
  std::uint64_t below(std::uint64_t index, std::uint64_t bound) const;  // [0, bound)

 private:
  explicit RandomStream(std::uint64_t key) : key_(key) {}
  std::uint64_t key_;
};

// Sequential view over a RandomStream for code that just wants "the next"
// number.
class RandomSequence {
 public:
  explicit RandomSequence(RandomStream stream) : stream_(stream) {}

  double uniform() { return stream_.uniform(next_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double uniform_open() { return stream_.uniform_open(next_++); }
  double normal() { return stream_.normal(next_++); }
  std::uint64_t below(std::uint64_t bound) { return stream_.below(next_++, bound); }
  std::uint64_t position() const { return next_; }

 private:
  RandomStream stream_;
  std::uint64_t next_ = 0;
};

std::uint64_t hash_name(std::string_view name);
std::uint64_t mix64(std::uint64_t x);

}  // namespace roar
