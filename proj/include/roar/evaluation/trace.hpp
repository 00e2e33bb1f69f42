#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace roar::evaluation {

// Hard routing indices over (timestep, block, token).
struct RoutingTrace {
  std::size_t timesteps = 0, blocks = 0, tokens = 0, views = 0;
  std::vector<std::uint16_t> index;  // timestep-major, then block, then token
  std::string metadata_json = "{}";  // free-form run metadata for the sidecar

  RoutingTrace() = default;
  RoutingTrace(std::size_t t, std::size_t l, std::size_t n, std::size_t v)
      : timesteps(t), blocks(l), tokens(n), views(v), index(t * l * n, 0) {}

  std::uint16_t& at(std::size_t t, std::size_t l, std::size_t i) { return index[(t * blocks + l) * tokens + i]; }
  std::uint16_t at(std::size_t t, std::size_t l, std::size_t i) const { return index[(t * blocks + l) * tokens + i]; }

  // Throws std::invalid_argument when dimensions or entries are inconsistent.
  void validate() const;
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary: "RTRC" | version u32 | T, L, N, V as u32 | u16[T*L*N], little-endian,
// plus a JSON sidecar at path + ".json".
void save_trace(const std::filesystem::path& path, const RoutingTrace& trace);
RoutingTrace load_trace(const std::filesystem::path& path);

}  // namespace roar::evaluation
