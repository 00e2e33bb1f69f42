#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

#include "roar/numerics/tensor.hpp"

namespace roar {

// Binary named-tensor container, all integers little-endian:
//   "ROAR" | version u32 | count u32 |
//   count x { name_len u32 | name utf-8 | rank u32 | dims u64[rank] | f64[prod(dims)] }
// Tensors are written in name order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::map<std::string, Tensor>;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensors(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_tensors(std::istream& in);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

}  // namespace roar
