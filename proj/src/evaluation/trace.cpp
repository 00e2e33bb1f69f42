#include "roar/evaluation/trace.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace roar::evaluation {

namespace {
constexpr std::array<char, 4> kMagic = {'R', 'T', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw TraceError("truncated trace header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::filesystem::path sidecar(const std::filesystem::path& p) {
  std::filesystem::path s = p;
  s += ".json";
  return s;
}
}  // namespace

void RoutingTrace::validate() const {
  if (index.size() != timesteps * blocks * tokens) throw std::invalid_argument("trace size does not match T*L*N");
  if (views == 0 || views > 65535) throw std::invalid_argument("trace view count out of range");
  for (std::uint16_t v : index)
    if (v >= views) throw std::invalid_argument("trace entry outside [0, V)");
}

void save_trace(const std::filesystem::path& path, const RoutingTrace& trace) {
  trace.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write " + path.string());
  out.write(kMagic.data(), 4);
  put_u32(out, kVersion);
  for (std::size_t d : {trace.timesteps, trace.blocks, trace.tokens, trace.views}) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::uint16_t v : trace.index) {
    const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  nlohmann::json side;
  side["timesteps"] = trace.timesteps;
  side["blocks"] = trace.blocks;
  side["tokens"] = trace.tokens;
  side["views"] = trace.views;
  side["metadata"] = nlohmann::json::parse(trace.metadata_json);
  std::ofstream js(sidecar(path));
  js << side.dump(2) << "\n";
}

RoutingTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot read " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw TraceError("not a routing trace");
  if (get_u32(in) != kVersion) throw TraceError("unsupported trace version");
  const std::uint32_t t = get_u32(in), l = get_u32(in), n = get_u32(in), v = get_u32(in);
  RoutingTrace trace(t, l, n, v);
  for (std::uint16_t& x : trace.index) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) throw TraceError("truncated trace payload");
    x = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  if (std::ifstream js(sidecar(path)); js) {
    const auto side = nlohmann::json::parse(js, nullptr, false);
    if (!side.is_discarded() && side.contains("metadata")) trace.metadata_json = side["metadata"].dump();
  }
  try {
    trace.validate();
  } catch (const std::invalid_argument& e) {
    throw TraceError(e.what());
  }
  return trace;
}

}  // namespace roar::evaluation
