#include "roar/world/camera.hpp"

#include <cmath>
#include <stdexcept>

#include "roar/numerics/rng.hpp"

namespace roar::world {

double wrap_degrees(double degrees) {
  double w = std::fmod(degrees, 360.0);
  if (w < 0.0) w += 360.0;
  return w >= 360.0 ? 0.0 : w;
}

int azimuth_bin(double azimuth_degrees) {
  const double w = wrap_degrees(azimuth_degrees);
  return static_cast<int>(std::floor((w + 45.0) / 90.0)) % 4;
}

Camera Camera::at(double azimuth, double elevation) {
  Camera c;
  c.azimuth = wrap_degrees(azimuth);
  c.elevation = elevation;
  c.bin = azimuth_bin(c.azimuth);
  return c;
}

std::vector<Camera> sample_views(std::uint64_t seed, std::size_t count, const std::set<int>& bins,
                                 double elevation_range) {
  if (bins.empty()) throw std::invalid_argument("sample_views: empty bin set");
  for (int b : bins)
    if (b < 0 || b > 3) throw std::invalid_argument("sample_views: bin index out of range");
  const std::vector<int> choices(bins.begin(), bins.end());
  RandomSequence rng(RandomStream(seed, "views"));
  std::vector<Camera> cams;
  cams.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int bin = choices[rng.below(choices.size())];
    const double az = 90.0 * bin + rng.uniform(-45.0, 45.0);
    const double el = rng.uniform(-elevation_range, elevation_range);
    Camera c = Camera::at(az, el);
    c.bin = bin;  // guards the [.., 45) edge against rounding in wrap_degrees
    cams.push_back(c);
  }
  return cams;
}

void ViewFeatureSet::validate() const {
  if (features.rank() != 3 || features.dim(0) < 1) throw std::invalid_argument("view set needs features [V x S x D], V >= 1");
  if (cameras.size() != features.dim(0)) throw std::invalid_argument("view set: camera count != view count");
  if (primary_index && *primary_index >= features.dim(0)) throw std::invalid_argument("view set: primary index out of range");
  if (!features.all_finite()) throw std::invalid_argument("view set: non-finite features");
}

Tensor ViewFeatureSet::view(std::size_t v) const {
  const std::size_t s = patches(), d = dim();
  Tensor out({s, d});
  std::copy_n(features.data().begin() + static_cast<std::ptrdiff_t>(v * s * d), s * d, out.data().begin());
  return out;
}

ViewFeatureSet make_view_set(const std::vector<Tensor>& per_view, std::vector<Camera> cameras,
                             std::optional<std::size_t> primary) {
  if (per_view.empty()) throw std::invalid_argument("make_view_set: no views");
  const std::size_t s = per_view[0].dim(0), d = per_view[0].dim(1);
  ViewFeatureSet set;
  set.features = Tensor({per_view.size(), s, d});
  for (std::size_t v = 0; v < per_view.size(); ++v) {
    if (per_view[v].shape() != Shape{s, d}) throw std::invalid_argument("make_view_set: inconsistent view shapes");
    std::copy(per_view[v].data().begin(), per_view[v].data().end(),
              set.features.data().begin() + static_cast<std::ptrdiff_t>(v * s * d));
  }
  set.cameras = std::move(cameras);
  set.primary_index = primary;
  set.validate();
  return set;
}

}  // namespace roar::world
