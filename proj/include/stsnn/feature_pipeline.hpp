#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stsnn/retina_codec.hpp"
#include "stsnn/video_io.hpp"

namespace stsnn {

/// Feature-map budget: g_w x g_h spatial cells, `depth` temporal groups.
struct PoolSpec {
  int grid_w = 20;
  int grid_h = 20;
  int depth = 1;

  void validate() const;
};

/// Splits [0, n) into `parts` contiguous ranges; the last n % parts ranges are one longer.
/// With n < parts the first n ranges hold one element and the rest are empty.
std::vector<std::pair<int, int>> partition_range(int n, int parts);

struct PooledPlane {
  Plane plane;
  bool warning = false;  // input smaller than the grid; returned unchanged
};

PooledPlane sum_pool_spatial(const Plane& map, int grid_w, int grid_h);

struct PooledFrames {
  std::vector<Plane> maps;
  bool warning = false;  // fewer frames than groups; trailing groups are zero
};

PooledFrames sum_pool_temporal(std::span<const Plane> maps, int groups);

/// Pooled feature maps, stored x fastest, then y, then temporal group, then filter.
struct PooledTensor {
  int grid_w = 0;
  int grid_h = 0;
  int depth = 0;
  int filters = 0;
  std::vector<float> values;

  float at(int x, int y, int t, int k) const {
    return values[static_cast<std::size_t>(x) +
                  static_cast<std::size_t>(grid_w) *
                      (y + static_cast<std::size_t>(grid_h) * (t + static_cast<std::size_t>(depth) * k))];
  }
};

/// Decodes first spikes to values, then pools each filter spatially and temporally.
/// Logs one warning line when either pooling step degenerates.
PooledTensor pool_feature_maps(const SpikingTensor& maps, const PoolSpec& spec, double t_exposition = 1.0);

struct StreamSlice {
  std::string stream;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const StreamSlice&) const = default;
};

struct FeatureVector {
  std::vector<float> values;
  std::vector<StreamSlice> provenance;

  /// Finite values and slices that tile the vector in order.
  void validate() const;
  bool operator==(const FeatureVector&) const = default;
};

FeatureVector flatten(const PooledTensor& pooled, const std::string& stream);

/// Scales to unit L2 norm; an all-zero vector is returned unchanged.
FeatureVector l2_normalize(const FeatureVector& v);

/// [norm(a) || norm(b)] (or the raw concatenation when `normalize` is false).
FeatureVector fuse_concat(const FeatureVector& a, const FeatureVector& b, bool normalize = true);

// Feature file: "STFV", u32 version, u32 slice count, per slice (str stream,
// u32 offset, u32 length), u32 value count, f32 values. Little-endian.
std::vector<std::uint8_t> serialize_features(const FeatureVector& v);
FeatureVector deserialize_features(std::vector<std::uint8_t> bytes, const std::string& source = "features");
void write_features(const std::filesystem::path& path, const FeatureVector& v);
FeatureVector read_features(const std::filesystem::path& path);

}  // namespace stsnn
