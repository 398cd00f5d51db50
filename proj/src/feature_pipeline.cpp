#include "stsnn/feature_pipeline.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"

namespace stsnn {

void PoolSpec::validate() const {
  if (grid_w < 1 || grid_h < 1) throw ParameterError("pool grid must be >= 1x1");
  if (depth != 1 && depth != 2) throw ParameterError("pool temporal depth must be 1 or 2");
}

std::vector<std::pair<int, int>> partition_range(int n, int parts) {
  std::vector<std::pair<int, int>> ranges;
  ranges.reserve(static_cast<std::size_t>(parts));
  if (n < parts) {
    for (int i = 0; i < parts; ++i) ranges.emplace_back(std::min(i, n), std::min(i + 1, n));
    return ranges;
  }
  const int base = n / parts;
  const int longer_from = parts - n % parts;
  int begin = 0;
  for (int i = 0; i < parts; ++i) {
    const int len = base + (i >= longer_from ? 1 : 0);
    ranges.emplace_back(begin, begin + len);
    begin += len;
  }
  return ranges;
}

PooledPlane sum_pool_spatial(const Plane& map, int grid_w, int grid_h) {
  if (map.width() < grid_w || map.height() < grid_h) return {map, true};
  const auto cols = partition_range(map.width(), grid_w);
  const auto rows = partition_range(map.height(), grid_h);
  Plane out(grid_w, grid_h);
  for (int gy = 0; gy < grid_h; ++gy)
    for (int gx = 0; gx < grid_w; ++gx) {
      double acc = 0.0;
      for (int y = rows[gy].first; y < rows[gy].second; ++y)
        for (int x = cols[gx].first; x < cols[gx].second; ++x) acc += map(x, y);
      out(gx, gy) = static_cast<float>(acc);
    }
  return {out, false};
}

PooledFrames sum_pool_temporal(std::span<const Plane> maps, int groups) {
  if (maps.empty()) throw InputError("temporal pooling needs at least one frame");
  if (groups < 1) throw ParameterError("temporal groups must be >= 1");
  PooledFrames out;
  out.warning = static_cast<int>(maps.size()) < groups;
  for (const auto& [b, e] : partition_range(static_cast<int>(maps.size()), groups)) {
    Plane acc(maps[0].width(), maps[0].height());
    std::vector<double> sum(acc.size(), 0.0);
    for (int n = b; n < e; ++n) {
      if (maps[n].width() != acc.width() || maps[n].height() != acc.height())
        throw InputError("temporal pooling over maps of different sizes");
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += maps[n].values()[i];
    }
    for (std::size_t i = 0; i < sum.size(); ++i) acc.values()[i] = static_cast<float>(sum[i]);
    out.maps.push_back(std::move(acc));
  }
  return out;
}

PooledTensor pool_feature_maps(const SpikingTensor& maps, const PoolSpec& spec, double t_exposition) {
  spec.validate();
  const VideoTensor values = decode_first_spike(maps, t_exposition);
  PooledTensor out;
  out.depth = spec.depth;
  out.filters = values.channels();
  bool spatial_warning = false, temporal_warning = false;
  for (int k = 0; k < values.channels(); ++k) {
    std::vector<Plane> frames;
    for (int n = 0; n < values.depth(); ++n) {
      auto pooled = sum_pool_spatial(values.plane(k, n), spec.grid_w, spec.grid_h);
      spatial_warning |= pooled.warning;
      frames.push_back(std::move(pooled.plane));
    }
    const auto grouped = sum_pool_temporal(frames, spec.depth);
    temporal_warning |= grouped.warning;
    if (k == 0) {
      out.grid_w = grouped.maps[0].width();
      out.grid_h = grouped.maps[0].height();
      out.values.reserve(static_cast<std::size_t>(out.grid_w) * out.grid_h * out.depth * out.filters);
    }
    for (const auto& m : grouped.maps) out.values.insert(out.values.end(), m.values().begin(), m.values().end());
  }
  if (spatial_warning || temporal_warning) {
    std::ostringstream msg;
    msg << "warning: pooling " << values.width() << "x" << values.height() << "x" << values.depth() << " maps into "
        << spec.grid_w << "x" << spec.grid_h << "x" << spec.depth << ":";
    if (spatial_warning) msg << " maps smaller than the grid are passed through;";
    if (temporal_warning) msg << " fewer frames than groups, empty groups are zero;";
    msg << '\n';
    std::clog << msg.str();
  }
  return out;
}

void FeatureVector::validate() const {
  for (float v : values)
    if (!std::isfinite(v)) throw InputError("non-finite feature value");
  std::size_t next = 0;
  for (const auto& s : provenance) {
    if (s.offset != next) throw InputError("feature provenance slices do not tile the vector");
    next += s.length;
  }
  if (next != values.size()) throw InputError("feature provenance does not cover the vector");
}

FeatureVector flatten(const PooledTensor& pooled, const std::string& stream) {
  FeatureVector v;
  v.values = pooled.values;
  v.provenance.push_back({stream, 0, v.values.size()});
  return v;
}

FeatureVector l2_normalize(const FeatureVector& v) {
  double sq = 0.0;
  for (float x : v.values) sq += static_cast<double>(x) * x;
  if (sq <= 0.0) return v;
  const double inv = 1.0 / std::sqrt(sq);
  FeatureVector out = v;
  for (float& x : out.values) x = static_cast<float>(x * inv);
  return out;
}

FeatureVector fuse_concat(const FeatureVector& a, const FeatureVector& b, bool normalize) {
  if (a.values.empty() || b.values.empty()) throw FusionError("cannot fuse an empty feature vector");
  a.validate();
  b.validate();
  const FeatureVector na = normalize ? l2_normalize(a) : a;
  const FeatureVector nb = normalize ? l2_normalize(b) : b;
  FeatureVector out;
  out.values = na.values;
  out.values.insert(out.values.end(), nb.values.begin(), nb.values.end());
  out.provenance = na.provenance;
  for (auto s : nb.provenance) {
    s.offset += na.values.size();
    out.provenance.push_back(s);
  }
  return out;
}

std::vector<std::uint8_t> serialize_features(const FeatureVector& v) {
  ByteWriter w;
  w.magic("STFV");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(v.provenance.size()));
  for (const auto& s : v.provenance) {
    w.str(s.stream);
    w.u32(static_cast<std::uint32_t>(s.offset));
    w.u32(static_cast<std::uint32_t>(s.length));
  }
  w.u32(static_cast<std::uint32_t>(v.values.size()));
  w.f32s(v.values);
  return w.bytes();
}

FeatureVector deserialize_features(std::vector<std::uint8_t> bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("STFV");
  if (r.u32() != 1) throw IngestError(source + ": unsupported feature file version");
  FeatureVector v;
  const auto slices = r.u32();
  for (std::uint32_t i = 0; i < slices; ++i) {
    StreamSlice s;
    s.stream = r.str();
    s.offset = r.u32();
    s.length = r.u32();
    v.provenance.push_back(std::move(s));
  }
  v.values.resize(r.u32());
  r.f32s(v.values);
  r.expect_end();
  try {
    v.validate();
  } catch (const InputError& e) {
    throw IngestError(source + ": " + e.what());
  }
  return v;
}

void write_features(const std::filesystem::path& path, const FeatureVector& v) {
  write_file_atomic(path, serialize_features(v));
}

FeatureVector read_features(const std::filesystem::path& path) {
  return deserialize_features(read_file_bytes(path), path.string());
}

}  // namespace stsnn
