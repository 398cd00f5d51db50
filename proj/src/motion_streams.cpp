#include "stsnn/motion_streams.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"

namespace stsnn {

void FlowParams::validate() const {
  if (levels < 1) throw ParameterError("flow pyramid levels must be >= 1");
  if (window < 1 || window % 2 == 0) throw ParameterError("flow window must be odd");
  if (iterations < 1) throw ParameterError("flow iterations must be >= 1");
  if (poly_n < 1) throw ParameterError("flow polynomial neighborhood must be >= 1");
  if (!(poly_sigma > 0.0)) throw ParameterError("flow polynomial sigma must be positive");
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) throw ParameterError("pyramid scale must be in (0,1)");
}

Plane early_fuse(const VideoTensor& clip) {
  if (clip.channels() != 1) throw ParameterError("early fusion requires single-channel frames");
  const int td = clip.depth();
  Plane out(clip.width(), clip.height() * td);
  for (int n = 0; n < td; ++n)
    for (int row = 0; row < clip.height(); ++row)
      for (int col = 0; col < clip.width(); ++col) out(col, row * td + n) = clip.at(col, row, 0, n);
  return out;
}

VideoTensor early_defuse(const Plane& fused, int depth) {
  if (depth < 1 || fused.height() % depth != 0) throw InputError("fused height not divisible by depth");
  const int h = fused.height() / depth;
  VideoTensor out(fused.width(), h, 1, depth);
  for (int n = 0; n < depth; ++n)
    for (int row = 0; row < h; ++row)
      for (int col = 0; col < fused.width(); ++col) out.at(col, row, 0, n) = fused(col, row * depth + n);
  return out;
}

VideoTensor frame_subtract(const VideoTensor& clip) {
  if (clip.channels() != 1) throw ParameterError("frame subtraction requires single-channel frames");
  if (clip.depth() < 2) throw ParameterError("frame subtraction requires at least 2 frames");
  VideoTensor out(clip.width(), clip.height(), 1, clip.depth() - 1);
  for (int n = 0; n + 1 < clip.depth(); ++n)
    for (int y = 0; y < clip.height(); ++y)
      for (int x = 0; x < clip.width(); ++x)
        out.at(x, y, 0, n) = std::abs(clip.at(x, y, 0, n) - clip.at(x, y, 0, n + 1));
  return out;
}

std::vector<FlowField> clip_flow(const VideoTensor& clip, const FlowParams& params) {
  if (clip.channels() != 1) throw ParameterError("optical flow requires single-channel frames");
  if (clip.depth() < 2) throw ParameterError("optical flow requires at least 2 frames");
  std::vector<FlowField> flows;
  for (int n = 0; n + 1 < clip.depth(); ++n) flows.push_back(dense_flow(clip.plane(0, n), clip.plane(0, n + 1), params));
  return flows;
}

double flow_hue(double dx, double dy) {
  // y grows downward, so counterclockwise on screen means negating dy.
  double deg = std::atan2(-dy, dx) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

void hsv_to_rgb(double hue_deg, double sat, double val, double& r, double& g, double& b) {
  const double c = val * sat;
  const double hp = hue_deg / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = val - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

VideoTensor flow_to_rgb(const FlowField& flow) {
  const int w = flow.width(), h = flow.height();
  VideoTensor out(w, h, 3, 1);
  double peak = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) peak = std::max(peak, std::hypot<double>(flow.dx(x, y), flow.dy(x, y)));
  if (peak <= 0.0) return out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = flow.dx(x, y), dy = flow.dy(x, y);
      const double val = std::hypot(dx, dy) / peak;
      double r, g, b;
      hsv_to_rgb(flow_hue(dx, dy), 1.0, val, r, g, b);
      out.at(x, y, 0, 0) = static_cast<float>(std::clamp(r, 0.0, 1.0));
      out.at(x, y, 1, 0) = static_cast<float>(std::clamp(g, 0.0, 1.0));
      out.at(x, y, 2, 0) = static_cast<float>(std::clamp(b, 0.0, 1.0));
    }
  return out;
}

DirectionalMaps directional_maps(const FlowField& flow) {
  const int w = flow.width(), h = flow.height();
  DirectionalMaps m{Plane(w, h), Plane(w, h), Plane(w, h), Plane(w, h)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float fx = flow.dx(x, y), fy = flow.dy(x, y);
      m.left(x, y) = (std::abs(fx) - fx) / 2.0f;
      m.right(x, y) = (std::abs(fx) + fx) / 2.0f;
      m.up(x, y) = (std::abs(fy) - fy) / 2.0f;
      m.down(x, y) = (std::abs(fy) + fy) / 2.0f;
    }
  return m;
}

Plane motion_grid(std::span<const FlowField> flows) {
  if (flows.empty()) throw InputError("motion grid needs at least one flow field");
  const int w = flows[0].width(), h = flows[0].height();
  std::vector<DirectionalMaps> maps;
  float peak = 0.0f;
  for (const auto& f : flows) {
    if (f.width() != w || f.height() != h) throw InputError("flow fields differ in size");
    maps.push_back(directional_maps(f));
    for (const Plane* p : {&maps.back().left, &maps.back().right, &maps.back().up, &maps.back().down})
      for (float v : p->values()) peak = std::max(peak, v);
  }
  Plane grid(4 * w, h * static_cast<int>(flows.size()));
  for (std::size_t row = 0; row < maps.size(); ++row) {
    const Plane* tiles[4] = {&maps[row].left, &maps[row].right, &maps[row].up, &maps[row].down};
    for (int col = 0; col < 4; ++col)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          grid(col * w + x, static_cast<int>(row) * h + y) = peak > 0.0f ? (*tiles[col])(x, y) / peak : 0.0f;
  }
  return grid;
}

void write_flow_file(const std::filesystem::path& path, std::span<const FlowField> flows) {
  if (flows.empty()) throw InputError("no flow fields to write");
  ByteWriter w;
  w.magic("STOF");
  w.u32(static_cast<std::uint32_t>(flows[0].width()));
  w.u32(static_cast<std::uint32_t>(flows[0].height()));
  w.u32(static_cast<std::uint32_t>(flows.size()));
  for (const auto& f : flows) {
    if (f.width() != flows[0].width() || f.height() != flows[0].height())
      throw InputError("flow fields differ in size");
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        w.f32(f.dx(x, y));
        w.f32(f.dy(x, y));
      }
  }
  write_file_atomic(path, w.bytes());
}

std::vector<FlowField> read_flow_file(const std::filesystem::path& path) {
  ByteReader r(read_file_bytes(path), path.string());
  r.expect_magic("STOF");
  const int w = static_cast<int>(r.u32()), h = static_cast<int>(r.u32()), n = static_cast<int>(r.u32());
  if (w <= 0 || h <= 0 || n <= 0) throw IngestError(path.string() + ": zero dimension");
  std::vector<FlowField> flows;
  for (int i = 0; i < n; ++i) {
    FlowField f{Plane(w, h), Plane(w, h)};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        f.dx(x, y) = r.f32();
        f.dy(x, y) = r.f32();
        if (!std::isfinite(f.dx(x, y)) || !std::isfinite(f.dy(x, y)))
          throw IngestError(path.string() + ": non-finite flow value");
      }
    flows.push_back(std::move(f));
  }
  r.expect_end();
  return flows;
}

}  // namespace stsnn
