#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "stsnn/video_io.hpp"

namespace stsnn {

/// Per-pixel displacement in pixels/frame; +x right, +y down.
struct FlowField {
  Plane dx;
  Plane dy;

  int width() const { return dx.width(); }
  int height() const { return dx.height(); }
};

/// Two-frame polynomial-expansion flow parameters.
struct FlowParams {
  int levels = 3;
  int window = 15;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.1;
  double pyramid_scale = 0.5;

  void validate() const;
};

/// Rows of all frames interleaved into one l_w x (l_h * l_td) frame:
/// output row x * l_td + n holds row x of frame n.
Plane early_fuse(const VideoTensor& clip);
/// Inverse of early_fuse for a known depth.
VideoTensor early_defuse(const Plane& fused, int depth);

/// |frame n - frame n+1| for n in [0, l_td - 2].
VideoTensor frame_subtract(const VideoTensor& clip);

FlowField dense_flow(const Plane& frame_a, const Plane& frame_b, const FlowParams& params = {});
/// Flow between each pair of consecutive frames of a single-channel clip.
std::vector<FlowField> clip_flow(const VideoTensor& clip, const FlowParams& params = {});

/// Hue = orientation (0 deg = rightward, counterclockwise on screen), full
/// saturation, value = magnitude / per-frame max magnitude. Channels are R, G, B.
VideoTensor flow_to_rgb(const FlowField& flow);
void hsv_to_rgb(double hue_deg, double sat, double val, double& r, double& g, double& b);
/// Hue in [0, 360) assigned to a flow vector.
double flow_hue(double dx, double dy);

struct DirectionalMaps {
  Plane left;
  Plane right;
  Plane up;
  Plane down;
};

/// Unnormalized left/right/up/down displacement magnitudes of one flow field.
DirectionalMaps directional_maps(const FlowField& flow);

/// Directional maps of every field tiled into one frame: one row of tiles per
/// field, columns [left, right, up, down], jointly normalized by the global max.
Plane motion_grid(std::span<const FlowField> flows);

// Precomputed flow file: "STOF", u32 width, height, count, then per field the
// interleaved (dx, dy) f32 pairs, x fastest. Little-endian.
void write_flow_file(const std::filesystem::path& path, std::span<const FlowField> flows);
std::vector<FlowField> read_flow_file(const std::filesystem::path& path);

}  // namespace stsnn
