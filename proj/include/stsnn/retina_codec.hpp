#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stsnn/video_io.hpp"

namespace stsnn {

struct DoGParams {
  int size = 7;
  double sigma1 = 1.0;
  double sigma2 = 4.0;
  /// Minimum intensity on the 0-255 scale; smaller normalized responses are zeroed.
  double cutoff = 0.0;

  void validate() const;
};

/// size x size kernel, row-major (x fastest).
struct Kernel2D {
  int size = 0;
  std::vector<double> values;

  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * size + x]; }
};

/// Unit-sum discretized Gaussian of the given scale over a size x size support.
Kernel2D gaussian_kernel(int size, double sigma);
/// Normalized Gaussian(sigma1) minus normalized Gaussian(sigma2). Validates parameters.
Kernel2D build_dog_kernel(const DoGParams& params);
/// Same construction without parameter checks (sigma1 == sigma2 gives the zero kernel).
Kernel2D build_dog_kernel_unchecked(int size, double sigma1, double sigma2);

/// Signed DoG response with replicate borders, computed as sum K(d) * (I(p+d) - I(p)).
/// Equal to I * K for a zero-sum kernel and exactly zero on constant regions.
std::vector<double> dog_response(const Plane& frame, const Kernel2D& kernel);

struct OnOff {
  Plane on;
  Plane off;
};

/// On/off split of the DoG response, scaled by the per-frame max |response| into [0,1].
OnOff dog_filter(const Plane& frame, const DoGParams& params);

/// Zeroes values whose 0-255 equivalent is below `cutoff`.
Plane apply_cutoff(const Plane& channel, double cutoff);

/// DoG + cutoff for every channel of every frame. Output channel 2c is the
/// on-map of input channel c, 2c+1 its off-map.
VideoTensor retina_filter(const VideoTensor& input, const DoGParams& params);

struct SpikeEvent {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;
  std::int32_t c = 0;
  double t = 0.0;

  bool operator==(const SpikeEvent&) const = default;
};

/// Time order with deterministic ties on (x, y, z, c).
bool spike_before(const SpikeEvent& a, const SpikeEvent& b);

struct SpikeDims {
  int width = 0;
  int height = 0;
  int channels = 0;
  int depth = 0;

  std::size_t volume() const {
    return static_cast<std::size_t>(width) * height * channels * depth;
  }
  bool operator==(const SpikeDims&) const = default;
};

/// Time-sorted unary events, at most one per coordinate.
struct SpikingTensor {
  SpikeDims dims;
  std::vector<SpikeEvent> events;

  /// Sorts events into canonical order.
  void canonicalize();
  /// Bounds, time window, ordering and per-coordinate uniqueness.
  void validate(double t_exposition = 1.0) const;

  bool operator==(const SpikingTensor&) const = default;
};

/// One event at (1 - x) * t_exposition per positive value; zeros stay silent.
SpikingTensor latency_encode(const VideoTensor& tensor, double t_exposition = 1.0);
/// First spike at t decodes to 1 - t / t_exposition; silent coordinates decode to 0.
VideoTensor decode_first_spike(const SpikingTensor& spikes, double t_exposition = 1.0);

/// Text dump, one `t,x,y,z,c` line per event in stored order.
std::string format_spike_dump(const SpikingTensor& spikes);
void write_spike_dump(const std::filesystem::path& path, const SpikingTensor& spikes);

struct SpikeStats {
  std::size_t events = 0;
  double mean_time = 0.0;
};
SpikeStats spike_stats(const SpikingTensor& spikes);

}  // namespace stsnn
