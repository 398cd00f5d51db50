#include "stsnn/retina_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"

namespace stsnn {

void DoGParams::validate() const {
  if (size < 3 || size % 2 == 0) throw ParameterError("DoG kernel size must be odd and >= 3");
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw ParameterError("DoG scales must be positive");
  if (!(sigma1 < sigma2)) throw ParameterError("DoG requires sigma1 < sigma2");
  if (!(cutoff >= 0.0 && cutoff <= 255.0)) throw ParameterError("DoG cutoff must be in [0,255]");
}

Kernel2D gaussian_kernel(int size, double sigma) {
  Kernel2D k{size, std::vector<double>(static_cast<std::size_t>(size) * size)};
  const int r = size / 2;
  double sum = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k.values[static_cast<std::size_t>(y + r) * size + (x + r)] = v;
      sum += v;
    }
  for (double& v : k.values) v /= sum;
  return k;
}

Kernel2D build_dog_kernel_unchecked(int size, double sigma1, double sigma2) {
  const auto g1 = gaussian_kernel(size, sigma1);
  const auto g2 = gaussian_kernel(size, sigma2);
  Kernel2D k{size, std::vector<double>(g1.values.size())};
  for (std::size_t i = 0; i < k.values.size(); ++i) k.values[i] = g1.values[i] - g2.values[i];
  return k;
}

Kernel2D build_dog_kernel(const DoGParams& params) {
  params.validate();
  return build_dog_kernel_unchecked(params.size, params.sigma1, params.sigma2);
}

std::vector<double> dog_response(const Plane& frame, const Kernel2D& kernel) {
  const int r = kernel.size / 2;
  const int w = frame.width(), h = frame.height();
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double center = frame(x, y);
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          acc += kernel(dx + r, dy + r) * (frame.at_clamped(x + dx, y + dy) - center);
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

OnOff dog_filter(const Plane& frame, const DoGParams& params) {
  const auto kernel = build_dog_kernel(params);
  const auto response = dog_response(frame, kernel);
  double peak = 0.0;
  for (double v : response) peak = std::max(peak, std::abs(v));
  OnOff out{Plane(frame.width(), frame.height()), Plane(frame.width(), frame.height())};
  if (peak > 0.0) {
    auto on = out.on.values();
    auto off = out.off.values();
    for (std::size_t i = 0; i < response.size(); ++i) {
      const double v = response[i] / peak;
      on[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      off[i] = static_cast<float>(std::clamp(-v, 0.0, 1.0));
    }
  }
  if (params.cutoff > 0.0) {
    out.on = apply_cutoff(out.on, params.cutoff);
    out.off = apply_cutoff(out.off, params.cutoff);
  }
  return out;
}

Plane apply_cutoff(const Plane& channel, double cutoff) {
  Plane out = channel;
  if (cutoff <= 0.0) return out;
  for (float& v : out.values())
    if (static_cast<double>(v) * 255.0 < cutoff) v = 0.0f;
  return out;
}

VideoTensor retina_filter(const VideoTensor& input, const DoGParams& params) {
  params.validate();
  VideoTensor out(input.width(), input.height(), 2 * input.channels(), input.depth());
  for (int n = 0; n < input.depth(); ++n)
    for (int c = 0; c < input.channels(); ++c) {
      const auto oo = dog_filter(input.plane(c, n), params);
      out.set_plane(2 * c, n, oo.on);
      out.set_plane(2 * c + 1, n, oo.off);
    }
  return out;
}

bool spike_before(const SpikeEvent& a, const SpikeEvent& b) {
  return std::tie(a.t, a.x, a.y, a.z, a.c) < std::tie(b.t, b.x, b.y, b.z, b.c);
}

void SpikingTensor::canonicalize() { std::sort(events.begin(), events.end(), spike_before); }

void SpikingTensor::validate(double t_exposition) const {
  std::vector<bool> seen(dims.volume(), false);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.x < 0 || e.x >= dims.width || e.y < 0 || e.y >= dims.height || e.z < 0 || e.z >= dims.depth ||
        e.c < 0 || e.c >= dims.channels)
      throw InputError("spike event outside tensor bounds");
    if (!(e.t >= 0.0 && e.t <= t_exposition)) throw InputError("spike time outside [0, t_exposition]");
    if (i > 0 && spike_before(e, events[i - 1])) throw InputError("spike events not in canonical order");
    const std::size_t idx = static_cast<std::size_t>(e.x) +
                            static_cast<std::size_t>(dims.width) *
                                (e.y + static_cast<std::size_t>(dims.height) *
                                           (e.z + static_cast<std::size_t>(dims.depth) * e.c));
    if (seen[idx]) throw InputError("duplicate spike at one coordinate");
    seen[idx] = true;
  }
}

SpikingTensor latency_encode(const VideoTensor& tensor, double t_exposition) {
  SpikingTensor out;
  out.dims = {tensor.width(), tensor.height(), tensor.channels(), tensor.depth()};
  for (int n = 0; n < tensor.depth(); ++n)
    for (int c = 0; c < tensor.channels(); ++c)
      for (int y = 0; y < tensor.height(); ++y)
        for (int x = 0; x < tensor.width(); ++x) {
          const double v = tensor.at(x, y, c, n);
          if (v > 0.0) out.events.push_back({x, y, n, c, (1.0 - std::min(v, 1.0)) * t_exposition});
        }
  out.canonicalize();
  return out;
}

VideoTensor decode_first_spike(const SpikingTensor& spikes, double t_exposition) {
  const auto& d = spikes.dims;
  VideoTensor out(d.width, d.height, d.channels, d.depth);
  std::vector<bool> seen(out.values().size(), false);
  for (const auto& e : spikes.events) {
    const auto idx = out.index(e.x, e.y, e.c, e.z);
    if (seen[idx]) continue;  // events are time-sorted: first one wins
    seen[idx] = true;
    out.values()[idx] = static_cast<float>(1.0 - e.t / t_exposition);
  }
  return out;
}

std::string format_spike_dump(const SpikingTensor& spikes) {
  std::string text;
  char line[96];
  for (const auto& e : spikes.events) {
    std::snprintf(line, sizeof line, "%.17g,%d,%d,%d,%d\n", e.t, e.x, e.y, e.z, e.c);
    text += line;
  }
  return text;
}

void write_spike_dump(const std::filesystem::path& path, const SpikingTensor& spikes) {
  write_text_atomic(path, format_spike_dump(spikes));
}

SpikeStats spike_stats(const SpikingTensor& spikes) {
  SpikeStats s;
  s.events = spikes.events.size();
  double sum = 0.0;
  for (const auto& e : spikes.events) sum += e.t;
  if (s.events > 0) s.mean_time = sum / static_cast<double>(s.events);
  return s;
}

}  // namespace stsnn
