#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "stsnn/retina_codec.hpp"
#include "stsnn/rng.hpp"

namespace stsnn {

struct STDPParams {
  double learning_rate = 0.1;
  double tau = 0.1;

  void validate() const;
};

struct HomeostasisParams {
  double learning_rate = 1.0;
  double min_threshold = 1.0;
  double initial_mean = 5.0;
  double initial_sd = 1.0;
  /// When no filter fires on a training patch, lower every threshold as if a
  /// spike had arrived at the end of the window. Prevents dead filters.
  bool silent_decay = true;

  void validate() const;
};

struct LayerConfig {
  int kernel_w = 5;
  int kernel_h = 5;
  int kernel_t = 1;  // 1 for a 2D layer applied framewise
  int filters = 64;
  int stride_x = 1;
  int stride_y = 1;
  int stride_t = 1;
  int input_channels = 2;
  double target_time = 0.65;
  double t_exposition = 1.0;
  STDPParams stdp;
  HomeostasisParams homeo;

  bool is_3d() const { return kernel_t > 1; }
  int synapses() const { return kernel_w * kernel_h * kernel_t * input_channels; }
  void validate() const;
};

struct OutputShape {
  int width = 0;
  int height = 0;
  int depth = 0;
  int filters = 0;

  bool operator==(const OutputShape&) const = default;
};

/// floor((in - kernel) / stride) + 1 per axis; throws ParameterError when the kernel exceeds the input.
OutputShape conv_output_shape(const SpikeDims& input, const LayerConfig& config);

/// A spike arriving on one synapse of a receptive field.
struct InputSpike {
  int synapse = 0;
  double t = 0.0;
};

/// Earliest time at which the cumulative weight of received spikes reaches
/// `threshold`, or nullopt. `events` must be time-sorted; weights are indexed
/// by synapse.
std::optional<double> integrate(std::span<const InputSpike> events, std::span<const double> weights,
                                double threshold, double t_exposition = 1.0);

/// Weight change for one synapse. A silent input (no t_pre) is depressed as if
/// it had spiked at the end of the window.
double stdp_delta(std::optional<double> t_pre, double t_post, const STDPParams& params,
                  double t_exposition = 1.0);
/// w + delta, clamped to [0,1].
double stdp_update(double w, std::optional<double> t_pre, double t_post, const STDPParams& params,
                   double t_exposition = 1.0);

/// First-spike times of a SpikingTensor on a dense grid; +inf where silent.
class SpikeGrid {
 public:
  explicit SpikeGrid(const SpikingTensor& tensor);

  const SpikeDims& dims() const { return dims_; }
  double time(int x, int y, int c, int z) const {
    return times_[static_cast<std::size_t>(x) +
                  static_cast<std::size_t>(dims_.width) *
                      (y + static_cast<std::size_t>(dims_.height) *
                               (c + static_cast<std::size_t>(dims_.channels) * z))];
  }

  /// Sorted spikes of the receptive field anchored at input coordinate (x, y, z).
  void gather(int x, int y, int z, const LayerConfig& config, std::vector<InputSpike>& out) const;

 private:
  SpikeDims dims_;
  std::vector<double> times_;
};

class SpikingConvLayer {
 public:
  /// W ~ U(0,1); thresholds ~ G(mean, sd) floored at the minimum threshold.
  SpikingConvLayer(const LayerConfig& config, std::uint64_t seed);

  const LayerConfig& config() const { return config_; }
  int filters() const { return config_.filters; }
  int synapses() const { return config_.synapses(); }

  /// Synapse index of kernel offset (i, j, m) on input channel c.
  int synapse(int i, int j, int m, int c) const {
    return i + config_.kernel_w * (j + config_.kernel_h * (m + config_.kernel_t * c));
  }

  std::span<double> weights(int k) {
    return std::span(weights_).subspan(static_cast<std::size_t>(k) * synapses(), synapses());
  }
  std::span<const double> weights(int k) const {
    return std::span(weights_).subspan(static_cast<std::size_t>(k) * synapses(), synapses());
  }
  std::span<const double> all_weights() const { return weights_; }
  std::span<double> thresholds() { return thresholds_; }
  std::span<const double> thresholds() const { return thresholds_; }

  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  /// Weights in [0,1], thresholds >= minimum, shapes consistent.
  void check_invariants() const;

  // Layer checkpoint: "STLC", u32 version, config block, f64 weights,
  // f64 thresholds, rng state string. Little-endian.
  std::vector<std::uint8_t> serialize() const;
  static SpikingConvLayer deserialize(std::vector<std::uint8_t> bytes, const std::string& source = "checkpoint");
  void save(const std::filesystem::path& path) const;
  static SpikingConvLayer load(const std::filesystem::path& path);

  bool operator==(const SpikingConvLayer& other) const;

 private:
  SpikingConvLayer() = default;

  LayerConfig config_;
  std::vector<double> weights_;  // filter-major
  std::vector<double> thresholds_;
  Rng rng_;
};

/// Threshold homeostasis after a fire at time `t` won by `winner`, among
/// `competitors` filters: every filter gets -eta (t - target); the winner
/// additionally +eta and each loser -eta / competitors. With a single
/// competitor only the target-time term applies.
void adapt_thresholds(SpikingConvLayer& layer, int winner, double t, int competitors);

enum class Competition { On, Off };

/// Event-driven convolution. With competition on, each output location keeps
/// only its earliest-firing filter (ties go to the lowest index).
SpikingTensor conv_forward(const SpikingTensor& sample, const SpikingConvLayer& layer, Competition competition);

/// conv_forward without competition and without any learning.
SpikingTensor infer(const SpikingTensor& sample, const SpikingConvLayer& layer);

struct Patch {
  int x = 0;
  int y = 0;
  int z = 0;
  std::vector<InputSpike> events;  // synapse indices relative to the window
};

/// Uniformly positioned receptive-field windows.
std::vector<Patch> sample_patches(const SpikeGrid& grid, const LayerConfig& config, std::size_t count, Rng& rng);
std::vector<Patch> sample_patches(const SpikingTensor& sample, const LayerConfig& config, std::size_t count,
                                  Rng& rng);

struct PatchOutcome {
  std::optional<int> winner;
  double fire_time = std::numeric_limits<double>::infinity();
  int stdp_updates = 0;  // filters whose weights changed
};

/// One WTA training step: integrate every filter, STDP on the winner, adapt thresholds.
PatchOutcome train_on_patch(SpikingConvLayer& layer, std::span<const InputSpike> events);

struct TrainingStats {
  std::size_t patches = 0;
  std::size_t patches_fired = 0;
  std::size_t stdp_updates = 0;
  int max_updates_per_patch = 0;
  std::size_t input_events = 0;
  std::size_t stalled_epochs = 0;
  std::vector<std::size_t> wins;  // per filter
};

/// Patch-based unsupervised training; clip order reshuffled every epoch.
TrainingStats train_layer(SpikingConvLayer& layer, std::span<const SpikingTensor> clips, int patches_per_clip,
                          int epochs, Rng& rng);
TrainingStats train_layer(SpikingConvLayer& layer, std::span<const SpikingTensor* const> clips, int patches_per_clip,
                          int epochs, Rng& rng);

}  // namespace stsnn
