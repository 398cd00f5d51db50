#include "stsnn/snn_engine.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <numeric>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"

namespace stsnn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint32_t kCheckpointVersion = 1;

bool input_before(const InputSpike& a, const InputSpike& b) {
  return a.t < b.t || (a.t == b.t && a.synapse < b.synapse);
}

}  // namespace

void STDPParams::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("STDP learning rate must be > 0");
  if (!(tau > 0.0)) throw ParameterError("STDP time constant must be > 0");
}

void HomeostasisParams::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("threshold learning rate must be > 0");
  if (!(min_threshold > 0.0)) throw ParameterError("minimum threshold must be > 0");
  if (!(initial_sd >= 0.0)) throw ParameterError("initial threshold sd must be >= 0");
}

void LayerConfig::validate() const {
  if (kernel_w < 1 || kernel_h < 1 || kernel_t < 1) throw ParameterError("kernel sizes must be >= 1");
  if (filters < 1) throw ParameterError("filter count must be >= 1");
  if (stride_x < 1 || stride_y < 1 || stride_t < 1) throw ParameterError("strides must be >= 1");
  if (input_channels < 1) throw ParameterError("input channel count must be >= 1");
  if (!(t_exposition > 0.0)) throw ParameterError("t_exposition must be > 0");
  if (!(target_time > 0.0 && target_time < t_exposition))
    throw ParameterError("target time must lie strictly inside (0, t_exposition)");
  stdp.validate();
  homeo.validate();
}

OutputShape conv_output_shape(const SpikeDims& input, const LayerConfig& config) {
  if (input.width < config.kernel_w || input.height < config.kernel_h || input.depth < config.kernel_t)
    throw ParameterError("kernel larger than input (" + std::to_string(input.width) + "x" +
                         std::to_string(input.height) + "x" + std::to_string(input.depth) + ")");
  if (input.channels != config.input_channels)
    throw ParameterError("input has " + std::to_string(input.channels) + " channels, layer expects " +
                         std::to_string(config.input_channels));
  return {(input.width - config.kernel_w) / config.stride_x + 1,
          (input.height - config.kernel_h) / config.stride_y + 1,
          (input.depth - config.kernel_t) / config.stride_t + 1, config.filters};
}

std::optional<double> integrate(std::span<const InputSpike> events, std::span<const double> weights,
                                double threshold, double t_exposition) {
  double v = 0.0;
  for (const auto& e : events) {
    if (e.t > t_exposition) break;
    v += weights[static_cast<std::size_t>(e.synapse)];
    if (v >= threshold) return e.t;
  }
  return std::nullopt;
}

double stdp_delta(std::optional<double> t_pre, double t_post, const STDPParams& params, double t_exposition) {
  if (t_pre && *t_pre <= t_post) return params.learning_rate * std::exp(-(t_post - *t_pre) / params.tau);
  const double pre = t_pre ? *t_pre : t_exposition;
  return -params.learning_rate * std::exp(-std::max(pre - t_post, 0.0) / params.tau);
}

double stdp_update(double w, std::optional<double> t_pre, double t_post, const STDPParams& params,
                   double t_exposition) {
  return std::clamp(w + stdp_delta(t_pre, t_post, params, t_exposition), 0.0, 1.0);
}

SpikeGrid::SpikeGrid(const SpikingTensor& tensor) : dims_(tensor.dims), times_(tensor.dims.volume(), kInf) {
  for (const auto& e : tensor.events) {
    auto& slot = times_[static_cast<std::size_t>(e.x) +
                        static_cast<std::size_t>(dims_.width) *
                            (e.y + static_cast<std::size_t>(dims_.height) *
                                       (e.c + static_cast<std::size_t>(dims_.channels) * e.z))];
    slot = std::min(slot, e.t);
  }
}

void SpikeGrid::gather(int x, int y, int z, const LayerConfig& config, std::vector<InputSpike>& out) const {
  out.clear();
  int s = 0;
  for (int c = 0; c < config.input_channels; ++c)
    for (int m = 0; m < config.kernel_t; ++m)
      for (int j = 0; j < config.kernel_h; ++j)
        for (int i = 0; i < config.kernel_w; ++i, ++s) {
          const double t = time(x + i, y + j, c, z + m);
          if (t != kInf) out.push_back({s, t});
        }
  std::sort(out.begin(), out.end(), input_before);
}

SpikingConvLayer::SpikingConvLayer(const LayerConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {
  config_.validate();
  weights_.resize(static_cast<std::size_t>(config_.filters) * config_.synapses());
  for (double& w : weights_) w = rng_.uniform();
  thresholds_.resize(static_cast<std::size_t>(config_.filters));
  for (double& th : thresholds_)
    th = std::max(config_.homeo.min_threshold, rng_.normal(config_.homeo.initial_mean, config_.homeo.initial_sd));
}

void SpikingConvLayer::check_invariants() const {
  if (weights_.size() != static_cast<std::size_t>(config_.filters) * config_.synapses())
    throw TrainingError("weight tensor shape does not match layer config");
  if (thresholds_.size() != static_cast<std::size_t>(config_.filters))
    throw TrainingError("threshold vector length does not match filter count");
  for (double w : weights_)
    if (!(w >= 0.0 && w <= 1.0)) throw TrainingError("weight outside [0,1]");
  for (double th : thresholds_)
    if (!(th >= config_.homeo.min_threshold)) throw TrainingError("threshold below minimum");
}

bool SpikingConvLayer::operator==(const SpikingConvLayer& other) const {
  return serialize() == other.serialize();
}

std::vector<std::uint8_t> SpikingConvLayer::serialize() const {
  ByteWriter w;
  w.magic("STLC");
  w.u32(kCheckpointVersion);
  const auto& c = config_;
  for (int v : {c.kernel_w, c.kernel_h, c.kernel_t, c.filters, c.stride_x, c.stride_y, c.stride_t,
                c.input_channels})
    w.u32(static_cast<std::uint32_t>(v));
  for (double v : {c.target_time, c.t_exposition, c.stdp.learning_rate, c.stdp.tau, c.homeo.learning_rate,
                   c.homeo.min_threshold, c.homeo.initial_mean, c.homeo.initial_sd})
    w.f64(v);
  w.u32(c.homeo.silent_decay ? 1 : 0);
  w.f64s(weights_);
  w.f64s(thresholds_);
  w.str(rng_.serialize());
  return w.bytes();
}

SpikingConvLayer SpikingConvLayer::deserialize(std::vector<std::uint8_t> bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("STLC");
  if (const auto version = r.u32(); version != kCheckpointVersion)
    throw IngestError(source + ": unsupported checkpoint version " + std::to_string(version));
  SpikingConvLayer layer;
  auto& c = layer.config_;
  for (int* v : {&c.kernel_w, &c.kernel_h, &c.kernel_t, &c.filters, &c.stride_x, &c.stride_y, &c.stride_t,
                 &c.input_channels})
    *v = static_cast<int>(r.u32());
  for (double* v : {&c.target_time, &c.t_exposition, &c.stdp.learning_rate, &c.stdp.tau, &c.homeo.learning_rate,
                    &c.homeo.min_threshold, &c.homeo.initial_mean, &c.homeo.initial_sd})
    *v = r.f64();
  c.homeo.silent_decay = r.u32() != 0;
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw IngestError(source + ": invalid layer config: " + e.what());
  }
  layer.weights_.resize(static_cast<std::size_t>(c.filters) * c.synapses());
  layer.thresholds_.resize(static_cast<std::size_t>(c.filters));
  r.f64s(layer.weights_);
  r.f64s(layer.thresholds_);
  layer.rng_.deserialize(r.str());
  r.expect_end();
  try {
    layer.check_invariants();
  } catch (const TrainingError& e) {
    throw IngestError(source + ": " + e.what());
  }
  return layer;
}

void SpikingConvLayer::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

SpikingConvLayer SpikingConvLayer::load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path), path.string());
}

void adapt_thresholds(SpikingConvLayer& layer, int winner, double t, int competitors) {
  const auto& cfg = layer.config();
  const double eta = cfg.homeo.learning_rate;
  const double target_term = -eta * (t - cfg.target_time);
  auto th = layer.thresholds();
  for (int k = 0; k < layer.filters(); ++k) {
    double delta = target_term;
    if (competitors > 1) delta += (k == winner) ? eta : -eta / competitors;
    th[k] = std::max(cfg.homeo.min_threshold, th[k] + delta);
  }
}

SpikingTensor conv_forward(const SpikingTensor& sample, const SpikingConvLayer& layer, Competition competition) {
  const auto& cfg = layer.config();
  const auto shape = conv_output_shape(sample.dims, cfg);
  const SpikeGrid grid(sample);
  SpikingTensor out;
  out.dims = {shape.width, shape.height, shape.filters, shape.depth};
  std::vector<InputSpike> field;
  for (int oz = 0; oz < shape.depth; ++oz)
    for (int oy = 0; oy < shape.height; ++oy)
      for (int ox = 0; ox < shape.width; ++ox) {
        grid.gather(ox * cfg.stride_x, oy * cfg.stride_y, oz * cfg.stride_t, cfg, field);
        if (field.empty()) continue;
        int best_k = -1;
        double best_t = kInf;
        for (int k = 0; k < shape.filters; ++k) {
          const auto fire = integrate(field, layer.weights(k), layer.thresholds()[k], cfg.t_exposition);
          if (!fire) continue;
          if (competition == Competition::Off) {
            out.events.push_back({ox, oy, oz, k, *fire});
          } else if (*fire < best_t) {
            best_t = *fire;
            best_k = k;
          }
        }
        if (competition == Competition::On && best_k >= 0) out.events.push_back({ox, oy, oz, best_k, best_t});
      }
  out.canonicalize();
  return out;
}

SpikingTensor infer(const SpikingTensor& sample, const SpikingConvLayer& layer) {
  return conv_forward(sample, layer, Competition::Off);
}

std::vector<Patch> sample_patches(const SpikeGrid& grid, const LayerConfig& config, std::size_t count, Rng& rng) {
  conv_output_shape(grid.dims(), config);  // validates the window against the input
  std::vector<Patch> patches;
  patches.reserve(count);
  // Patches are taken at any valid window position, independent of the stride.
  const auto nx = static_cast<std::uint64_t>(grid.dims().width - config.kernel_w + 1);
  const auto ny = static_cast<std::uint64_t>(grid.dims().height - config.kernel_h + 1);
  const auto nz = static_cast<std::uint64_t>(grid.dims().depth - config.kernel_t + 1);
  for (std::size_t i = 0; i < count; ++i) {
    Patch p;
    p.x = static_cast<int>(rng.below(nx));
    p.y = static_cast<int>(rng.below(ny));
    p.z = static_cast<int>(rng.below(nz));
    grid.gather(p.x, p.y, p.z, config, p.events);
    patches.push_back(std::move(p));
  }
  return patches;
}

std::vector<Patch> sample_patches(const SpikingTensor& sample, const LayerConfig& config, std::size_t count,
                                  Rng& rng) {
  return sample_patches(SpikeGrid(sample), config, count, rng);
}

PatchOutcome train_on_patch(SpikingConvLayer& layer, std::span<const InputSpike> events) {
  const auto& cfg = layer.config();
  PatchOutcome outcome;
  for (int k = 0; k < layer.filters(); ++k) {
    const auto fire = integrate(events, layer.weights(k), layer.thresholds()[k], cfg.t_exposition);
    if (fire && *fire < outcome.fire_time) {
      outcome.fire_time = *fire;
      outcome.winner = k;
    }
  }
  if (!outcome.winner) {
    if (cfg.homeo.silent_decay) {
      const double delta = -cfg.homeo.learning_rate * (cfg.t_exposition - cfg.target_time);
      for (double& th : layer.thresholds()) th = std::max(cfg.homeo.min_threshold, th + delta);
    }
    return outcome;
  }

  std::vector<double> pre(static_cast<std::size_t>(layer.synapses()), kInf);
  for (const auto& e : events) pre[static_cast<std::size_t>(e.synapse)] = std::min(pre[e.synapse], e.t);
  auto w = layer.weights(*outcome.winner);
  for (std::size_t s = 0; s < w.size(); ++s) {
    const std::optional<double> t_pre = pre[s] == kInf ? std::nullopt : std::optional<double>(pre[s]);
    w[s] = stdp_update(w[s], t_pre, outcome.fire_time, cfg.stdp, cfg.t_exposition);
  }
  outcome.stdp_updates = 1;
  adapt_thresholds(layer, *outcome.winner, outcome.fire_time, layer.filters());
  return outcome;
}

TrainingStats train_layer(SpikingConvLayer& layer, std::span<const SpikingTensor> clips, int patches_per_clip,
                          int epochs, Rng& rng) {
  std::vector<const SpikingTensor*> refs;
  refs.reserve(clips.size());
  for (const auto& c : clips) refs.push_back(&c);
  return train_layer(layer, std::span<const SpikingTensor* const>(refs), patches_per_clip, epochs, rng);
}

TrainingStats train_layer(SpikingConvLayer& layer, std::span<const SpikingTensor* const> clips, int patches_per_clip,
                          int epochs, Rng& rng) {
  if (patches_per_clip < 0 || epochs < 0) throw ParameterError("patch count and epochs must be >= 0");
  TrainingStats stats;
  stats.wins.assign(static_cast<std::size_t>(layer.filters()), 0);
  std::vector<std::size_t> order(clips.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::size_t fired_this_epoch = 0;
    std::size_t events_this_epoch = 0;
    for (std::size_t idx : order) {
      const SpikeGrid grid(*clips[idx]);
      for (const auto& patch : sample_patches(grid, layer.config(), static_cast<std::size_t>(patches_per_clip), rng)) {
        const auto outcome = train_on_patch(layer, patch.events);
        ++stats.patches;
        events_this_epoch += patch.events.size();
        stats.stdp_updates += static_cast<std::size_t>(outcome.stdp_updates);
        stats.max_updates_per_patch = std::max(stats.max_updates_per_patch, outcome.stdp_updates);
        if (outcome.winner) {
          ++stats.patches_fired;
          ++fired_this_epoch;
          ++stats.wins[static_cast<std::size_t>(*outcome.winner)];
        }
      }
    }
    stats.input_events += events_this_epoch;
    if (fired_this_epoch == 0 && !clips.empty() && patches_per_clip > 0) {
      ++stats.stalled_epochs;
      const auto th = layer.thresholds();
      const auto [lo, hi] = std::minmax_element(th.begin(), th.end());
      std::ostringstream msg;
      msg << "warning: training stalled in epoch " << epoch << ": no patch fired (thresholds " << *lo << ".." << *hi
          << ", " << events_this_epoch << " input events)\n";
      std::clog << msg.str();
    }
  }
  return stats;
}

}  // namespace stsnn
