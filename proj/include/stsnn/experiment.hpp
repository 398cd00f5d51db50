#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stsnn/classifier.hpp"
#include "stsnn/config.hpp"
#include "stsnn/feature_pipeline.hpp"
#include "stsnn/snn_engine.hpp"

namespace stsnn {

/// Content-addressed artifact store: <dir>/<stage>/<key>.bin. Disabled when the directory is empty.
class PipelineCache {
 public:
  PipelineCache() = default;
  explicit PipelineCache(std::filesystem::path dir) : dir_(std::move(dir)) {}
  /// Uses $STSNN_CACHE_DIR when set, otherwise disabled.
  static PipelineCache from_environment();

  bool enabled() const { return !dir_.empty(); }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(std::string_view stage, std::string_view key) const;
  std::optional<std::vector<std::uint8_t>> get(std::string_view stage, std::string_view key) const;
  /// Atomic write; failures are reported on stderr and otherwise ignored.
  void put(std::string_view stage, std::string_view key, std::span<const std::uint8_t> bytes) const;

  /// 16 hex digits of FNV-1a over the description.
  static std::string hash_key(std::string_view description);

 private:
  std::filesystem::path dir_;
};

/// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

enum class StreamRole { Spatial, Temporal };

std::string to_string(StreamRole role);
/// Accepts "spatial", "temporal", or "<role>.<kind>" (the kind overrides the config).
StreamRole parse_stream_selector(const std::string& selector, ExperimentConfig& config);
const StreamSpec& stream_spec(const ExperimentConfig& config, StreamRole role);
/// "spatial:raw", "temporal:frame-subtraction", ...
std::string stream_id(const ExperimentConfig& config, StreamRole role);

struct PreparedDataset {
  DatasetManifest manifest;
  std::vector<VideoTensor> clips;  // after frame sampling and rescaling
  std::vector<Fold> folds;
  std::string fingerprint;
};

PreparedDataset prepare_dataset(const ExperimentConfig& config);

/// Stream preprocessing before the retina filter. `flows` (one per frame pair)
/// replaces flow estimation when given.
VideoTensor stream_frames(const VideoTensor& clip, StreamKind kind, const FlowParams& flow,
                          const std::vector<FlowField>* flows = nullptr);

/// Preprocessing, DoG on/off filtering and latency coding of one clip.
SpikingTensor encode_stream(const VideoTensor& clip, const ExperimentConfig& config, StreamRole role,
                            const std::vector<FlowField>* flows = nullptr);

std::vector<SpikingTensor> encode_dataset(const PreparedDataset& data, const ExperimentConfig& config, StreamRole role,
                                          const PipelineCache& cache, int jobs = 1);

std::vector<std::uint8_t> serialize_spikes(const SpikingTensor& spikes);
SpikingTensor deserialize_spikes(std::vector<std::uint8_t> bytes, const std::string& source = "spikes");

struct StreamTraining {
  SpikingConvLayer layer;
  TrainingStats stats;
};

/// Trains a fresh layer on the fold's training clips. Seeds derive from the run seed, role and fold.
StreamTraining train_stream(std::span<const SpikingTensor> encoded, const Fold& fold, const ExperimentConfig& config,
                            StreamRole role, std::size_t fold_index, std::uint64_t run_seed);

FeatureVector extract_features(const SpikingTensor& encoded, const SpikingConvLayer& layer, const StreamSpec& spec,
                               const std::string& stream);

/// SVM input: single-stream vectors are L2-normalized; fused vectors are used as they are.
std::vector<float> svm_input(const FeatureVector& v);

/// Trains on the fold's training samples and evaluates on its test samples.
EvalResult classify_fold(std::span<const FeatureVector> features, const DatasetManifest& manifest, const Fold& fold,
                         const SvmParams& svm, std::uint64_t run_seed, const std::string& column,
                         std::size_t fold_index, SvmModel* model_out = nullptr);

struct ResultLine {
  std::string experiment;
  std::string stream;
  int run = 0;
  double accuracy = 0.0;
};

std::string format_result_line(const ResultLine& line);
/// Reads every `experiment,stream,run,accuracy` line of a text, ignoring other lines.
std::vector<ResultLine> parse_result_lines(const std::string& text, const std::string& source = "results");
/// Table per experiment ("stream A | stream B | Fused", mean ± std) followed by the canonical result lines.
std::string format_report(std::vector<ResultLine> lines);

struct RunOptions {
  PipelineCache cache;
  int jobs = 1;
};

struct ExperimentResult {
  std::vector<ResultLine> lines;
  std::string report;
  /// [column][run], columns ordered spatial, temporal, fused; folds merged.
  std::array<std::vector<EvalResult>, 3> evaluations;
  std::array<RunSummary, 3> summaries;
  /// [role][run * folds + fold]
  std::array<std::vector<TrainingStats>, 2> training;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace stsnn
