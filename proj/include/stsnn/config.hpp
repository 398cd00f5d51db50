#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stsnn/classifier.hpp"
#include "stsnn/feature_pipeline.hpp"
#include "stsnn/motion_streams.hpp"
#include "stsnn/retina_codec.hpp"
#include "stsnn/snn_engine.hpp"
#include "stsnn/video_io.hpp"

namespace stsnn {

enum class StreamKind { Raw, EarlyFusion, OpticalFlow, FrameSubtraction, MotionGrid, Conv3d, FrameSubtractionConv3d };

std::string to_string(StreamKind kind);
StreamKind parse_stream_kind(const std::string& name);
/// Column label used in report tables, e.g. "FS (2D conv)".
std::string stream_label(StreamKind kind);
bool uses_3d_layer(StreamKind kind);
/// Channel count after the retina filter (on/off per input channel).
int stream_channels(StreamKind kind);

struct StreamSpec {
  StreamKind kind = StreamKind::Raw;
  LayerConfig layer;
  int patches_per_clip = 20;
  int epochs = 1;
  PoolSpec pool;

  void validate() const;
};

struct DatasetSpec {
  bool synthetic = true;
  SyntheticSpec synth;
  std::filesystem::path manifest;
  /// Base for relative clip paths; defaults to the manifest's directory.
  std::filesystem::path root;
  /// Optional directory of precomputed `<clip_id>.stof` flow files.
  std::filesystem::path flow_dir;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  ClipSpec clip;
  DoGParams dog;
  double t_exposition = 1.0;
  FlowParams flow;
  StreamSpec spatial;
  StreamSpec temporal;
  SvmParams svm;
  bool fusion_normalize = true;
  int runs = 3;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  void validate() const;
};

/// Raw `key = value` pairs; '#' starts a comment. Duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source = "config");

/// Builds a config from key/value pairs over the defaults. Unknown keys are an error.
ExperimentConfig config_from_pairs(const std::map<std::string, std::string>& pairs, const std::string& source = "config");
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies `key=value` overrides on top of a config file's pairs.
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// Canonical text of every field (fixed order, round-trip precision); used for hashing.
std::string canonical_text(const ExperimentConfig& config);
std::string canonical_text(const StreamSpec& stream);

}  // namespace stsnn
