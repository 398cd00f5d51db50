#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stsnn/rng.hpp"

namespace stsnn {

/// Single-channel 2D map of values, x fastest.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  float& operator()(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  float operator()(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Clamp-to-edge read.
  float at_clamped(int x, int y) const;

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  bool operator==(const Plane&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

/// l_w x l_h x l_c x l_td tensor of values in [0,1].
///
/// Storage order is x fastest, then y, then channel, then frame; the binary
/// clip format writes values in exactly this order.
class VideoTensor {
 public:
  VideoTensor() = default;
  VideoTensor(int width, int height, int channels, int depth, float fill = 0.0f);

  /// Builds a single-channel clip from equally sized frames.
  static VideoTensor from_frames(std::span<const Plane> frames);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  int depth() const { return depth_; }

  std::size_t index(int x, int y, int c, int n) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(width_) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(height_) *
                    (static_cast<std::size_t>(c) + static_cast<std::size_t>(channels_) * n));
  }
  float& at(int x, int y, int c, int n) { return values_[index(x, y, c, n)]; }
  float at(int x, int y, int c, int n) const { return values_[index(x, y, c, n)]; }

  Plane plane(int c, int n) const;
  void set_plane(int c, int n, const Plane& plane);

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  /// Throws IngestError if a dimension is zero or a value leaves [0,1].
  void validate() const;

  bool operator==(const VideoTensor&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  int depth_ = 0;
  std::vector<float> values_;
};

struct ClipSpec {
  int frames_per_clip = 10;
  int frame_stride = 4;
  double spatial_scale = 0.5;

  void validate() const;
};

struct ResizeResult {
  Plane plane;
  bool warning = false;  // input had a 1-pixel dimension and was returned unchanged
};

/// Bilinear resize, half-pixel centers (corners not aligned), replicate border.
Plane resize_bilinear(const Plane& src, int out_width, int out_height);
/// Halves both dimensions (ceil) with resize_bilinear.
ResizeResult resize_half(const Plane& src);
/// Rec. 601 luma for 3-channel frames; identity for 1 channel.
Plane to_luminance(const VideoTensor& source, int frame);

/// Source frame indices for a clip: {0, s, 2s, ...} below the source length,
/// repeated cyclically until `frames_per_clip` entries exist.
std::vector<int> sample_frame_indices(int source_length, const ClipSpec& spec);

/// Samples, converts to luminance and rescales a frame sequence (any channel count).
VideoTensor load_clip(const VideoTensor& source, const ClipSpec& spec);

// Clip binary format: "STVT", u32 width, height, channels, depth, then f32 values
// in storage order. Everything little-endian.
void write_clip(const std::filesystem::path& path, const VideoTensor& clip);
VideoTensor read_clip(const std::filesystem::path& path);

/// Reads a directory of binary PGM/PPM frames (sorted by file name) as a
/// source sequence normalized to [0,1].
VideoTensor read_frame_directory(const std::filesystem::path& dir);
void write_pgm(const std::filesystem::path& path, const Plane& plane);

enum class SplitProtocol { FixedSubject, LeaveOneSubjectOut, ClassThirds };

std::string to_string(SplitProtocol protocol);
SplitProtocol parse_split_protocol(const std::string& name);

struct ManifestEntry {
  std::string clip_id;
  std::string subject;
  int label = 0;
  std::string path;
};

struct DatasetManifest {
  std::vector<ManifestEntry> samples;
  std::vector<std::string> class_names;
  SplitProtocol protocol = SplitProtocol::ClassThirds;

  /// Label range, unique clip ids, and subject presence for subject protocols.
  void validate() const;
};

struct Fold {
  std::string name;
  std::vector<std::size_t> train;  // indices into DatasetManifest::samples
  std::vector<std::size_t> test;
};

/// KTH train/test subject lists used by the fixed-subject protocol. The
/// validation subjects are excluded from both.
const std::vector<int>& kth_train_subjects();
const std::vector<int>& kth_validation_subjects();
const std::vector<int>& kth_test_subjects();

std::vector<Fold> make_splits(const DatasetManifest& manifest);

/// Manifest text: optional `# protocol = <name>` and `# classes = a,b,...`
/// directives, then `clip_id<TAB>subject<TAB>class<TAB>path` lines.
std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text, const std::string& source = "manifest");
DatasetManifest read_manifest(const std::filesystem::path& path);

enum class MotionKind { BarLeft, BarRight, BarUp, BarDown, StaticA, StaticB };

std::string to_string(MotionKind kind);
MotionKind parse_motion_kind(const std::string& name);

struct SyntheticSpec {
  std::vector<MotionKind> classes;
  int n_per_class = 5;
  int width = 80;
  int height = 80;
  int frames = 40;
  /// Bar texture variants cycled over the clips of a class (1 = solid only, 2 = solid/striped).
  int textures = 1;
  /// Amplitude of the per-clip frozen background noise.
  double background_noise = 0.05;
  /// Amplitude of independent per-frame noise (noisy-background variant).
  double temporal_noise = 0.0;
  std::uint64_t seed = 1;
  SplitProtocol protocol = SplitProtocol::ClassThirds;
};

/// Ground truth of a rendered bar; `speed` is signed px/frame along the motion axis.
struct BarTrack {
  bool moving = false;
  bool horizontal = false;  // moves along x (bar is vertical)
  int start = 0;
  int speed = 0;
  int thickness = 0;
  int span_begin = 0;  // extent along the other axis
  int span_end = 0;
  int texture = 0;
};

struct SyntheticDataset {
  DatasetManifest manifest;
  std::vector<VideoTensor> sources;  // full-resolution frame sequences
  std::vector<BarTrack> tracks;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace stsnn
