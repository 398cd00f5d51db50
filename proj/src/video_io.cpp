#include "stsnn/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"

namespace stsnn {

Plane::Plane(int width, int height, float fill)
    : width_(width), height_(height),
      values_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
  if (width < 0 || height < 0) throw ParameterError("negative plane dimensions");
}

float Plane::at_clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return (*this)(x, y);
}

VideoTensor::VideoTensor(int width, int height, int channels, int depth, float fill)
    : width_(width), height_(height), channels_(channels), depth_(depth) {
  if (width < 0 || height < 0 || channels < 0 || depth < 0)
    throw ParameterError("negative tensor dimensions");
  values_.assign(static_cast<std::size_t>(width) * height * channels * depth, fill);
}

VideoTensor VideoTensor::from_frames(std::span<const Plane> frames) {
  if (frames.empty()) throw IngestError("empty input: no frames");
  VideoTensor out(frames[0].width(), frames[0].height(), 1, static_cast<int>(frames.size()));
  for (std::size_t n = 0; n < frames.size(); ++n) {
    if (frames[n].width() != out.width_ || frames[n].height() != out.height_)
      throw InputError("frame " + std::to_string(n) + " has mismatched dimensions");
    out.set_plane(0, static_cast<int>(n), frames[n]);
  }
  return out;
}

Plane VideoTensor::plane(int c, int n) const {
  Plane p(width_, height_);
  const auto base = index(0, 0, c, n);
  std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(base), p.size(), p.values().begin());
  return p;
}

void VideoTensor::set_plane(int c, int n, const Plane& plane) {
  if (plane.width() != width_ || plane.height() != height_)
    throw InputError("plane dimensions do not match tensor");
  std::copy(plane.values().begin(), plane.values().end(),
            values_.begin() + static_cast<std::ptrdiff_t>(index(0, 0, c, n)));
}

void VideoTensor::validate() const {
  if (width_ < 1 || height_ < 1 || channels_ < 1 || depth_ < 1)
    throw IngestError("tensor dimensions must all be >= 1");
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw IngestError("tensor value outside [0,1]");
  }
}

void ClipSpec::validate() const {
  if (frames_per_clip < 1) throw ParameterError("frames_per_clip must be >= 1");
  if (frame_stride < 1) throw ParameterError("frame_stride must be >= 1");
  if (!(spatial_scale > 0.0 && spatial_scale <= 1.0)) throw ParameterError("spatial_scale must be in (0,1]");
}

Plane resize_bilinear(const Plane& src, int out_width, int out_height) {
  if (out_width < 1 || out_height < 1) throw ParameterError("resize target must be >= 1x1");
  if (out_width == src.width() && out_height == src.height()) return src;
  Plane out(out_width, out_height);
  const double sx = static_cast<double>(src.width()) / out_width;
  const double sy = static_cast<double>(src.height()) / out_height;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * src(x0, y0) + wx * src(x1, y0);
      const double bottom = (1.0 - wx) * src(x0, y1) + wx * src(x1, y1);
      out(x, y) = static_cast<float>((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

ResizeResult resize_half(const Plane& src) {
  if (src.width() < 2 || src.height() < 2) {
    std::clog << "warning: resize_half on a " << src.width() << "x" << src.height()
              << " frame; returning input unchanged\n";
    return {src, true};
  }
  return {resize_bilinear(src, (src.width() + 1) / 2, (src.height() + 1) / 2), false};
}

Plane to_luminance(const VideoTensor& source, int frame) {
  if (source.channels() == 1) return source.plane(0, frame);
  if (source.channels() != 3)
    throw IngestError("expected 1 or 3 channels, got " + std::to_string(source.channels()));
  Plane out(source.width(), source.height());
  for (int y = 0; y < source.height(); ++y)
    for (int x = 0; x < source.width(); ++x)
      out(x, y) = static_cast<float>(0.299 * source.at(x, y, 0, frame) + 0.587 * source.at(x, y, 1, frame) +
                                     0.114 * source.at(x, y, 2, frame));
  return out;
}

std::vector<int> sample_frame_indices(int source_length, const ClipSpec& spec) {
  spec.validate();
  if (source_length < 1) throw IngestError("empty input: source has no frames");
  const int distinct = (source_length + spec.frame_stride - 1) / spec.frame_stride;
  std::vector<int> indices(static_cast<std::size_t>(spec.frames_per_clip));
  for (int k = 0; k < spec.frames_per_clip; ++k) indices[k] = (k % distinct) * spec.frame_stride;
  return indices;
}

VideoTensor load_clip(const VideoTensor& source, const ClipSpec& spec) {
  if (source.depth() < 1 || source.width() < 1 || source.height() < 1)
    throw IngestError("empty input: source has no frames");
  source.validate();
  const auto indices = sample_frame_indices(source.depth(), spec);
  std::vector<Plane> frames;
  frames.reserve(indices.size());
  for (int idx : indices) {
    Plane luma = to_luminance(source, idx);
    if (spec.spatial_scale == 0.5) {
      luma = resize_half(luma).plane;
    } else if (spec.spatial_scale < 1.0) {
      const int w = std::max(1, static_cast<int>(std::ceil(luma.width() * spec.spatial_scale)));
      const int h = std::max(1, static_cast<int>(std::ceil(luma.height() * spec.spatial_scale)));
      luma = resize_bilinear(luma, w, h);
    }
    for (float& v : luma.values()) v = std::clamp(v, 0.0f, 1.0f);
    frames.push_back(std::move(luma));
  }
  return VideoTensor::from_frames(frames);
}

void write_clip(const std::filesystem::path& path, const VideoTensor& clip) {
  ByteWriter w;
  w.magic("STVT");
  w.u32(static_cast<std::uint32_t>(clip.width()));
  w.u32(static_cast<std::uint32_t>(clip.height()));
  w.u32(static_cast<std::uint32_t>(clip.channels()));
  w.u32(static_cast<std::uint32_t>(clip.depth()));
  w.f32s(clip.values());
  write_file_atomic(path, w.bytes());
}

VideoTensor read_clip(const std::filesystem::path& path) {
  ByteReader r(read_file_bytes(path), path.string());
  r.expect_magic("STVT");
  const auto w = r.u32(), h = r.u32(), c = r.u32(), d = r.u32();
  if (w == 0 || h == 0 || c == 0 || d == 0) throw IngestError(path.string() + ": zero dimension");
  if (static_cast<std::uint64_t>(w) * h * c * d > (1ULL << 31))
    throw IngestError(path.string() + ": implausible dimensions");
  VideoTensor clip(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c), static_cast<int>(d));
  r.f32s(clip.values());
  r.expect_end();
  clip.validate();
  return clip;
}

namespace {

struct Netpbm {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;  // interleaved, normalized
};

Netpbm read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("unreadable frame '" + path.string() + "'");
  std::string magic;
  in >> magic;
  const bool binary = magic == "P5" || magic == "P6";
  const bool ascii = magic == "P2" || magic == "P3";
  if (!binary && !ascii) throw IngestError("unreadable frame '" + path.string() + "': not a PGM/PPM file");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    int v = -1;
    in >> v;
    if (!in) throw IngestError("unreadable frame '" + path.string() + "': bad header");
    return v;
  };
  Netpbm img;
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  img.channels = (magic == "P6" || magic == "P3") ? 3 : 1;
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 65535)
    throw IngestError("unreadable frame '" + path.string() + "': bad header");
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.values.resize(count);
  if (binary) {
    in.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(count * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
      throw IngestError("unreadable frame '" + path.string() + "': truncated pixel data");
    for (std::size_t i = 0; i < count; ++i) {
      const int v = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
      img.values[i] = static_cast<float>(static_cast<double>(v) / maxval);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      int v = -1;
      in >> v;
      if (!in || v < 0 || v > maxval)
        throw IngestError("unreadable frame '" + path.string() + "': bad pixel data");
      img.values[i] = static_cast<float>(static_cast<double>(v) / maxval);
    }
  }
  return img;
}

}  // namespace

VideoTensor read_frame_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IngestError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(entry.path());
  }
  if (files.empty()) throw IngestError("empty input: no frames in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  std::vector<Netpbm> frames;
  for (const auto& f : files) frames.push_back(read_netpbm(f));
  const auto& first = frames.front();
  VideoTensor out(first.width, first.height, first.channels, static_cast<int>(frames.size()));
  for (std::size_t n = 0; n < frames.size(); ++n) {
    const auto& fr = frames[n];
    if (fr.width != first.width || fr.height != first.height || fr.channels != first.channels)
      throw IngestError("unreadable frame '" + files[n].string() + "': dimensions differ from first frame");
    for (int y = 0; y < fr.height; ++y)
      for (int x = 0; x < fr.width; ++x)
        for (int c = 0; c < fr.channels; ++c)
          out.at(x, y, c, static_cast<int>(n)) =
              fr.values[(static_cast<std::size_t>(y) * fr.width + x) * fr.channels + c];
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Plane& plane) {
  std::ostringstream os;
  os << "P5\n" << plane.width() << ' ' << plane.height() << "\n255\n";
  std::string header = os.str();
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (float v : plane.values())
    bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  write_file_atomic(path, bytes);
}

std::string to_string(SplitProtocol protocol) {
  switch (protocol) {
    case SplitProtocol::FixedSubject: return "fixed-subject-split";
    case SplitProtocol::LeaveOneSubjectOut: return "leave-one-subject-out";
    case SplitProtocol::ClassThirds: return "class-thirds";
  }
  return "?";
}

SplitProtocol parse_split_protocol(const std::string& name) {
  if (name == "fixed-subject-split") return SplitProtocol::FixedSubject;
  if (name == "leave-one-subject-out") return SplitProtocol::LeaveOneSubjectOut;
  if (name == "class-thirds") return SplitProtocol::ClassThirds;
  throw ParameterError("unknown split protocol '" + name + "'");
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  const bool needs_subjects = protocol != SplitProtocol::ClassThirds;
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= static_cast<int>(class_names.size()))
      throw ManifestError("sample '" + s.clip_id + "' has label outside class list");
    if (!ids.insert(s.clip_id).second) throw ManifestError("duplicate clip id '" + s.clip_id + "'");
    if (needs_subjects && s.subject.empty())
      throw ManifestError("sample '" + s.clip_id + "' lacks a subject id required by " + to_string(protocol));
  }
}

const std::vector<int>& kth_train_subjects() {
  static const std::vector<int> s{11, 12, 13, 14, 15, 16, 17, 18};
  return s;
}
const std::vector<int>& kth_validation_subjects() {
  static const std::vector<int> s{19, 20, 21, 23, 24, 25, 1, 4};
  return s;
}
const std::vector<int>& kth_test_subjects() {
  static const std::vector<int> s{2, 3, 5, 6, 7, 8, 9, 10, 22};
  return s;
}

namespace {

int subject_number(const ManifestEntry& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s.subject, &used);
    if (used != s.subject.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ManifestError("sample '" + s.clip_id + "': subject '" + s.subject + "' is not a KTH subject number");
  }
}

}  // namespace

std::vector<Fold> make_splits(const DatasetManifest& manifest) {
  manifest.validate();
  std::vector<Fold> folds;
  switch (manifest.protocol) {
    case SplitProtocol::FixedSubject: {
      const auto& tr = kth_train_subjects();
      const auto& te = kth_test_subjects();
      Fold f{"kth", {}, {}};
      for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
        const int subj = subject_number(manifest.samples[i]);
        if (std::find(tr.begin(), tr.end(), subj) != tr.end()) f.train.push_back(i);
        else if (std::find(te.begin(), te.end(), subj) != te.end()) f.test.push_back(i);
      }
      if (f.train.empty() || f.test.empty()) throw ManifestError("fixed-subject split leaves an empty partition");
      folds.push_back(std::move(f));
      break;
    }
    case SplitProtocol::LeaveOneSubjectOut: {
      std::vector<std::string> subjects;
      for (const auto& s : manifest.samples)
        if (std::find(subjects.begin(), subjects.end(), s.subject) == subjects.end()) subjects.push_back(s.subject);
      if (subjects.size() < 2)
        throw ManifestError("leave-one-subject-out needs at least 2 subjects (training set would be empty)");
      for (const auto& subj : subjects) {
        Fold f{"subject-" + subj, {}, {}};
        for (std::size_t i = 0; i < manifest.samples.size(); ++i)
          (manifest.samples[i].subject == subj ? f.test : f.train).push_back(i);
        folds.push_back(std::move(f));
      }
      break;
    }
    case SplitProtocol::ClassThirds: {
      Fold f{"class-thirds", {}, {}};
      std::vector<int> seen(manifest.class_names.size(), 0);
      for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
        const int pos = seen[manifest.samples[i].label]++;
        (pos % 3 == 2 ? f.test : f.train).push_back(i);
      }
      if (f.train.empty() || f.test.empty()) throw ManifestError("class-thirds split leaves an empty partition");
      folds.push_back(std::move(f));
      break;
    }
  }
  return folds;
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::ostringstream os;
  os << "# protocol = " << to_string(manifest.protocol) << '\n';
  os << "# classes = ";
  for (std::size_t i = 0; i < manifest.class_names.size(); ++i) os << (i ? "," : "") << manifest.class_names[i];
  os << '\n';
  for (const auto& s : manifest.samples)
    os << s.clip_id << '\t' << s.subject << '\t' << manifest.class_names.at(s.label) << '\t' << s.path << '\n';
  return os.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const std::string& source) {
  DatasetManifest m;
  bool classes_fixed = false;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const auto key = trim(body.substr(0, eq));
      const auto value = trim(body.substr(eq + 1));
      if (key == "protocol") {
        m.protocol = parse_split_protocol(value);
      } else if (key == "classes") {
        for (auto& c : split(value, ',')) m.class_names.push_back(trim(c));
        classes_fixed = true;
      }
      continue;
    }
    const auto cols = split(line, '\t');
    if (cols.size() != 4)
      throw ManifestError(source + ":" + std::to_string(lineno) + ": expected 4 tab-separated columns");
    auto it = std::find(m.class_names.begin(), m.class_names.end(), cols[2]);
    if (it == m.class_names.end()) {
      if (classes_fixed)
        throw ManifestError(source + ":" + std::to_string(lineno) + ": unknown class '" + cols[2] + "'");
      m.class_names.push_back(cols[2]);
      it = m.class_names.end() - 1;
    }
    m.samples.push_back({cols[0], cols[1], static_cast<int>(it - m.class_names.begin()), cols[3]});
  }
  m.validate();
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text_file(path), path.string());
}

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::BarLeft: return "bar-left";
    case MotionKind::BarRight: return "bar-right";
    case MotionKind::BarUp: return "bar-up";
    case MotionKind::BarDown: return "bar-down";
    case MotionKind::StaticA: return "static-A";
    case MotionKind::StaticB: return "static-B";
  }
  return "?";
}

MotionKind parse_motion_kind(const std::string& name) {
  for (auto k : {MotionKind::BarLeft, MotionKind::BarRight, MotionKind::BarUp, MotionKind::BarDown,
                 MotionKind::StaticA, MotionKind::StaticB})
    if (to_string(k) == name) return k;
  throw ParameterError("unknown synthetic class '" + name + "'");
}

namespace {

constexpr float kBackgroundLevel = 0.25f;
constexpr float kBarLevel = 0.9f;
constexpr float kStripeLevel = 0.6f;

float static_texture(MotionKind kind, int x, int y) {
  if (kind == MotionKind::StaticA) return ((x / 6 + y / 6) % 2) ? 0.75f : 0.3f;  // checkerboard
  return ((x + y) / 5 % 2) ? 0.7f : 0.35f;                                      // diagonal stripes
}

BarTrack make_track(MotionKind kind, const SyntheticSpec& spec, int texture, Rng& rng) {
  BarTrack t;
  if (kind == MotionKind::StaticA || kind == MotionKind::StaticB) return t;
  t.moving = true;
  t.horizontal = kind == MotionKind::BarLeft || kind == MotionKind::BarRight;
  t.texture = texture;
  const int along = t.horizontal ? spec.width : spec.height;
  const int across = t.horizontal ? spec.height : spec.width;
  t.thickness = std::max(2, along / 13);
  const int magnitude = 1 + static_cast<int>(rng.below(2));
  const int jitter = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, along / 10))));
  const bool forward = kind == MotionKind::BarRight || kind == MotionKind::BarDown;
  t.speed = forward ? magnitude : -magnitude;
  t.start = forward ? jitter : along - t.thickness - jitter;
  const int length = std::max(2, across * 6 / 10);
  const int slack = across - length;
  t.span_begin = slack > 0 ? static_cast<int>(rng.below(static_cast<std::uint64_t>(slack + 1))) : 0;
  t.span_end = t.span_begin + length;
  return t;
}

float bar_value(const BarTrack& t, int along_offset_in_span) {
  if (t.texture == 1 && (along_offset_in_span / 2) % 2 == 1) return kStripeLevel;
  return kBarLevel;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_per_class < 1) throw ParameterError("n_per_class must be >= 1");
  if (spec.classes.empty()) throw ParameterError("at least one synthetic class required");
  if (spec.width < 8 || spec.height < 8 || spec.frames < 1) throw ParameterError("synthetic frames too small");
  if (spec.textures < 1 || spec.textures > 2) throw ParameterError("textures must be 1 or 2");
  SyntheticDataset ds;
  ds.manifest.protocol = spec.protocol;
  for (auto k : spec.classes) ds.manifest.class_names.push_back(to_string(k));
  Rng rng(spec.seed);
  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const MotionKind kind = spec.classes[ci];
    for (int i = 0; i < spec.n_per_class; ++i) {
      const int texture = i % spec.textures;
      BarTrack track = make_track(kind, spec, texture, rng);
      VideoTensor clip(spec.width, spec.height, 1, spec.frames);
      Plane background(spec.width, spec.height);
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const float base = track.moving ? kBackgroundLevel : static_texture(kind, x, y);
          const double noise = spec.background_noise * (2.0 * rng.uniform() - 1.0);
          background(x, y) = static_cast<float>(std::clamp(base + noise, 0.0, 1.0));
        }
      for (int n = 0; n < spec.frames; ++n) {
        Plane frame = background;
        if (track.moving) {
          const int lo = track.start + track.speed * n;
          for (int a = std::max(lo, 0); a < std::min(lo + track.thickness, track.horizontal ? spec.width : spec.height);
               ++a)
            for (int b = track.span_begin; b < track.span_end; ++b) {
              const float v = bar_value(track, b - track.span_begin);
              if (track.horizontal) frame(a, b) = v;
              else frame(b, a) = v;
            }
        }
        if (spec.temporal_noise > 0.0)
          for (auto& v : frame.values())
            v = static_cast<float>(std::clamp(v + spec.temporal_noise * (2.0 * rng.uniform() - 1.0), 0.0, 1.0));
        clip.set_plane(0, n, frame);
      }
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03d", to_string(kind).c_str(), i);
      ds.manifest.samples.push_back({id, std::to_string(i % 5 + 1), static_cast<int>(ci),
                                     std::string("clips/") + id + ".stvt"});
      ds.sources.push_back(std::move(clip));
      ds.tracks.push_back(track);
    }
  }
  ds.manifest.validate();
  return ds;
}

}  // namespace stsnn
