#include "stsnn/config.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"

namespace stsnn {

namespace {

struct KindInfo {
  StreamKind kind;
  const char* name;
  const char* label;
};

constexpr KindInfo kKinds[] = {
    {StreamKind::Raw, "raw", "Raw vid (2D conv)"},
    {StreamKind::EarlyFusion, "early-fusion", "EF (2D conv)"},
    {StreamKind::OpticalFlow, "optical-flow", "OF (2D conv)"},
    {StreamKind::FrameSubtraction, "frame-subtraction", "FS (2D conv)"},
    {StreamKind::MotionGrid, "motion-grid", "MG (2D conv)"},
    {StreamKind::Conv3d, "conv3d", "Raw vid (3D conv)"},
    {StreamKind::FrameSubtractionConv3d, "frame-subtraction+conv3d", "FS (3D conv)"},
};

const KindInfo& info(StreamKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k;
  throw ParameterError("unknown stream kind");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class PairReader {
 public:
  PairReader(const std::map<std::string, std::string>& pairs, std::string source)
      : pairs_(pairs), source_(std::move(source)) {}

  const std::string* find(const std::string& key) {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void str(const std::string& key, std::string& out) {
    if (auto v = find(key)) out = *v;
  }

  void path(const std::string& key, std::filesystem::path& out) {
    if (auto v = find(key)) out = *v;
  }

  void integer(const std::string& key, int& out) {
    if (auto v = find(key)) out = static_cast<int>(parse_int(key, *v));
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (auto v = find(key)) {
      const long long x = parse_int(key, *v);
      if (x < 0) fail(key, *v, "expected a non-negative integer");
      out = static_cast<std::uint64_t>(x);
    }
  }

  void real(const std::string& key, double& out) {
    if (auto v = find(key)) {
      try {
        std::size_t pos = 0;
        out = std::stod(*v, &pos);
        if (pos != v->size()) fail(key, *v, "expected a number");
      } catch (const std::logic_error&) {
        fail(key, *v, "expected a number");
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (auto v = find(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") out = true;
      else if (*v == "false" || *v == "0" || *v == "no") out = false;
      else fail(key, *v, "expected true or false");
    }
  }

  void check_all_used() const {
    for (const auto& [k, v] : pairs_)
      if (!used_.count(k)) throw ParameterError(source_ + ": unknown config key '" + k + "'");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& value, const std::string& what) const {
    throw ParameterError(source_ + ": " + key + " = '" + value + "': " + what);
  }

 private:
  long long parse_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const long long x = std::stoll(v, &pos);
      if (pos != v.size()) fail(key, v, "expected an integer");
      return x;
    } catch (const std::logic_error&) {
      fail(key, v, "expected an integer");
    }
  }

  const std::map<std::string, std::string>& pairs_;
  std::string source_;
  std::set<std::string> used_;
};

void read_stream(PairReader& r, const std::string& role, StreamSpec& s) {
  if (auto v = r.find(role + ".kind")) {
    try {
      s.kind = parse_stream_kind(*v);
    } catch (const ParameterError& e) {
      r.fail(role + ".kind", *v, e.what());
    }
  }
  s.layer.kernel_t = uses_3d_layer(s.kind) ? 2 : 1;
  s.pool.depth = (s.kind == StreamKind::Raw || s.kind == StreamKind::EarlyFusion || s.kind == StreamKind::MotionGrid) ? 1 : 2;
  r.integer(role + ".filters", s.layer.filters);
  r.integer(role + ".kernel_w", s.layer.kernel_w);
  r.integer(role + ".kernel_h", s.layer.kernel_h);
  r.integer(role + ".kernel_t", s.layer.kernel_t);
  r.integer(role + ".stride_x", s.layer.stride_x);
  r.integer(role + ".stride_y", s.layer.stride_y);
  r.integer(role + ".stride_t", s.layer.stride_t);
  r.real(role + ".target_time", s.layer.target_time);
  r.integer(role + ".patches_per_clip", s.patches_per_clip);
  r.integer(role + ".epochs", s.epochs);
  r.integer(role + ".pool_w", s.pool.grid_w);
  r.integer(role + ".pool_h", s.pool.grid_h);
  r.integer(role + ".pool_depth", s.pool.depth);
  s.layer.input_channels = stream_channels(s.kind);
}

void write_stream(std::ostream& os, const std::string& role, const StreamSpec& s) {
  os << role << ".kind = " << to_string(s.kind) << '\n'
     << role << ".filters = " << s.layer.filters << '\n'
     << role << ".kernel_w = " << s.layer.kernel_w << '\n'
     << role << ".kernel_h = " << s.layer.kernel_h << '\n'
     << role << ".kernel_t = " << s.layer.kernel_t << '\n'
     << role << ".stride_x = " << s.layer.stride_x << '\n'
     << role << ".stride_y = " << s.layer.stride_y << '\n'
     << role << ".stride_t = " << s.layer.stride_t << '\n'
     << role << ".target_time = " << num(s.layer.target_time) << '\n'
     << role << ".patches_per_clip = " << s.patches_per_clip << '\n'
     << role << ".epochs = " << s.epochs << '\n'
     << role << ".pool_w = " << s.pool.grid_w << '\n'
     << role << ".pool_h = " << s.pool.grid_h << '\n'
     << role << ".pool_depth = " << s.pool.depth << '\n';
}

}  // namespace

std::string to_string(StreamKind kind) { return info(kind).name; }

StreamKind parse_stream_kind(const std::string& name) {
  for (const auto& k : kKinds)
    if (name == k.name) return k.kind;
  throw ParameterError("unknown stream kind '" + name +
                       "' (expected raw, early-fusion, optical-flow, frame-subtraction, motion-grid, conv3d or "
                       "frame-subtraction+conv3d)");
}

std::string stream_label(StreamKind kind) { return info(kind).label; }

bool uses_3d_layer(StreamKind kind) {
  return kind == StreamKind::Conv3d || kind == StreamKind::FrameSubtractionConv3d;
}

int stream_channels(StreamKind kind) { return kind == StreamKind::OpticalFlow ? 6 : 2; }

void StreamSpec::validate() const {
  layer.validate();
  pool.validate();
  if (layer.input_channels != stream_channels(kind))
    throw ParameterError("layer input channels do not match the " + to_string(kind) + " stream");
  if (uses_3d_layer(kind) != layer.is_3d())
    throw ParameterError(to_string(kind) + " stream needs a " + (uses_3d_layer(kind) ? "3D" : "2D") +
                         " layer (kernel_t " + (uses_3d_layer(kind) ? "> 1" : "= 1") + ")");
  if (patches_per_clip < 1) throw ParameterError("patches_per_clip must be >= 1");
  if (epochs < 1) throw ParameterError("stream epochs must be >= 1");
}

void ExperimentConfig::validate() const {
  if (name.empty() || name.find_first_of(",\n") != std::string::npos)
    throw ParameterError("experiment name must be non-empty and contain no commas or newlines");
  clip.validate();
  dog.validate();
  if (!(t_exposition > 0.0)) throw ParameterError("t_exposition must be positive");
  flow.validate();
  spatial.validate();
  temporal.validate();
  if (temporal.kind == StreamKind::Raw) throw ParameterError("temporal stream must be one of the six motion configurations");
  if (spatial.layer.t_exposition != t_exposition || temporal.layer.t_exposition != t_exposition)
    throw ParameterError("layer t_exposition must match the codec");
  svm.validate();
  if (runs < 1) throw ParameterError("runs must be >= 1");
  if (static_cast<int>(seeds.size()) != runs)
    throw ParameterError("seeds lists " + std::to_string(seeds.size()) + " value(s) but runs = " + std::to_string(runs));
  if (dataset.synthetic) {
    if (dataset.synth.classes.size() < 2) throw ParameterError("synthetic dataset needs >= 2 classes");
    if (dataset.synth.n_per_class < 1 || dataset.synth.frames < 1 || dataset.synth.textures < 1)
      throw ParameterError("synthetic dataset sizes must be positive");
  } else if (dataset.manifest.empty()) {
    throw ParameterError("dataset.manifest is required when dataset.kind = manifest");
  }
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParameterError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParameterError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ParameterError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return out;
}

ExperimentConfig config_from_pairs(const std::map<std::string, std::string>& pairs, const std::string& source) {
  ExperimentConfig c;
  c.spatial.kind = StreamKind::Raw;
  c.temporal.kind = StreamKind::FrameSubtraction;
  c.dataset.synth.classes = {MotionKind::BarLeft, MotionKind::BarRight, MotionKind::BarUp, MotionKind::BarDown};
  PairReader r(pairs, source);

  r.str("experiment.name", c.name);
  if (auto v = r.find("dataset.kind")) {
    if (*v == "synthetic") c.dataset.synthetic = true;
    else if (*v == "manifest") c.dataset.synthetic = false;
    else r.fail("dataset.kind", *v, "expected synthetic or manifest");
  }
  r.path("dataset.manifest", c.dataset.manifest);
  r.path("dataset.root", c.dataset.root);
  r.path("dataset.flow_dir", c.dataset.flow_dir);

  auto& s = c.dataset.synth;
  if (auto v = r.find("synthetic.classes")) {
    s.classes.clear();
    try {
      for (const auto& name : split_list(*v)) s.classes.push_back(parse_motion_kind(name));
    } catch (const ParameterError& e) {
      r.fail("synthetic.classes", *v, e.what());
    }
  }
  r.integer("synthetic.n_per_class", s.n_per_class);
  r.integer("synthetic.width", s.width);
  r.integer("synthetic.height", s.height);
  r.integer("synthetic.frames", s.frames);
  r.integer("synthetic.textures", s.textures);
  r.real("synthetic.background_noise", s.background_noise);
  r.real("synthetic.temporal_noise", s.temporal_noise);
  r.u64("synthetic.seed", s.seed);
  if (auto v = r.find("synthetic.protocol")) {
    try {
      s.protocol = parse_split_protocol(*v);
    } catch (const ParameterError& e) {
      r.fail("synthetic.protocol", *v, e.what());
    }
  }

  r.integer("clip.frames", c.clip.frames_per_clip);
  r.integer("clip.stride", c.clip.frame_stride);
  r.real("clip.scale", c.clip.spatial_scale);

  r.integer("codec.dog_size", c.dog.size);
  r.real("codec.sigma1", c.dog.sigma1);
  r.real("codec.sigma2", c.dog.sigma2);
  r.real("codec.cutoff", c.dog.cutoff);
  r.real("codec.t_exposition", c.t_exposition);

  r.integer("flow.levels", c.flow.levels);
  r.integer("flow.window", c.flow.window);
  r.integer("flow.iterations", c.flow.iterations);
  r.integer("flow.poly_n", c.flow.poly_n);
  r.real("flow.poly_sigma", c.flow.poly_sigma);
  r.real("flow.pyramid_scale", c.flow.pyramid_scale);

  read_stream(r, "spatial", c.spatial);
  read_stream(r, "temporal", c.temporal);

  STDPParams stdp;
  r.real("stdp.learning_rate", stdp.learning_rate);
  r.real("stdp.tau", stdp.tau);
  HomeostasisParams homeo;
  r.real("homeo.learning_rate", homeo.learning_rate);
  r.real("homeo.min_threshold", homeo.min_threshold);
  r.real("homeo.initial_mean", homeo.initial_mean);
  r.real("homeo.initial_sd", homeo.initial_sd);
  r.boolean("homeo.silent_decay", homeo.silent_decay);
  for (StreamSpec* st : {&c.spatial, &c.temporal}) {
    st->layer.stdp = stdp;
    st->layer.homeo = homeo;
    st->layer.t_exposition = c.t_exposition;
  }

  r.real("svm.c", c.svm.c);
  r.integer("svm.epochs", c.svm.epochs);
  r.boolean("fusion.normalize", c.fusion_normalize);

  r.integer("runs", c.runs);
  if (auto v = r.find("seeds")) {
    c.seeds.clear();
    for (const auto& item : split_list(*v)) {
      try {
        std::size_t pos = 0;
        c.seeds.push_back(std::stoull(item, &pos));
        if (pos != item.size() || item[0] == '-') throw std::invalid_argument("seed");
      } catch (const std::logic_error&) {
        r.fail("seeds", *v, "expected a comma-separated list of non-negative integers");
      }
    }
  } else if (pairs.count("runs")) {
    c.seeds.clear();
    for (int i = 1; i <= c.runs; ++i) c.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  r.check_all_used();
  if (!c.dataset.synthetic && c.dataset.root.empty()) c.dataset.root = c.dataset.manifest.parent_path();
  c.validate();
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  return config_from_pairs(parse_key_values(text, source), source);
}

ExperimentConfig load_config(const std::filesystem::path& path) { return load_config(path, {}); }

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  if (!std::filesystem::exists(path)) throw ParameterError("config file not found: " + path.string());
  auto pairs = parse_key_values(read_text_file(path), path.string());
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ParameterError("override '" + o + "' is not key=value");
    pairs[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
  auto config = config_from_pairs(pairs, path.string());
  if (!config.dataset.synthetic && config.dataset.manifest.is_relative()) {
    const auto base = path.parent_path();
    config.dataset.manifest = base / config.dataset.manifest;
    if (!pairs.count("dataset.root")) config.dataset.root = config.dataset.manifest.parent_path();
    else if (config.dataset.root.is_relative()) config.dataset.root = base / config.dataset.root;
  }
  if (!config.dataset.flow_dir.empty() && config.dataset.flow_dir.is_relative())
    config.dataset.flow_dir = path.parent_path() / config.dataset.flow_dir;
  return config;
}

std::string canonical_text(const StreamSpec& stream) {
  std::ostringstream os;
  write_stream(os, "stream", stream);
  os << "stream.input_channels = " << stream.layer.input_channels << '\n'
     << "stream.t_exposition = " << num(stream.layer.t_exposition) << '\n'
     << "stdp.learning_rate = " << num(stream.layer.stdp.learning_rate) << '\n'
     << "stdp.tau = " << num(stream.layer.stdp.tau) << '\n'
     << "homeo.learning_rate = " << num(stream.layer.homeo.learning_rate) << '\n'
     << "homeo.min_threshold = " << num(stream.layer.homeo.min_threshold) << '\n'
     << "homeo.initial_mean = " << num(stream.layer.homeo.initial_mean) << '\n'
     << "homeo.initial_sd = " << num(stream.layer.homeo.initial_sd) << '\n'
     << "homeo.silent_decay = " << (stream.layer.homeo.silent_decay ? "true" : "false") << '\n';
  return os.str();
}

std::string canonical_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "experiment.name = " << c.name << '\n'
     << "dataset.kind = " << (c.dataset.synthetic ? "synthetic" : "manifest") << '\n';
  if (!c.dataset.synthetic) {
    os << "dataset.manifest = " << c.dataset.manifest.string() << '\n'
       << "dataset.root = " << c.dataset.root.string() << '\n';
  }
  if (!c.dataset.flow_dir.empty()) os << "dataset.flow_dir = " << c.dataset.flow_dir.string() << '\n';
  const auto& s = c.dataset.synth;
  os << "synthetic.classes = ";
  for (std::size_t i = 0; i < s.classes.size(); ++i) os << (i ? "," : "") << to_string(s.classes[i]);
  os << '\n'
     << "synthetic.n_per_class = " << s.n_per_class << '\n'
     << "synthetic.width = " << s.width << '\n'
     << "synthetic.height = " << s.height << '\n'
     << "synthetic.frames = " << s.frames << '\n'
     << "synthetic.textures = " << s.textures << '\n'
     << "synthetic.background_noise = " << num(s.background_noise) << '\n'
     << "synthetic.temporal_noise = " << num(s.temporal_noise) << '\n'
     << "synthetic.seed = " << s.seed << '\n'
     << "synthetic.protocol = " << to_string(s.protocol) << '\n'
     << "clip.frames = " << c.clip.frames_per_clip << '\n'
     << "clip.stride = " << c.clip.frame_stride << '\n'
     << "clip.scale = " << num(c.clip.spatial_scale) << '\n'
     << "codec.dog_size = " << c.dog.size << '\n'
     << "codec.sigma1 = " << num(c.dog.sigma1) << '\n'
     << "codec.sigma2 = " << num(c.dog.sigma2) << '\n'
     << "codec.cutoff = " << num(c.dog.cutoff) << '\n'
     << "codec.t_exposition = " << num(c.t_exposition) << '\n'
     << "flow.levels = " << c.flow.levels << '\n'
     << "flow.window = " << c.flow.window << '\n'
     << "flow.iterations = " << c.flow.iterations << '\n'
     << "flow.poly_n = " << c.flow.poly_n << '\n'
     << "flow.poly_sigma = " << num(c.flow.poly_sigma) << '\n'
     << "flow.pyramid_scale = " << num(c.flow.pyramid_scale) << '\n';
  write_stream(os, "spatial", c.spatial);
  write_stream(os, "temporal", c.temporal);
  const auto& l = c.spatial.layer;
  os << "stdp.learning_rate = " << num(l.stdp.learning_rate) << '\n'
     << "stdp.tau = " << num(l.stdp.tau) << '\n'
     << "homeo.learning_rate = " << num(l.homeo.learning_rate) << '\n'
     << "homeo.min_threshold = " << num(l.homeo.min_threshold) << '\n'
     << "homeo.initial_mean = " << num(l.homeo.initial_mean) << '\n'
     << "homeo.initial_sd = " << num(l.homeo.initial_sd) << '\n'
     << "homeo.silent_decay = " << (l.homeo.silent_decay ? "true" : "false") << '\n'
     << "svm.c = " << num(c.svm.c) << '\n'
     << "svm.epochs = " << c.svm.epochs << '\n'
     << "fusion.normalize = " << (c.fusion_normalize ? "true" : "false") << '\n'
     << "runs = " << c.runs << '\n'
     << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
  os << '\n';
  return os.str();
}

}  // namespace stsnn
