#include "stsnn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"
#include "stsnn/motion_streams.hpp"
#include "stsnn/retina_codec.hpp"
#include "stsnn/rng.hpp"

namespace stsnn {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool needs_flow(StreamKind kind) { return kind == StreamKind::OpticalFlow || kind == StreamKind::MotionGrid; }

std::string encode_description(const ExperimentConfig& c, StreamRole role) {
  const StreamKind kind = stream_spec(c, role).kind;
  std::ostringstream os;
  os << "kind=" << to_string(kind) << "\ndog=" << c.dog.size << ',' << num(c.dog.sigma1) << ',' << num(c.dog.sigma2)
     << ',' << num(c.dog.cutoff) << "\nt_exp=" << num(c.t_exposition) << '\n';
  if (needs_flow(kind)) {
    if (!c.dataset.flow_dir.empty()) os << "flow_dir=" << c.dataset.flow_dir.string() << '\n';
    os << "flow=" << c.flow.levels << ',' << c.flow.window << ',' << c.flow.iterations << ',' << c.flow.poly_n << ','
       << num(c.flow.poly_sigma) << ',' << num(c.flow.pyramid_scale) << '\n';
  }
  return os.str();
}

std::string layer_description(const PreparedDataset& data, const ExperimentConfig& c, StreamRole role,
                              std::size_t fold_index, std::uint64_t run_seed) {
  std::ostringstream os;
  os << "layer\n" << data.fingerprint << '\n' << encode_description(c, role) << canonical_text(stream_spec(c, role))
     << "role=" << to_string(role) << "\nseed=" << run_seed << "\nfold=" << fold_index << "\ntrain=";
  for (std::size_t i : data.folds[fold_index].train) os << data.manifest.samples[i].clip_id << ',';
  os << '\n';
  return os.str();
}

std::vector<std::size_t> fold_members(const Fold& fold) {
  std::vector<std::size_t> all = fold.train;
  all.insert(all.end(), fold.test.begin(), fold.test.end());
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<FlowField> load_precomputed_flow(const ExperimentConfig& c, const std::string& clip_id, const VideoTensor& clip) {
  const auto path = c.dataset.flow_dir / (clip_id + ".stof");
  if (!std::filesystem::exists(path)) throw IngestError(clip_id + ": precomputed flow file not found: " + path.string());
  auto flows = read_flow_file(path);
  if (static_cast<int>(flows.size()) != clip.depth() - 1)
    throw IngestError(clip_id + ": flow file holds " + std::to_string(flows.size()) + " fields, clip needs " +
                      std::to_string(clip.depth() - 1));
  for (const auto& f : flows)
    if (f.width() != clip.width() || f.height() != clip.height())
      throw IngestError(clip_id + ": flow field size does not match the clip");
  return flows;
}

int column_order(const std::string& stream) {
  if (stream.rfind("spatial", 0) == 0) return 0;
  if (stream.rfind("temporal", 0) == 0) return 1;
  if (stream == "fused") return 2;
  return 3;
}

std::string column_label(const std::string& stream) {
  if (stream == "fused") return "Fused";
  const auto colon = stream.find(':');
  if (colon != std::string::npos) {
    try {
      return stream_label(parse_stream_kind(stream.substr(colon + 1)));
    } catch (const ParameterError&) {
    }
  }
  return stream;
}

}  // namespace

PipelineCache PipelineCache::from_environment() {
  const char* dir = std::getenv("STSNN_CACHE_DIR");
  return dir && *dir ? PipelineCache(dir) : PipelineCache();
}

std::filesystem::path PipelineCache::path_for(std::string_view stage, std::string_view key) const {
  return dir_ / std::string(stage) / (std::string(key) + ".bin");
}

std::optional<std::vector<std::uint8_t>> PipelineCache::get(std::string_view stage, std::string_view key) const {
  if (!enabled()) return std::nullopt;
  const auto path = path_for(stage, key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    return read_file_bytes(path);
  } catch (const Error&) {
    return std::nullopt;
  }
}

void PipelineCache::put(std::string_view stage, std::string_view key, std::span<const std::uint8_t> bytes) const {
  if (!enabled()) return;
  try {
    const auto path = path_for(stage, key);
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, bytes);
  } catch (const std::exception& e) {
    std::cerr << "warning: cache write failed: " << e.what() << '\n';
  }
}

std::string PipelineCache::hash_key(std::string_view description) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(description)));
  return buf;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::string to_string(StreamRole role) { return role == StreamRole::Spatial ? "spatial" : "temporal"; }

StreamRole parse_stream_selector(const std::string& selector, ExperimentConfig& config) {
  const auto dot = selector.find('.');
  const std::string role_name = selector.substr(0, dot);
  StreamRole role;
  if (role_name == "spatial") role = StreamRole::Spatial;
  else if (role_name == "temporal") role = StreamRole::Temporal;
  else throw ParameterError("stream must be spatial or temporal, optionally with .<kind>; got '" + selector + "'");
  if (dot != std::string::npos) {
    StreamSpec& spec = role == StreamRole::Spatial ? config.spatial : config.temporal;
    const StreamKind kind = parse_stream_kind(selector.substr(dot + 1));
    if (kind != spec.kind) {
      spec.kind = kind;
      spec.layer.input_channels = stream_channels(kind);
      spec.layer.kernel_t = uses_3d_layer(kind) ? 2 : 1;
      spec.pool.depth = (kind == StreamKind::Raw || kind == StreamKind::EarlyFusion || kind == StreamKind::MotionGrid) ? 1 : 2;
    }
    config.validate();
  }
  return role;
}

const StreamSpec& stream_spec(const ExperimentConfig& config, StreamRole role) {
  return role == StreamRole::Spatial ? config.spatial : config.temporal;
}

std::string stream_id(const ExperimentConfig& config, StreamRole role) {
  return to_string(role) + ":" + to_string(stream_spec(config, role).kind);
}

PreparedDataset prepare_dataset(const ExperimentConfig& config) {
  PreparedDataset data;
  std::ostringstream fp;
  fp << "clip=" << config.clip.frames_per_clip << ',' << config.clip.frame_stride << ','
     << num(config.clip.spatial_scale) << '\n';
  if (config.dataset.synthetic) {
    auto synth = generate_synthetic(config.dataset.synth);
    data.manifest = std::move(synth.manifest);
    for (const auto& src : synth.sources) data.clips.push_back(load_clip(src, config.clip));
    ExperimentConfig only_dataset;
    only_dataset.dataset = config.dataset;
    const std::string text = canonical_text(only_dataset);
    fp << "synthetic\n" << text.substr(0, text.find("clip."));
  } else {
    const auto manifest_text = read_text_file(config.dataset.manifest);
    data.manifest = parse_manifest(manifest_text, config.dataset.manifest.string());
    data.manifest.validate();
    fp << "manifest\n" << manifest_text << '\n';
    for (const auto& s : data.manifest.samples) {
      const auto path = config.dataset.root / s.path;
      try {
        const VideoTensor source =
            std::filesystem::is_directory(path) ? read_frame_directory(path) : read_clip(path);
        data.clips.push_back(load_clip(source, config.clip));
      } catch (const Error& e) {
        throw IngestError("sample " + s.clip_id + ": " + e.what());
      }
      const auto v = data.clips.back().values();
      fp << s.clip_id << '='
         << PipelineCache::hash_key(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float)))
         << '\n';
    }
  }
  data.folds = make_splits(data.manifest);
  data.fingerprint = fp.str();
  return data;
}

VideoTensor stream_frames(const VideoTensor& clip, StreamKind kind, const FlowParams& flow,
                          const std::vector<FlowField>* flows) {
  if (clip.channels() != 1) throw InputError("stream preprocessing expects single-channel clips");
  switch (kind) {
    case StreamKind::Raw:
    case StreamKind::Conv3d:
      return clip;
    case StreamKind::EarlyFusion: {
      const Plane fused = early_fuse(clip);
      return VideoTensor::from_frames(std::span<const Plane>(&fused, 1));
    }
    case StreamKind::FrameSubtraction:
    case StreamKind::FrameSubtractionConv3d:
      return frame_subtract(clip);
    case StreamKind::OpticalFlow:
    case StreamKind::MotionGrid: {
      if (clip.depth() < 2) throw InputError("flow streams need at least 2 frames");
      const std::vector<FlowField> estimated = flows ? std::vector<FlowField>{} : clip_flow(clip, flow);
      const auto& fields = flows ? *flows : estimated;
      if (kind == StreamKind::MotionGrid) {
        const Plane grid = motion_grid(fields);
        return VideoTensor::from_frames(std::span<const Plane>(&grid, 1));
      }
      VideoTensor out(clip.width(), clip.height(), 3, static_cast<int>(fields.size()));
      for (std::size_t n = 0; n < fields.size(); ++n) {
        const VideoTensor rgb = flow_to_rgb(fields[n]);
        for (int c = 0; c < 3; ++c) out.set_plane(c, static_cast<int>(n), rgb.plane(c, 0));
      }
      return out;
    }
  }
  throw ParameterError("unknown stream kind");
}

SpikingTensor encode_stream(const VideoTensor& clip, const ExperimentConfig& config, StreamRole role,
                            const std::vector<FlowField>* flows) {
  const VideoTensor frames = stream_frames(clip, stream_spec(config, role).kind, config.flow, flows);
  return latency_encode(retina_filter(frames, config.dog), config.t_exposition);
}

std::vector<std::uint8_t> serialize_spikes(const SpikingTensor& spikes) {
  ByteWriter w;
  w.magic("STSK");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(spikes.dims.width));
  w.u32(static_cast<std::uint32_t>(spikes.dims.height));
  w.u32(static_cast<std::uint32_t>(spikes.dims.channels));
  w.u32(static_cast<std::uint32_t>(spikes.dims.depth));
  w.u64(spikes.events.size());
  for (const auto& e : spikes.events) {
    w.u32(static_cast<std::uint32_t>(e.x));
    w.u32(static_cast<std::uint32_t>(e.y));
    w.u32(static_cast<std::uint32_t>(e.z));
    w.u32(static_cast<std::uint32_t>(e.c));
    w.f64(e.t);
  }
  return w.bytes();
}

SpikingTensor deserialize_spikes(std::vector<std::uint8_t> bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("STSK");
  if (r.u32() != 1) throw IngestError(source + ": unsupported spike file version");
  SpikingTensor s;
  s.dims.width = static_cast<int>(r.u32());
  s.dims.height = static_cast<int>(r.u32());
  s.dims.channels = static_cast<int>(r.u32());
  s.dims.depth = static_cast<int>(r.u32());
  const auto count = r.u64();
  if (count > s.dims.volume()) throw IngestError(source + ": more events than coordinates");
  s.events.resize(count);
  for (auto& e : s.events) {
    e.x = static_cast<std::int32_t>(r.u32());
    e.y = static_cast<std::int32_t>(r.u32());
    e.z = static_cast<std::int32_t>(r.u32());
    e.c = static_cast<std::int32_t>(r.u32());
    e.t = r.f64();
  }
  r.expect_end();
  try {
    s.validate();
  } catch (const Error& e) {
    throw IngestError(source + ": " + e.what());
  }
  return s;
}

std::vector<SpikingTensor> encode_dataset(const PreparedDataset& data, const ExperimentConfig& config, StreamRole role,
                                          const PipelineCache& cache, int jobs) {
  const std::string base = data.fingerprint + encode_description(config, role);
  const bool precomputed = needs_flow(stream_spec(config, role).kind) && !config.dataset.flow_dir.empty();
  std::vector<SpikingTensor> out(data.clips.size());
  parallel_for(data.clips.size(), jobs, [&](std::size_t i) {
    const auto& id = data.manifest.samples[i].clip_id;
    const std::string key = PipelineCache::hash_key(base + "clip=" + id + '\n');
    if (auto bytes = cache.get("encoded", key)) {
      try {
        out[i] = deserialize_spikes(std::move(*bytes), id);
        return;
      } catch (const Error&) {
      }
    }
    try {
      if (precomputed) {
        const auto flows = load_precomputed_flow(config, id, data.clips[i]);
        out[i] = encode_stream(data.clips[i], config, role, &flows);
      } else {
        out[i] = encode_stream(data.clips[i], config, role);
      }
    } catch (const Error& e) {
      throw InputError("encode " + to_string(role) + " stream, sample " + id + ": " + e.what());
    }
    cache.put("encoded", key, serialize_spikes(out[i]));
  });
  return out;
}

StreamTraining train_stream(std::span<const SpikingTensor> encoded, const Fold& fold, const ExperimentConfig& config,
                            StreamRole role, std::size_t fold_index, std::uint64_t run_seed) {
  const StreamSpec& spec = stream_spec(config, role);
  const std::string tag = to_string(role) + "/" + std::to_string(fold_index);
  StreamTraining t{SpikingConvLayer(spec.layer, derive_seed(run_seed, "layer/" + tag)), {}};
  std::vector<const SpikingTensor*> clips;
  for (std::size_t i : fold.train) {
    if (i >= encoded.size()) throw InputError("fold references a sample outside the encoded set");
    clips.push_back(&encoded[i]);
  }
  if (clips.empty()) throw TrainingError("fold " + fold.name + " has no training clips");
  Rng rng(derive_seed(run_seed, "train/" + tag));
  try {
    t.stats = train_layer(t.layer, std::span<const SpikingTensor* const>(clips), spec.patches_per_clip, spec.epochs, rng);
  } catch (const Error& e) {
    throw TrainingError("train " + to_string(role) + " stream, fold " + fold.name + ": " + e.what());
  }
  t.layer.check_invariants();
  return t;
}

FeatureVector extract_features(const SpikingTensor& encoded, const SpikingConvLayer& layer, const StreamSpec& spec,
                               const std::string& stream) {
  return flatten(pool_feature_maps(infer(encoded, layer), spec.pool, layer.config().t_exposition), stream);
}

std::vector<float> svm_input(const FeatureVector& v) {
  if (v.provenance.size() <= 1) return l2_normalize(v).values;
  return v.values;
}

EvalResult classify_fold(std::span<const FeatureVector> features, const DatasetManifest& manifest, const Fold& fold,
                         const SvmParams& svm, std::uint64_t run_seed, const std::string& column,
                         std::size_t fold_index, SvmModel* model_out) {
  auto gather = [&](const std::vector<std::size_t>& idx, std::vector<std::vector<float>>& x, std::vector<int>& y) {
    for (std::size_t i : idx) {
      if (i >= features.size() || features[i].values.empty())
        throw InputError("missing features for sample " + manifest.samples.at(i).clip_id);
      x.push_back(svm_input(features[i]));
      y.push_back(manifest.samples[i].label);
    }
  };
  std::vector<std::vector<float>> train_x, test_x;
  std::vector<int> train_y, test_y;
  gather(fold.train, train_x, train_y);
  gather(fold.test, test_x, test_y);
  SvmParams params = svm;
  params.seed = derive_seed(run_seed, "svm/" + column + "/" + std::to_string(fold_index));
  const int classes = static_cast<int>(manifest.class_names.size());
  SvmModel model = train_svm(train_x, train_y, classes, params);
  EvalResult r = evaluate(model, test_x, test_y);
  if (model_out) *model_out = std::move(model);
  return r;
}

std::string format_result_line(const ResultLine& line) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", line.accuracy);
  return line.experiment + "," + line.stream + "," + std::to_string(line.run) + "," + buf;
}

std::vector<ResultLine> parse_result_lines(const std::string& text, const std::string& source) {
  std::vector<ResultLine> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 4 || line.find('|') != std::string::npos) continue;
    if (cols[0] == "experiment" && cols[2] == "run") continue;
    try {
      std::size_t p1 = 0, p2 = 0;
      ResultLine r{cols[0], cols[1], std::stoi(cols[2], &p1), std::stod(cols[3], &p2)};
      if (p1 != cols[2].size() || p2 != cols[3].size() || r.accuracy < 0.0 || r.accuracy > 100.0)
        throw std::invalid_argument("bad");
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw IngestError(source + ": malformed result line '" + line + "'");
    }
  }
  return out;
}

std::string format_report(std::vector<ResultLine> lines) {
  // Canonicalize: last write wins per (experiment, stream, run); fixed ordering.
  std::map<std::tuple<std::string, int, std::string, int>, ResultLine> unique;
  for (auto& l : lines) unique[{l.experiment, column_order(l.stream), l.stream, l.run}] = l;
  std::ostringstream os;
  std::string current;
  std::vector<const ResultLine*> block;
  auto flush = [&] {
    if (block.empty()) return;
    std::vector<std::string> streams;
    std::map<std::string, std::vector<double>> accs;
    std::vector<int> runs;
    for (const auto* l : block) {
      if (accs.find(l->stream) == accs.end()) streams.push_back(l->stream);
      accs[l->stream].push_back(l->accuracy);
      if (std::find(runs.begin(), runs.end(), l->run) == runs.end()) runs.push_back(l->run);
    }
    os << "experiment: " << block.front()->experiment << " (" << runs.size() << " run" << (runs.size() == 1 ? "" : "s")
       << ")\n|";
    for (const auto& s : streams) os << ' ' << column_label(s) << " |";
    os << "\n|";
    for (std::size_t i = 0; i < streams.size(); ++i) os << "---|";
    os << "\n|";
    for (const auto& s : streams) os << ' ' << aggregate_runs(accs[s]).format() << " |";
    os << "\n\n";
    block.clear();
  };
  for (const auto& [key, l] : unique) {
    if (l.experiment != current) {
      flush();
      current = l.experiment;
    }
    block.push_back(&l);
  }
  flush();
  os << "experiment,stream,run,accuracy\n";
  for (const auto& [key, l] : unique) os << format_result_line(l) << '\n';
  return os.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const PreparedDataset data = prepare_dataset(config);
  const std::array<StreamRole, 2> roles{StreamRole::Spatial, StreamRole::Temporal};
  std::array<std::vector<SpikingTensor>, 2> encoded;
  for (int r = 0; r < 2; ++r) encoded[r] = encode_dataset(data, config, roles[r], options.cache, options.jobs);

  const std::size_t runs = config.seeds.size();
  const std::size_t folds = data.folds.size();
  ExperimentResult result;
  for (auto& col : result.evaluations) col.assign(runs, EvalResult{});
  for (auto& tr : result.training) tr.assign(runs * folds, TrainingStats{});
  const std::array<std::string, 3> columns{"spatial", "temporal", "fused"};

  parallel_for(runs, options.jobs, [&](std::size_t run) {
    const std::uint64_t seed = config.seeds[run];
    for (std::size_t f = 0; f < folds; ++f) {
      const Fold& fold = data.folds[f];
      const auto members = fold_members(fold);
      std::array<std::vector<FeatureVector>, 3> feats;
      for (int r = 0; r < 2; ++r) {
        const StreamSpec& spec = stream_spec(config, roles[r]);
        const std::string layer_key = PipelineCache::hash_key(layer_description(data, config, roles[r], f, seed));
        std::optional<SpikingConvLayer> layer;
        if (auto bytes = options.cache.get("layer", layer_key)) {
          try {
            layer = SpikingConvLayer::deserialize(std::move(*bytes), "cached layer");
          } catch (const Error&) {
          }
        }
        if (!layer) {
          auto trained = train_stream(encoded[r], fold, config, roles[r], f, seed);
          result.training[r][run * folds + f] = trained.stats;
          layer = std::move(trained.layer);
          options.cache.put("layer", layer_key, layer->serialize());
        }
        feats[r].assign(data.clips.size(), FeatureVector{});
        const std::string name = to_string(roles[r]);
        for (std::size_t i : members) {
          const std::string key = PipelineCache::hash_key(layer_key + "features\n" + data.manifest.samples[i].clip_id +
                                                          '\n' + std::to_string(spec.pool.grid_w) + ',' +
                                                          std::to_string(spec.pool.grid_h) + ',' +
                                                          std::to_string(spec.pool.depth));
          if (auto bytes = options.cache.get("features", key)) {
            try {
              feats[r][i] = deserialize_features(std::move(*bytes), "cached features");
              continue;
            } catch (const Error&) {
            }
          }
          feats[r][i] = extract_features(encoded[r][i], *layer, spec, name);
          options.cache.put("features", key, serialize_features(feats[r][i]));
        }
      }
      feats[2].assign(data.clips.size(), FeatureVector{});
      for (std::size_t i : members) feats[2][i] = fuse_concat(feats[0][i], feats[1][i], config.fusion_normalize);
      for (int c = 0; c < 3; ++c)
        result.evaluations[c][run].merge(
            classify_fold(feats[c], data.manifest, fold, config.svm, seed, columns[c], f));
    }
  });

  std::vector<ResultLine> lines;
  for (int c = 0; c < 3; ++c) {
    const std::string id = c < 2 ? stream_id(config, roles[c]) : "fused";
    for (std::size_t run = 0; run < runs; ++run)
      lines.push_back({config.name, id, static_cast<int>(run + 1), result.evaluations[c][run].accuracy()});
  }
  std::string text;
  for (const auto& l : lines) text += format_result_line(l) + '\n';
  result.lines = parse_result_lines(text);
  result.report = format_report(result.lines);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> accs;
    for (const auto& l : result.lines)
      if (column_order(l.stream) == c) accs.push_back(l.accuracy);
    result.summaries[c] = aggregate_runs(accs);
  }
  return result;
}

}  // namespace stsnn
