#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stsnn/binary_io.hpp"
#include "stsnn/config.hpp"
#include "stsnn/errors.hpp"
#include "stsnn/experiment.hpp"

namespace fs = std::filesystem;
using namespace stsnn;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::string cache;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "output path")->required();
  cmd->add_option("--seed", c.seed, "run seed (defaults to the config's first seed)")
      ->each([&c](const std::string&) { c.seed_given = true; });
  cmd->add_option("--set", c.overrides, "config override key=value (repeatable)");
}

ExperimentConfig load(const Common& c) { return load_config(c.config, c.overrides); }

PipelineCache cache_for(const Common& c) {
  return c.cache.empty() ? PipelineCache::from_environment() : PipelineCache(c.cache);
}

std::string fold_dir(std::size_t f) { return "fold-" + std::to_string(f); }

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_synth(const Common& c) {
  auto config = load(c);
  if (!config.dataset.synthetic) throw ParameterError("synth needs dataset.kind = synthetic");
  if (c.seed_given) config.dataset.synth.seed = c.seed;
  const auto data = generate_synthetic(config.dataset.synth);
  const fs::path out(c.out);
  fs::create_directories(out / "clips");
  for (std::size_t i = 0; i < data.sources.size(); ++i)
    write_clip(out / data.manifest.samples[i].path, data.sources[i]);
  write_text_atomic(out / "manifest.tsv", format_manifest(data.manifest));
  std::cout << "wrote " << data.sources.size() << " clips and " << (out / "manifest.tsv").string() << '\n';
  return 0;
}

int cmd_encode(const Common& c, const std::string& stream, const std::string& clip_path, const std::string& sample) {
  auto config = load(c);
  const StreamRole role = parse_stream_selector(stream, config);
  VideoTensor clip;
  if (!clip_path.empty()) {
    if (!fs::exists(clip_path)) throw IngestError("clip not found: " + clip_path);
    const VideoTensor source = fs::is_directory(clip_path) ? read_frame_directory(clip_path) : read_clip(clip_path);
    clip = load_clip(source, config.clip);
  } else {
    const auto data = prepare_dataset(config);
    const auto& samples = data.manifest.samples;
    auto it = std::find_if(samples.begin(), samples.end(), [&](const ManifestEntry& e) { return e.clip_id == sample; });
    if (it == samples.end()) throw ManifestError("sample '" + sample + "' is not in the dataset");
    clip = data.clips[static_cast<std::size_t>(it - samples.begin())];
  }
  const SpikingTensor spikes = encode_stream(clip, config, role);
  write_spike_dump(c.out, spikes);
  const auto stats = spike_stats(spikes);
  std::cout << "events " << stats.events << "\nmean_time " << stats.mean_time << '\n';
  return 0;
}

int cmd_train_stream(const Common& c, const std::string& stream) {
  auto config = load(c);
  const StreamRole role = parse_stream_selector(stream, config);
  const std::uint64_t seed = c.seed_given ? c.seed : config.seeds.front();
  const auto data = prepare_dataset(config);
  const auto encoded = encode_dataset(data, config, role, cache_for(c), c.jobs);
  fs::create_directories(c.out);
  for (std::size_t f = 0; f < data.folds.size(); ++f) {
    const auto trained = train_stream(encoded, data.folds[f], config, role, f, seed);
    const fs::path path = fs::path(c.out) / (fold_dir(f) + ".stlc");
    trained.layer.save(path);
    std::cout << path.string() << ": " << trained.stats.patches << " patches, " << trained.stats.patches_fired
              << " fired, " << trained.stats.stdp_updates << " STDP updates\n";
  }
  return 0;
}

int cmd_extract(const Common& c, const std::string& stream, const std::string& layers) {
  auto config = load(c);
  const StreamRole role = parse_stream_selector(stream, config);
  const auto data = prepare_dataset(config);
  std::vector<SpikingConvLayer> trained;
  for (std::size_t f = 0; f < data.folds.size(); ++f) {
    const fs::path path = fs::path(layers) / (fold_dir(f) + ".stlc");
    if (!fs::exists(path)) throw DependencyError(path.string(), "stsnn train-stream");
    trained.push_back(SpikingConvLayer::load(path));
  }
  const auto encoded = encode_dataset(data, config, role, cache_for(c), c.jobs);
  const auto& spec = stream_spec(config, role);
  std::size_t written = 0;
  for (std::size_t f = 0; f < data.folds.size(); ++f) {
    const fs::path dir = fs::path(c.out) / fold_dir(f);
    fs::create_directories(dir);
    std::vector<std::size_t> members = data.folds[f].train;
    members.insert(members.end(), data.folds[f].test.begin(), data.folds[f].test.end());
    for (std::size_t i : members) {
      write_features(dir / (data.manifest.samples[i].clip_id + ".stfv"),
                     extract_features(encoded[i], trained[f], spec, to_string(role)));
      ++written;
    }
  }
  std::cout << "wrote " << written << " feature files under " << c.out << '\n';
  return 0;
}

int cmd_fuse(const Common& c, const std::string& a, const std::string& b) {
  bool normalize = true;
  if (!c.config.empty()) normalize = load(c).fusion_normalize;
  if (!fs::is_directory(a)) throw DependencyError(a, "stsnn extract");
  if (!fs::is_directory(b)) throw DependencyError(b, "stsnn extract");
  std::size_t written = 0;
  for (const auto& fold : sorted_entries(a)) {
    if (!fs::is_directory(fold)) continue;
    const fs::path out_dir = fs::path(c.out) / fold.filename();
    fs::create_directories(out_dir);
    for (const auto& file : sorted_entries(fold)) {
      if (file.extension() != ".stfv") continue;
      const fs::path other = fs::path(b) / fold.filename() / file.filename();
      if (!fs::exists(other)) throw DependencyError(other.string(), "stsnn extract");
      write_features(out_dir / file.filename(), fuse_concat(read_features(file), read_features(other), normalize));
      ++written;
    }
  }
  std::cout << "wrote " << written << " fused feature files under " << c.out << '\n';
  return 0;
}

int cmd_classify(const Common& c, const std::string& features, const std::string& stream, int run,
                 const std::string& models) {
  auto config = load(c);
  if (run < 1 || run > config.runs) throw ParameterError("--run must be in 1.." + std::to_string(config.runs));
  const std::uint64_t seed = c.seed_given ? c.seed : config.seeds[static_cast<std::size_t>(run - 1)];
  std::string column = stream;
  std::string id = "fused";
  if (stream != "fused") {
    const StreamRole role = parse_stream_selector(stream, config);
    column = to_string(role);
    id = stream_id(config, role);
  }
  const auto data = prepare_dataset(config);
  EvalResult total;
  for (std::size_t f = 0; f < data.folds.size(); ++f) {
    const fs::path dir = fs::path(features) / fold_dir(f);
    std::vector<FeatureVector> feats(data.clips.size());
    std::vector<std::size_t> members = data.folds[f].train;
    members.insert(members.end(), data.folds[f].test.begin(), data.folds[f].test.end());
    for (std::size_t i : members) {
      const fs::path path = dir / (data.manifest.samples[i].clip_id + ".stfv");
      if (!fs::exists(path)) throw DependencyError(path.string(), column == "fused" ? "stsnn fuse" : "stsnn extract");
      feats[i] = read_features(path);
    }
    SvmModel model;
    total.merge(classify_fold(feats, data.manifest, data.folds[f], config.svm, seed, column, f, &model));
    if (!models.empty()) {
      fs::create_directories(models);
      save_model(fs::path(models) / (column + "-run" + std::to_string(run) + "-" + fold_dir(f) + ".stsv"), model);
    }
  }
  const std::string line = format_result_line({config.name, id, run, total.accuracy()});
  std::string existing;
  if (fs::exists(c.out)) existing = read_text_file(c.out);
  if (!existing.empty() && existing.back() != '\n') existing += '\n';
  write_text_atomic(c.out, existing + line + '\n');
  std::cout << line << '\n';
  return 0;
}

int cmd_report(const Common& c, const std::vector<std::string>& results) {
  std::vector<ResultLine> lines;
  for (const auto& r : results) {
    if (!fs::exists(r)) throw DependencyError(r, "stsnn classify");
    auto more = parse_result_lines(read_text_file(r), r);
    lines.insert(lines.end(), more.begin(), more.end());
  }
  if (lines.empty()) throw InputError("no result lines found");
  const std::string report = format_report(lines);
  write_text_atomic(c.out, report);
  std::cout << report;
  return 0;
}

int cmd_run(const Common& c) {
  auto config = load(c);
  if (c.seed_given) throw ParameterError("run takes its seeds from the config (seeds = ...); use --set seeds=...");
  RunOptions options{cache_for(c), c.jobs};
  const auto result = run_experiment(config, options);
  write_text_atomic(c.out, result.report);
  std::cout << result.report;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream spiking network pipeline for video action recognition"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "render a synthetic bar-motion dataset (manifest + clips)");
  add_common(synth, common);

  std::string stream, clip, sample, layers, features, a, b, models;
  std::vector<std::string> results;
  int run = 1;

  auto* encode = app.add_subcommand("encode", "encode one clip into a spike dump and print spike stats");
  add_common(encode, common);
  encode->add_option("--stream", stream, "spatial|temporal[.<kind>]")->required();
  auto* clip_opt = encode->add_option("--clip", clip, "clip file (.stvt) or frame directory");
  auto* sample_opt = encode->add_option("--sample", sample, "clip id from the configured dataset");
  clip_opt->excludes(sample_opt);
  encode->callback([&] {
    if (clip.empty() && sample.empty()) throw CLI::ValidationError("encode needs --clip or --sample");
  });

  auto* train = app.add_subcommand("train-stream", "train one stream's layer per fold (layer checkpoints)");
  add_common(train, common);
  train->add_option("--stream", stream, "spatial|temporal[.<kind>]")->required();

  auto* extract = app.add_subcommand("extract", "write pooled feature vectors for every fold sample");
  add_common(extract, common);
  extract->add_option("--stream", stream, "spatial|temporal[.<kind>]")->required();
  extract->add_option("--layers", layers, "directory written by train-stream")->required();

  auto* fuse = app.add_subcommand("fuse", "concatenate normalized spatial and temporal features");
  add_common(fuse, common, false);
  fuse->add_option("--a", a, "spatial feature directory")->required();
  fuse->add_option("--b", b, "temporal feature directory")->required();

  auto* classify = app.add_subcommand("classify", "train/evaluate the SVM and append a result line");
  add_common(classify, common);
  classify->add_option("--features", features, "feature directory (extract or fuse output)")->required();
  classify->add_option("--stream", stream, "spatial|temporal|fused")->required();
  classify->add_option("--run", run, "1-based run index");
  classify->add_option("--models", models, "directory for SVM checkpoints");

  auto* report = app.add_subcommand("report", "aggregate result lines into a report table");
  add_common(report, common, false);
  report->add_option("--results", results, "result files")->required();

  auto* run_cmd = app.add_subcommand("run", "run the full experiment and write the report");
  add_common(run_cmd, common);

  for (auto* cmd : {encode, train, extract, run_cmd}) {
    cmd->add_option("--cache", common.cache, "cache directory (default: $STSNN_CACHE_DIR)");
    cmd->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*encode) return cmd_encode(common, stream, clip, sample);
    if (*train) return cmd_train_stream(common, stream);
    if (*extract) return cmd_extract(common, stream, layers);
    if (*fuse) return cmd_fuse(common, a, b);
    if (*classify) return cmd_classify(common, features, stream, run, models);
    if (*report) return cmd_report(common, results);
    if (*run_cmd) return cmd_run(common);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
