#include <cstdlib>

#include "doctest.h"
#include "stsnn/binary_io.hpp"
#include "stsnn/config.hpp"
#include "stsnn/errors.hpp"
#include "stsnn/experiment.hpp"
#include "test_util.hpp"

using namespace stsnn;

namespace {

const char* kTinyConfig = R"(
experiment.name = tiny
synthetic.classes = bar-left, bar-up
synthetic.n_per_class = 6
synthetic.width = 40
synthetic.height = 40
synthetic.frames = 20
spatial.filters = 4
temporal.filters = 4
spatial.patches_per_clip = 10
temporal.patches_per_clip = 10
svm.epochs = 50
runs = 2
seeds = 5, 6
)";

}  // namespace

TEST_CASE("config parsing applies defaults and per-kind layer settings") {
  const auto c = parse_config("temporal.kind = conv3d\n");
  CHECK(c.name == "experiment");
  CHECK(c.spatial.kind == StreamKind::Raw);
  CHECK(c.temporal.kind == StreamKind::Conv3d);
  CHECK(c.temporal.layer.kernel_t == 2);
  CHECK(c.spatial.layer.kernel_t == 1);
  CHECK(c.spatial.layer.filters == 64);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(c.dataset.synth.classes.size() == 4);
  const auto of = parse_config("temporal.kind = optical-flow  # comment\n");
  CHECK(of.temporal.layer.input_channels == 6);
  CHECK(of.temporal.pool.depth == 2);
  CHECK(parse_config("temporal.kind = motion-grid").temporal.pool.depth == 1);
  CHECK(parse_config("runs = 2").seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("no equals sign"), ParameterError);
  CHECK_THROWS_AS(parse_config("bogus.key = 1"), ParameterError);
  CHECK_THROWS_AS(parse_config("runs = 3\nseeds = 1,2"), ParameterError);
  CHECK_THROWS_AS(parse_config("temporal.kind = raw"), ParameterError);
  CHECK_THROWS_AS(parse_config("temporal.kind = sideways"), ParameterError);
  CHECK_THROWS_AS(parse_config("spatial.filters = many"), ParameterError);
  CHECK_THROWS_AS(parse_config("runs = 1\nruns = 2"), ParameterError);
  CHECK_THROWS_AS(parse_config("spatial.kernel_t = 2"), ParameterError);
  CHECK_THROWS_AS(parse_config("codec.sigma1 = 5"), ParameterError);
}

TEST_CASE("canonical config text parses back to the same config") {
  const auto c = parse_config(std::string(kTinyConfig) + "codec.cutoff = 20\ntemporal.kind = frame-subtraction+conv3d\n");
  const auto text = canonical_text(c);
  CHECK(canonical_text(parse_config(text)) == text);
  CHECK(text.find("codec.cutoff = 20") != std::string::npos);
}

TEST_CASE("stream preprocessing shapes for a 40x40x10 clip") {
  Rng rng(1);
  VideoTensor clip(40, 40, 1, 10);
  for (float& v : clip.values()) v = static_cast<float>(rng.uniform());
  const FlowParams fp;
  auto check = [&](StreamKind kind, int w, int h, int c, int d) {
    const auto f = stream_frames(clip, kind, fp);
    CHECK(f.width() == w);
    CHECK(f.height() == h);
    CHECK(f.channels() == c);
    CHECK(f.depth() == d);
    CHECK(2 * f.channels() == stream_channels(kind));
  };
  check(StreamKind::Raw, 40, 40, 1, 10);
  check(StreamKind::Conv3d, 40, 40, 1, 10);
  check(StreamKind::EarlyFusion, 40, 400, 1, 1);
  check(StreamKind::FrameSubtraction, 40, 40, 1, 9);
  check(StreamKind::FrameSubtractionConv3d, 40, 40, 1, 9);
  check(StreamKind::MotionGrid, 160, 360, 1, 1);
  check(StreamKind::OpticalFlow, 40, 40, 3, 9);
}

TEST_CASE("result lines and reports") {
  const std::vector<ResultLine> lines{{"e", "temporal:frame-subtraction", 1, 90.0}, {"e", "spatial:raw", 1, 50.0},
                                      {"e", "fused", 1, 91.0},  {"e", "spatial:raw", 2, 52.0},
                                      {"e", "temporal:frame-subtraction", 2, 92.0}, {"e", "fused", 2, 93.0}};
  const auto report = format_report(lines);
  CHECK(report.find("| Raw vid (2D conv) | FS (2D conv) | Fused |") != std::string::npos);
  CHECK(report.find("| 51.00 ± 1.00 | 91.00 ± 1.00 | 92.00 ± 1.00 |") != std::string::npos);
  CHECK(report.find("e,spatial:raw,2,52.000000") != std::string::npos);
  // Reports are their own input: reparsing the lines reproduces the report.
  CHECK(format_report(parse_result_lines(report)) == report);
  CHECK_THROWS_AS(parse_result_lines("e,spatial:raw,1,abc\n"), IngestError);
}

TEST_CASE("pipeline cache keys and storage") {
  const auto dir = testutil::temp_dir("cache");
  PipelineCache cache(dir);
  CHECK(PipelineCache::hash_key("a") != PipelineCache::hash_key("b"));
  CHECK(PipelineCache::hash_key("a").size() == 16);
  CHECK_FALSE(cache.get("layer", "k").has_value());
  const std::vector<std::uint8_t> bytes{1, 2, 3};
  cache.put("layer", "k", bytes);
  CHECK(cache.get("layer", "k") == bytes);
  CHECK_FALSE(PipelineCache().enabled());
  CHECK_FALSE(PipelineCache().get("layer", "k").has_value());
}

TEST_CASE("spike tensors serialize losslessly") {
  Rng rng(3);
  VideoTensor v(6, 5, 2, 3);
  for (float& x : v.values()) x = rng.uniform() < 0.5 ? static_cast<float>(rng.uniform()) : 0.0f;
  const auto s = latency_encode(v);
  CHECK(deserialize_spikes(serialize_spikes(s)) == s);
}

TEST_CASE("parallel_for covers every index and propagates errors") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw InputError("boom");
                  }),
                  InputError);
}

TEST_CASE("tiny experiment: report shape, determinism and cache equivalence") {
  const auto config = parse_config(kTinyConfig);
  const auto plain = run_experiment(config);
  CHECK(plain.lines.size() == 6);
  CHECK(plain.report.find("experiment: tiny (2 runs)") != std::string::npos);
  for (const auto& s : plain.summaries) CHECK(s.runs.size() == 2);
  for (const auto& col : plain.evaluations)
    for (const auto& r : col) CHECK(r.total == 4);  // 2 classes x 2 test clips
  for (const auto& stats : plain.training)
    for (const auto& s : stats) CHECK(s.stdp_updates == s.patches_fired);

  const auto dir = testutil::temp_dir("cache_run");
  RunOptions cached{PipelineCache(dir), 2};
  const auto first = run_experiment(config, cached);
  const auto second = run_experiment(config, cached);
  CHECK(first.report == plain.report);
  CHECK(second.report == plain.report);

  // Changing a codec field must not reuse cached layers or features.
  const auto changed = parse_config(std::string(kTinyConfig) + "codec.cutoff = 40\n");
  const auto fresh = run_experiment(changed);
  CHECK(run_experiment(changed, cached).report == fresh.report);
}

TEST_CASE("conv3d temporal stream trains a 3D layer") {
  const auto config = parse_config(std::string(kTinyConfig) + "temporal.kind = conv3d\n");
  const auto data = prepare_dataset(config);
  const auto encoded = encode_dataset(data, config, StreamRole::Temporal, PipelineCache());
  CHECK(encoded[0].dims.depth == 10);
  const auto trained = train_stream(encoded, data.folds[0], config, StreamRole::Temporal, 0, 1);
  CHECK(trained.layer.config().is_3d());
  const auto f = extract_features(encoded[0], trained.layer, config.temporal, "temporal");
  // 20x20 clips give 16x16 maps, smaller than the grid, so they pass through unpooled.
  CHECK(f.values.size() == 16u * 16u * 2u * 4u);
}

TEST_CASE("manifest datasets load clips relative to the manifest") {
  const auto dir = testutil::temp_dir("manifest_ds");
  SyntheticSpec spec;
  spec.classes = {MotionKind::BarLeft, MotionKind::BarRight};
  spec.n_per_class = 3;
  spec.width = 24;
  spec.height = 24;
  const auto ds = generate_synthetic(spec);
  std::filesystem::create_directories(dir / "clips");
  for (std::size_t i = 0; i < ds.sources.size(); ++i) write_clip(dir / ds.manifest.samples[i].path, ds.sources[i]);
  write_text_atomic(dir / "manifest.tsv", format_manifest(ds.manifest));
  write_text_atomic(dir / "exp.conf", "dataset.kind = manifest\ndataset.manifest = manifest.tsv\n");
  const auto config = load_config(dir / "exp.conf");
  const auto data = prepare_dataset(config);
  CHECK(data.clips.size() == 6);
  CHECK(data.clips[0] == load_clip(ds.sources[0], ClipSpec{}));

  std::filesystem::remove(dir / ds.manifest.samples[2].path);
  CHECK_THROWS_WITH_AS(prepare_dataset(config), doctest::Contains(ds.manifest.samples[2].clip_id.c_str()), IngestError);
}
