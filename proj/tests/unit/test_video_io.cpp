#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "stsnn/errors.hpp"
#include "stsnn/motion_streams.hpp"
#include "stsnn/video_io.hpp"
#include "test_util.hpp"

using namespace stsnn;

namespace {

VideoTensor numbered_video(int w, int h, int frames) {
  VideoTensor v(w, h, 1, frames);
  for (int n = 0; n < frames; ++n)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) v.at(x, y, 0, n) = static_cast<float>(n) / static_cast<float>(std::max(frames, 1));
  return v;
}

// Straightforward enumeration of the looping rule: walk 0, s, 2s, ... and
// restart from 0 whenever the index runs past the end of the source.
std::vector<int> enumerate_indices(int length, int stride, int count) {
  std::vector<int> out;
  int idx = 0;
  while (static_cast<int>(out.size()) < count) {
    if (idx >= length) idx = 0;
    out.push_back(idx);
    idx += stride;
  }
  return out;
}

}  // namespace

TEST_CASE("storage order is x fastest, then y, c, n") {
  VideoTensor v(3, 2, 2, 2);
  CHECK(v.index(1, 0, 0, 0) == 1);
  CHECK(v.index(0, 1, 0, 0) == 3);
  CHECK(v.index(0, 0, 1, 0) == 6);
  CHECK(v.index(0, 0, 0, 1) == 12);
}

TEST_CASE("40-frame video with defaults samples every 4th frame") {
  const auto idx = sample_frame_indices(40, ClipSpec{});
  CHECK(idx == std::vector<int>{0, 4, 8, 12, 16, 20, 24, 28, 32, 36});
  const auto clip = load_clip(numbered_video(8, 6, 40), ClipSpec{});
  CHECK(clip.depth() == 10);
  CHECK(clip.width() == 4);
  CHECK(clip.height() == 3);
  CHECK(clip.at(0, 0, 0, 3) == doctest::Approx(12.0 / 40.0));
}

TEST_CASE("short videos loop their frame indices") {
  CHECK(sample_frame_indices(20, ClipSpec{}) == std::vector<int>{0, 4, 8, 12, 16, 0, 4, 8, 12, 16});
  for (int length = 1; length <= 45; ++length)
    for (int stride : {1, 2, 3, 4, 7})
      for (int count : {1, 5, 10}) {
        ClipSpec spec{count, stride, 0.5};
        CHECK(sample_frame_indices(length, spec) == enumerate_indices(length, stride, count));
      }
}

TEST_CASE("single-frame video keeps its content") {
  VideoTensor src(4, 4, 1, 1);
  Rng rng(1);
  for (float& v : src.values()) v = static_cast<float>(rng.uniform());
  const auto clip = load_clip(src, ClipSpec{1, 1, 1.0});
  CHECK(clip == src);
}

TEST_CASE("load_clip is deterministic and values stay in [0,1]") {
  Rng rng(5);
  VideoTensor src(17, 11, 3, 9);
  for (float& v : src.values()) v = static_cast<float>(rng.uniform());
  const auto a = load_clip(src, ClipSpec{});
  const auto b = load_clip(src, ClipSpec{});
  CHECK(a == b);
  CHECK(a.width() == 9);
  CHECK(a.height() == 6);
  CHECK(a.channels() == 1);
  for (float v : a.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("empty sources are rejected") {
  CHECK_THROWS_AS(sample_frame_indices(0, ClipSpec{}), IngestError);
  CHECK_THROWS_AS(load_clip(VideoTensor(), ClipSpec{}), IngestError);
}

TEST_CASE("resize_half examples") {
  const auto constant = resize_half(Plane(4, 4, 0.5f));
  CHECK_FALSE(constant.warning);
  CHECK(constant.plane.width() == 2);
  for (float v : constant.plane.values()) CHECK(v == doctest::Approx(0.5f));

  Plane ramp(2, 2);
  ramp(1, 0) = 1.0f;
  ramp(1, 1) = 1.0f;
  const auto half = resize_half(ramp);
  CHECK(half.plane.width() == 1);
  CHECK(half.plane(0, 0) == doctest::Approx(0.5f));

  CHECK(resize_half(Plane(160, 120)).plane.width() == 80);
  CHECK(resize_half(Plane(160, 120)).plane.height() == 60);
  CHECK(resize_half(Plane(5, 7)).plane.width() == 3);
  CHECK(resize_half(Plane(5, 7)).plane.height() == 4);

  const auto thin = resize_half(Plane(1, 8, 0.3f));
  CHECK(thin.warning);
  CHECK(thin.plane.width() == 1);
  CHECK(thin.plane.height() == 8);
}

TEST_CASE("luminance uses Rec. 601 weights") {
  VideoTensor rgb(1, 1, 3, 1);
  rgb.at(0, 0, 0, 0) = 1.0f;
  CHECK(to_luminance(rgb, 0)(0, 0) == doctest::Approx(0.299));
  rgb.at(0, 0, 1, 0) = 1.0f;
  rgb.at(0, 0, 2, 0) = 1.0f;
  CHECK(to_luminance(rgb, 0)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("clip files round-trip bit-exactly") {
  const auto dir = testutil::temp_dir("clip_io");
  Rng rng(9);
  VideoTensor v(5, 4, 2, 3);
  for (float& x : v.values()) x = static_cast<float>(rng.uniform());
  write_clip(dir / "a.stvt", v);
  CHECK(read_clip(dir / "a.stvt") == v);
  std::ofstream(dir / "bad.stvt", std::ios::binary) << "XXXX";
  CHECK_THROWS_AS(read_clip(dir / "bad.stvt"), IngestError);
}

TEST_CASE("frame directories load in name order and name bad frames") {
  const auto dir = testutil::temp_dir("frames");
  Plane a(4, 3, 0.2f), b(4, 3, 0.8f);
  write_pgm(dir / "f001.pgm", b);
  write_pgm(dir / "f000.pgm", a);
  const auto v = read_frame_directory(dir);
  CHECK(v.depth() == 2);
  CHECK(v.at(0, 0, 0, 0) == doctest::Approx(0.2f).epsilon(0.01));
  CHECK(v.at(0, 0, 0, 1) == doctest::Approx(0.8f).epsilon(0.01));
  std::ofstream(dir / "f002.pgm") << "P5\n4 3\n255\n";  // truncated pixel data
  try {
    read_frame_directory(dir);
    FAIL("expected an ingest error");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("f002.pgm") != std::string::npos);
  }
  const auto empty = testutil::temp_dir("frames_empty");
  CHECK_THROWS_WITH_AS(read_frame_directory(empty), doctest::Contains("empty input"), IngestError);
}

namespace {

DatasetManifest subject_manifest(const std::vector<std::string>& subjects, SplitProtocol protocol) {
  DatasetManifest m;
  m.class_names = {"walk", "run"};
  m.protocol = protocol;
  int i = 0;
  for (const auto& s : subjects)
    for (int label = 0; label < 2; ++label) {
      m.samples.push_back({"c" + std::to_string(i++), s, label, "x"});
    }
  return m;
}

void check_partition(const DatasetManifest& m, const std::vector<Fold>& folds) {
  for (const auto& f : folds) {
    std::vector<std::size_t> tr = f.train, te = f.test;
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    std::vector<std::size_t> both;
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
    CHECK(both.empty());
    for (std::size_t i : f.train) CHECK(i < m.samples.size());
    for (std::size_t i : f.test) CHECK(i < m.samples.size());
  }
}

}  // namespace

TEST_CASE("KTH fixed-subject split uses the published subject lists") {
  std::vector<std::string> subjects;
  for (int s = 1; s <= 25; ++s) subjects.push_back((s < 10 ? "0" : "") + std::to_string(s));
  const auto m = subject_manifest(subjects, SplitProtocol::FixedSubject);
  const auto folds = make_splits(m);
  REQUIRE(folds.size() == 1);
  std::set<int> train, test;
  for (auto i : folds[0].train) train.insert(std::stoi(m.samples[i].subject));
  for (auto i : folds[0].test) test.insert(std::stoi(m.samples[i].subject));
  CHECK(train == std::set<int>{11, 12, 13, 14, 15, 16, 17, 18});
  CHECK(test == std::set<int>{2, 3, 5, 6, 7, 8, 9, 10, 22});
  check_partition(m, folds);
}

TEST_CASE("leave-one-subject-out yields one fold per subject") {
  std::vector<std::string> subjects;
  for (int s = 1; s <= 9; ++s) subjects.push_back("s" + std::to_string(s));
  const auto m = subject_manifest(subjects, SplitProtocol::LeaveOneSubjectOut);
  const auto folds = make_splits(m);
  CHECK(folds.size() == 9);
  std::size_t tested = 0;
  for (const auto& f : folds) {
    std::set<std::string> s;
    for (auto i : f.test) s.insert(m.samples[i].subject);
    CHECK(s.size() == 1);
    CHECK(f.train.size() + f.test.size() == m.samples.size());
    tested += f.test.size();
  }
  CHECK(tested == m.samples.size());
  check_partition(m, folds);
  CHECK_THROWS_AS(make_splits(subject_manifest({"only"}, SplitProtocol::LeaveOneSubjectOut)), ManifestError);
}

TEST_CASE("subject protocols require subject ids") {
  auto m = subject_manifest({"1", "2"}, SplitProtocol::LeaveOneSubjectOut);
  m.samples[0].subject = "";
  CHECK_THROWS_AS(make_splits(m), ManifestError);
}

TEST_CASE("class-thirds puts every third sample of a class in the test set") {
  DatasetManifest m;
  m.class_names = {"a", "b"};
  for (int i = 0; i < 12; ++i) m.samples.push_back({"c" + std::to_string(i), "", i % 2, "x"});
  const auto folds = make_splits(m);
  REQUIRE(folds.size() == 1);
  CHECK(folds[0].test.size() == 4);
  CHECK(folds[0].train.size() == 8);
  check_partition(m, folds);
}

TEST_CASE("manifest text round-trips and reports bad lines") {
  auto m = subject_manifest({"1", "2"}, SplitProtocol::LeaveOneSubjectOut);
  const auto parsed = parse_manifest(format_manifest(m));
  CHECK(parsed.samples.size() == m.samples.size());
  CHECK(parsed.class_names == m.class_names);
  CHECK(parsed.protocol == m.protocol);
  CHECK(parsed.samples[3].clip_id == m.samples[3].clip_id);
  CHECK_THROWS_AS(parse_manifest("only-one-column\n"), ManifestError);
}

TEST_CASE("synthetic generator is deterministic and seed-sensitive") {
  SyntheticSpec spec;
  spec.classes = {MotionKind::BarLeft, MotionKind::BarRight};
  spec.n_per_class = 5;
  spec.seed = 7;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.sources.size() == 10);
  CHECK(a.manifest.class_names.size() == 2);
  CHECK(a.sources == b.sources);
  spec.seed = 8;
  CHECK(generate_synthetic(spec).sources != a.sources);
}

TEST_CASE("frame subtraction of a solid moving bar is nonzero exactly where the bar moved") {
  SyntheticSpec spec;
  spec.classes = {MotionKind::BarLeft, MotionKind::BarDown};
  spec.n_per_class = 3;
  spec.seed = 11;
  const auto ds = generate_synthetic(spec);
  for (std::size_t s = 0; s < ds.sources.size(); ++s) {
    const auto& t = ds.tracks[s];
    const auto fs = frame_subtract(ds.sources[s]);
    auto on_bar = [&](int x, int y, int n) {
      const int a = t.horizontal ? x : y;
      const int b = t.horizontal ? y : x;
      const int lo = t.start + t.speed * n;
      return a >= lo && a < lo + t.thickness && b >= t.span_begin && b < t.span_end;
    };
    int mismatches = 0;
    for (int n = 0; n < fs.depth(); ++n)
      for (int y = 0; y < fs.height(); ++y)
        for (int x = 0; x < fs.width(); ++x) {
          const bool moved = on_bar(x, y, n) != on_bar(x, y, n + 1);
          if ((fs.at(x, y, 0, n) != 0.0f) != moved) ++mismatches;
        }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("static texture clips have all-zero frame differences") {
  SyntheticSpec spec;
  spec.classes = {MotionKind::StaticA, MotionKind::StaticB};
  spec.n_per_class = 2;
  const auto ds = generate_synthetic(spec);
  for (const auto& src : ds.sources) {
    const auto diff = frame_subtract(src);
    for (float v : diff.values()) CHECK(v == 0.0f);
  }
}
