#include <cmath>
#include <numeric>

#include "doctest.h"
#include "stsnn/errors.hpp"
#include "stsnn/retina_codec.hpp"
#include "test_util.hpp"

using namespace stsnn;

namespace {
double kernel_sum(const Kernel2D& k) { return std::accumulate(k.values.begin(), k.values.end(), 0.0); }
}  // namespace

TEST_CASE("DoG kernel (7, 1, 4) sums to zero and matches the scripted oracle") {
  const auto k = build_dog_kernel(DoGParams{});
  CHECK(std::abs(kernel_sum(k)) < 1e-9);
  // Independent numpy evaluation of the two normalized discretized Gaussians.
  CHECK(k(3, 3) == doctest::Approx(0.13333647182417607).epsilon(1e-12));
  CHECK(k(0, 0) == doctest::Approx(-0.014740374937622196).epsilon(1e-12));
  CHECK(k(3, 0) == doctest::Approx(-0.017784849500227951).epsilon(1e-12));
}

TEST_CASE("DoG kernel is zero-sum and symmetric for valid parameters") {
  for (int size : {3, 5, 7, 9, 11})
    for (double s1 : {0.5, 1.0, 1.5})
      for (double s2 : {2.0, 3.0, 4.0}) {
        const auto k = build_dog_kernel(DoGParams{size, s1, s2, 0.0});
        CHECK(std::abs(kernel_sum(k)) < 1e-9);
        for (int j = 0; j < size; ++j)
          for (int i = 0; i < size; ++i) {
            CHECK(k(i, j) == k(j, i));
            CHECK(k(i, j) == k(size - 1 - i, size - 1 - j));
          }
      }
}

TEST_CASE("identical Gaussians give an all-zero kernel; invalid parameters are rejected") {
  for (double v : build_dog_kernel_unchecked(7, 1.0, 1.0).values) CHECK(v == 0.0);
  CHECK_THROWS_AS(build_dog_kernel(DoGParams{7, 4.0, 1.0, 0.0}), ParameterError);
  CHECK_THROWS_AS(build_dog_kernel(DoGParams{7, 1.0, 1.0, 0.0}), ParameterError);
  CHECK_THROWS_AS(build_dog_kernel(DoGParams{6, 1.0, 4.0, 0.0}), ParameterError);
  CHECK_THROWS_AS(DoGParams({7, 1.0, 4.0, 300.0}).validate(), ParameterError);
}

TEST_CASE("constant frames produce no on/off response") {
  for (float level : {0.0f, 0.3f, 1.0f}) {
    const auto oo = dog_filter(Plane(12, 9, level), DoGParams{});
    for (float v : oo.on.values()) CHECK(v == 0.0f);
    for (float v : oo.off.values()) CHECK(v == 0.0f);
  }
}

TEST_CASE("on and off channels are disjoint") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto oo = dog_filter(testutil::random_plane(15, 11, rng), DoGParams{});
    for (std::size_t p = 0; p < oo.on.size(); ++p) CHECK(oo.on.values()[p] * oo.off.values()[p] == 0.0f);
  }
}

TEST_CASE("vertical step edge matches the scripted convolution") {
  Plane img(10, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 5; x < 10; ++x) img(x, y) = 1.0f;
  const auto oo = dog_filter(img, DoGParams{});
  // scipy.ndimage.correlate(mode='nearest') of the same kernel, divided by max |response|.
  const double expected[10] = {0, 0, -0.570764721, -1, -0.580481085, 0.580481085, 1, 0.570764721, 0, 0};
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 10; ++x) {
      const double v = oo.on(x, y) - oo.off(x, y);
      CHECK(v == doctest::Approx(expected[x]).epsilon(1e-6));
    }
  CHECK(oo.on(6, 2) == 1.0f);   // bright side
  CHECK(oo.off(3, 2) == 1.0f);  // dark side
}

TEST_CASE("cutoff examples on the 0-255 scale") {
  Plane p(3, 1);
  p(0, 0) = 5.0f / 255.0f;
  p(1, 0) = 15.0f / 255.0f;
  p(2, 0) = 25.0f / 255.0f;
  CHECK(apply_cutoff(p, 0.0) == p);
  const auto c10 = apply_cutoff(p, 10.0);
  CHECK(c10(0, 0) == 0.0f);
  CHECK(c10(1, 0) == p(1, 0));
  CHECK(c10(2, 0) == p(2, 0));
  Plane q(1, 1, 15.0f / 255.0f);
  CHECK(apply_cutoff(q, 20.0)(0, 0) == 0.0f);
}

TEST_CASE("higher cutoffs never increase a value") {
  Rng rng(8);
  const auto p = testutil::random_plane(30, 30, rng);
  const auto a = apply_cutoff(p, 10.0), b = apply_cutoff(p, 20.0);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(b.values()[i] <= a.values()[i]);
}

TEST_CASE("multi-channel retina filter yields an on/off pair per channel") {
  Rng rng(2);
  VideoTensor v(8, 8, 3, 2);
  for (float& x : v.values()) x = static_cast<float>(rng.uniform());
  const auto out = retina_filter(v, DoGParams{});
  CHECK(out.channels() == 6);
  CHECK(out.depth() == 2);
  const auto oo = dog_filter(v.plane(1, 1), DoGParams{});
  CHECK(out.plane(2, 1) == oo.on);
  CHECK(out.plane(3, 1) == oo.off);
}

TEST_CASE("latency coding examples") {
  VideoTensor v(3, 1, 1, 1);
  v.at(0, 0, 0, 0) = 1.0f;
  v.at(1, 0, 0, 0) = 0.35f;
  const auto s = latency_encode(v);
  REQUIRE(s.events.size() == 2);
  CHECK(s.events[0].t == 0.0);
  CHECK(s.events[0].x == 0);
  CHECK(s.events[1].t == doctest::Approx(0.65).epsilon(1e-7));
  CHECK_NOTHROW(s.validate());

  SpikingTensor one;
  one.dims = {1, 1, 1, 1};
  one.events.push_back({0, 0, 0, 0, 0.25});
  CHECK(decode_first_spike(one).at(0, 0, 0, 0) == 0.75f);
  SpikingTensor none;
  none.dims = {2, 2, 1, 1};
  const auto decoded = decode_first_spike(none);
  for (float x : decoded.values()) CHECK(x == 0.0f);
}

TEST_CASE("decode inverts encode and events are canonical") {
  Rng rng(12);
  VideoTensor v(7, 5, 2, 3);
  for (float& x : v.values()) x = rng.uniform() < 0.3 ? 0.0f : static_cast<float>(1.0 - rng.uniform());
  for (double t_exp : {1.0, 2.5}) {
    const auto s = latency_encode(v, t_exp);
    CHECK_NOTHROW(s.validate(t_exp));
    const auto back = decode_first_spike(s, t_exp);
    for (std::size_t i = 0; i < v.values().size(); ++i)
      CHECK(std::abs(back.values()[i] - v.values()[i]) < 1e-6);
  }
}

TEST_CASE("simultaneous events are ordered by x, y, z, c") {
  VideoTensor v(2, 2, 2, 1, 0.5f);
  const auto s = latency_encode(v);
  for (std::size_t i = 1; i < s.events.size(); ++i) CHECK(spike_before(s.events[i - 1], s.events[i]));
  CHECK(s.events.front().x == 0);
  CHECK(s.events.front().c == 0);
  CHECK(s.events[1].c == 1);
}

TEST_CASE("spike tensor validation catches duplicates and bad times") {
  SpikingTensor s;
  s.dims = {2, 1, 1, 1};
  s.events = {{0, 0, 0, 0, 0.1}, {0, 0, 0, 0, 0.2}};
  CHECK_THROWS_AS(s.validate(), InputError);
  s.events = {{1, 0, 0, 0, 1.5}};
  CHECK_THROWS_AS(s.validate(), InputError);
  s.events = {{0, 0, 0, 0, 0.5}, {1, 0, 0, 0, 0.2}};
  CHECK_THROWS_AS(s.validate(), InputError);
}

TEST_CASE("spike dump and stats") {
  VideoTensor v(2, 1, 1, 1);
  v.at(0, 0, 0, 0) = 0.5f;
  v.at(1, 0, 0, 0) = 0.25f;
  const auto s = latency_encode(v);
  CHECK(format_spike_dump(s) == "0.5,0,0,0,0\n0.75,1,0,0,0\n");
  const auto st = spike_stats(s);
  CHECK(st.events == 2);
  CHECK(st.mean_time == doctest::Approx(0.625));
}
