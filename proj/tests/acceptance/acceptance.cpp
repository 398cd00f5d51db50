// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "stsnn/experiment.hpp"
#include "stsnn/motion_streams.hpp"
#include "stsnn/retina_codec.hpp"
#include "stsnn/snn_engine.hpp"

#ifndef STSNN_CONFIG_DIR
#define STSNN_CONFIG_DIR "configs"
#endif

using namespace stsnn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int worker_count() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

ExperimentConfig config_file(const std::string& name, const std::vector<std::string>& overrides = {}) {
  return load_config(std::filesystem::path(STSNN_CONFIG_DIR) / name, overrides);
}

// 1
Outcome codec_round_trip() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  VideoTensor v(100, 100, 1, 1);
  for (float& x : v.values()) x = static_cast<float>(1.0 - rng.uniform());  // (0,1]
  const auto decoded = decode_first_spike(latency_encode(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < v.values().size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(decoded.values()[i]) - v.values()[i]));
  const VideoTensor zero(3, 3, 1, 1);
  const auto zero_spikes = latency_encode(zero);
  const auto zero_decoded = decode_first_spike(zero_spikes);
  const bool zero_ok = zero_spikes.events.empty() &&
                       std::all_of(zero_decoded.values().begin(), zero_decoded.values().end(),
                                   [](float x) { return x == 0.0f; });
  const double elapsed = seconds_since(start);
  return {worst < 1e-9 && zero_ok && elapsed < 1.0,
          fmt("max error %.3g over 10000 values, %.3f s", worst, elapsed) + (zero_ok ? "" : ", zero is not silent")};
}

// 2
Outcome dog_correctness() {
  const auto kernel = build_dog_kernel(DoGParams{});
  const double sum = std::accumulate(kernel.values.begin(), kernel.values.end(), 0.0);
  Rng rng(202);
  bool constant_zero = true;
  bool disjoint = true;
  for (int i = 0; i < 100; ++i) {
    const int w = 16 + static_cast<int>(rng.below(33));
    const int h = 16 + static_cast<int>(rng.below(33));
    const Plane flat(w, h, static_cast<float>(rng.uniform()));
    for (double r : dog_response(flat, kernel)) constant_zero &= r == 0.0;
    Plane img(w, h);
    for (float& x : img.values()) x = static_cast<float>(rng.uniform());
    const auto oo = dog_filter(img, DoGParams{});
    for (std::size_t p = 0; p < img.size(); ++p) disjoint &= oo.on.values()[p] * oo.off.values()[p] == 0.0f;
  }
  std::string detail = fmt("kernel sum %.3g", sum);
  if (!constant_zero) detail += ", non-zero response on a constant image";
  if (!disjoint) detail += ", on and off overlap";
  return {std::abs(sum) < 1e-9 && constant_zero && disjoint, detail + ", 100 images"};
}

// 3
Outcome stdp_oracle() {
  const STDPParams p;
  const double same = stdp_delta(0.4, 0.4, p);
  const double at_tau = stdp_delta(0.2, 0.2 + p.tau, p);
  bool ok = same == 0.1 && std::abs(at_tau - 0.1 * std::exp(-1.0)) < 1e-12;
  double previous_pot = 1.0;
  double previous_dep = -1.0;
  for (int i = 0; i <= 999; ++i) {
    const double gap = i / 999.0;
    const double pot = stdp_delta(0.0, gap, p);
    ok &= pot > 0.0 && pot <= p.learning_rate;
    if (i > 0) ok &= pot < previous_pot;
    previous_pot = pot;
    if (i > 0) {
      const double dep = stdp_delta(gap, 0.0, p);
      ok &= dep < 0.0 && dep >= -p.learning_rate;
      ok &= dep > previous_dep;
      previous_dep = dep;
    }
  }
  return {ok, fmt("dw(0) = %.17g, dw(tau) = %.17g, 1000-point sign/monotonicity grid", same, at_tau)};
}

// 4: the scalar simulation below shares no code with the engine.
struct ScalarNeuron {
  std::vector<double> w;
  double threshold = 0.0;
};

std::optional<double> scalar_fire(const std::vector<double>& t_pre, const ScalarNeuron& n) {
  std::vector<std::size_t> order(t_pre.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t_pre[a] < t_pre[b]; });
  double v = 0.0;
  for (std::size_t s : order) {
    if (!std::isfinite(t_pre[s])) break;
    v += n.w[s];
    if (v >= n.threshold) return t_pre[s];
  }
  return std::nullopt;
}

Outcome homeostasis_convergence() {
  const auto start = std::chrono::steady_clock::now();
  LayerConfig cfg;
  cfg.filters = 1;
  Rng rng(404);
  VideoTensor patch(cfg.kernel_w, cfg.kernel_h, 2, 1);
  for (float& x : patch.values()) x = static_cast<float>(rng.uniform());
  std::vector<InputSpike> events;
  SpikeGrid(latency_encode(patch)).gather(0, 0, 0, cfg, events);

  SpikingConvLayer layer(cfg, 405);
  ScalarNeuron n{std::vector<double>(layer.weights(0).begin(), layer.weights(0).end()), layer.thresholds()[0]};
  std::vector<double> t_pre(static_cast<std::size_t>(cfg.synapses()), INFINITY);
  for (const auto& e : events) t_pre[static_cast<std::size_t>(e.synapse)] = e.t;

  const double eta_th = cfg.homeo.learning_rate, target = cfg.target_time;
  const double eta_w = cfg.stdp.learning_rate, tau = cfg.stdp.tau;
  double max_gap = 0.0;
  bool same_pattern = true;
  double lib_sum = 0.0, sim_sum = 0.0;
  int lib_fired = 0, sim_fired = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto out = train_on_patch(layer, events);
    const auto fire = scalar_fire(t_pre, n);
    if (fire) {
      for (std::size_t s = 0; s < n.w.size(); ++s) {
        const double pre = std::isfinite(t_pre[s]) ? t_pre[s] : 1.0;
        const double dw = pre <= *fire ? eta_w * std::exp(-(*fire - pre) / tau) : -eta_w * std::exp(-(pre - *fire) / tau);
        n.w[s] = std::min(1.0, std::max(0.0, n.w[s] + dw));
      }
      n.threshold = std::max(cfg.homeo.min_threshold, n.threshold - eta_th * (*fire - target));
    } else {
      n.threshold = std::max(cfg.homeo.min_threshold, n.threshold - eta_th * (1.0 - target));
    }
    same_pattern &= out.winner.has_value() == fire.has_value();
    if (out.winner && fire) max_gap = std::max(max_gap, std::abs(out.fire_time - *fire));
    if (i >= 4500) {
      if (out.winner) lib_sum += out.fire_time, ++lib_fired;
      if (fire) sim_sum += *fire, ++sim_fired;
    }
  }
  const double lib_mean = lib_fired ? lib_sum / lib_fired : INFINITY;
  const double sim_mean = sim_fired ? sim_sum / sim_fired : INFINITY;
  const double elapsed = seconds_since(start);
  const bool pass = same_pattern && max_gap < 1e-9 && std::abs(lib_mean - target) <= 0.05 &&
                    std::abs(sim_mean - target) <= 0.05 && elapsed < 10.0;
  return {pass, fmt("mean fire time %.4f (scalar model %.4f) over presentations 4500-5000, max gap %.3g, %.2f s",
                    lib_mean, sim_mean, max_gap, elapsed)};
}

// 5
Outcome wta_exclusivity(const ExperimentResult& r) {
  bool ok = true;
  std::size_t fired = 0, updates = 0, patches = 0;
  for (const auto& role : r.training)
    for (const auto& s : role) {
      const auto wins = std::accumulate(s.wins.begin(), s.wins.end(), std::size_t{0});
      ok &= s.stdp_updates == s.patches_fired && s.max_updates_per_patch <= 1 && wins == s.patches_fired;
      fired += s.patches_fired;
      updates += s.stdp_updates;
      patches += s.patches;
    }
  ok &= fired > 0;
  return {ok, fmt("%.0f patches, %.0f fired, %.0f STDP updates", static_cast<double>(patches),
                  static_cast<double>(fired), static_cast<double>(updates))};
}

// 6
Outcome shape_contract() {
  std::size_t cases = 0, forward_cases = 0;
  bool ok = true;
  Rng rng(606);
  for (int w = 5; w <= 15; ++w)
    for (int h = 5; h <= 15; ++h)
      for (int d = 5; d <= 15; ++d)
        for (int kw : {3, 5})
          for (int kh : {3, 5})
            for (int kt : {1, 2})
              for (int st : {1, 2}) {
                LayerConfig c;
                c.filters = 2;
                c.kernel_w = kw;
                c.kernel_h = kh;
                c.kernel_t = kt;
                c.stride_x = c.stride_y = c.stride_t = st;
                const SpikeDims in{w, h, 2, d};
                const auto o = conv_output_shape(in, c);
                const OutputShape expect{(w - kw) / st + 1, (h - kh) / st + 1, (d - kt) / st + 1, 2};
                ok &= o == expect;
                ++cases;
                if (w == h && h == d) {
                  VideoTensor v(w, h, 2, d);
                  for (float& x : v.values()) x = rng.uniform() < 0.3 ? static_cast<float>(rng.uniform()) : 0.0f;
                  const auto out = infer(latency_encode(v), SpikingConvLayer(c, 607));
                  ok &= out.dims == SpikeDims{expect.width, expect.height, expect.filters, expect.depth};
                  ++forward_cases;
                }
              }
  return {ok, fmt("%.0f shape cases, %.0f checked through the forward pass", static_cast<double>(cases),
                  static_cast<double>(forward_cases))};
}

// 7
Outcome motion_grid_identities() {
  Rng rng(707);
  bool ok = true;
  for (int i = 0; i < 100; ++i) {
    const int w = 4 + static_cast<int>(rng.below(29)), h = 4 + static_cast<int>(rng.below(29));
    FlowField f{Plane(w, h), Plane(w, h)};
    for (float& v : f.dx.values()) v = rng.uniform() < 0.1 ? 0.0f : static_cast<float>(rng.uniform(-5.0, 5.0));
    for (float& v : f.dy.values()) v = rng.uniform() < 0.1 ? 0.0f : static_cast<float>(rng.uniform(-5.0, 5.0));
    const auto m = directional_maps(f);
    for (std::size_t p = 0; p < f.dx.size(); ++p) {
      ok &= m.right.values()[p] - m.left.values()[p] == f.dx.values()[p];
      ok &= m.left.values()[p] * m.right.values()[p] == 0.0f;
      ok &= m.up.values()[p] * m.down.values()[p] == 0.0f;
    }
  }
  return {ok, "100 random flow fields"};
}

// 8
double texture(double x, double y) {
  return 0.5 + 0.18 * std::sin(0.31 * x + 0.52 * y) + 0.14 * std::sin(0.47 * x - 0.23 * y + 1.0) +
         0.1 * std::cos(0.117 * x + 0.37 * y);
}

Outcome flow_sanity() {
  const int size = 64, margin = 8;
  Plane a(size, size), b(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      a(x, y) = static_cast<float>(texture(x, y));
      b(x, y) = static_cast<float>(texture(x - 1.0, y));
    }
  const auto f = dense_flow(a, b);
  std::vector<double> xs, ys;
  for (int y = margin; y < size - margin; ++y)
    for (int x = margin; x < size - margin; ++x) {
      xs.push_back(f.dx(x, y));
      ys.push_back(std::abs(f.dy(x, y)));
    }
  const auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  const double mx = median(xs), my = median(ys);
  return {mx >= 0.8 && mx <= 1.2 && my < 0.2, fmt("median OF_x %.4f, median |OF_y| %.4f", mx, my)};
}

double run_accuracy(const ExperimentResult& r, int column, std::size_t run) {
  return r.evaluations[static_cast<std::size_t>(column)][run].accuracy();
}

// 9
Outcome micro_benchmark(const ExperimentResult& r, double elapsed) {
  bool ok = elapsed < 600.0;
  std::string detail;
  for (std::size_t run = 0; run < r.evaluations[0].size(); ++run) {
    const double s = run_accuracy(r, 0, run), t = run_accuracy(r, 1, run), f = run_accuracy(r, 2, run);
    ok &= t >= 85.0 && s >= 40.0 && f >= std::max(s, t) - 2.0;
    detail += fmt("run %.0f: spatial %.2f temporal %.2f fused %.2f; ", static_cast<double>(run + 1), s, t, f);
  }
  ok &= !r.evaluations[0].empty();
  return {ok, detail + fmt("%.1f s single-threaded", elapsed)};
}

// 10
Outcome redundancy_trend(const ExperimentResult& fs, const ExperimentResult& conv3d) {
  const double gain_3d = conv3d.summaries[2].mean - conv3d.summaries[1].mean;
  const double gain_fs = fs.summaries[2].mean - fs.summaries[1].mean;
  return {gain_3d <= gain_fs, fmt("fused gain over raw-3D %.2f <= fused gain over frame subtraction %.2f", gain_3d,
                                  gain_fs)};
}

// 11
Outcome cutoff_loss(const ExperimentResult& c0, const ExperimentResult& c20) {
  bool ok = true;
  for (int col : {0, 1}) ok &= c20.summaries[col].mean <= c0.summaries[col].mean + 2.0;
  return {ok, fmt("spatial %.2f -> %.2f, temporal %.2f -> %.2f (cutoff 0 -> 20)", c0.summaries[0].mean,
                  c20.summaries[0].mean, c0.summaries[1].mean, c20.summaries[1].mean)};
}

// 12
Outcome determinism(const ExperimentResult& first, const ExperimentResult& second) {
  return {!first.report.empty() && first.report == second.report,
          fmt("reports of %.0f and %.0f bytes", static_cast<double>(first.report.size()),
              static_cast<double>(second.report.size()))};
}

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  report(1, "codec round-trip", codec_round_trip);
  report(2, "DoG correctness", dog_correctness);
  report(3, "STDP oracle", stdp_oracle);
  report(4, "homeostasis convergence", homeostasis_convergence);

  std::optional<ExperimentResult> micro;
  double micro_seconds = 0.0;
  const auto run_micro = [&] {
    if (micro) return;
    const auto start = std::chrono::steady_clock::now();
    micro = run_experiment(config_file("micro_fs.conf"), RunOptions{PipelineCache{}, 1});
    micro_seconds = seconds_since(start);
  };
  report(5, "WTA exclusivity", [&] {
    run_micro();
    return wta_exclusivity(*micro);
  });
  report(6, "shape contract", shape_contract);
  report(7, "motion-grid identities", motion_grid_identities);
  report(8, "flow sanity", flow_sanity);
  report(9, "two-stream micro-benchmark", [&] {
    run_micro();
    return micro_benchmark(*micro, micro_seconds);
  });
  const RunOptions parallel{PipelineCache{}, worker_count()};
  report(10, "redundancy trend", [&] {
    run_micro();
    return redundancy_trend(*micro, run_experiment(config_file("micro_conv3d.conf"), parallel));
  });
  report(11, "cutoff information loss", [&] {
    const auto c0 = run_experiment(config_file("micro_noisy.conf", {"codec.cutoff=0"}), parallel);
    const auto c20 = run_experiment(config_file("micro_noisy.conf", {"codec.cutoff=20"}), parallel);
    return cutoff_loss(c0, c20);
  });
  report(12, "determinism", [&] {
    run_micro();
    return determinism(*micro, run_experiment(config_file("micro_fs.conf"), RunOptions{PipelineCache{}, 1}));
  });
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
