#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace stsnn {

struct SvmParams {
  double c = 1.0;
  int epochs = 200;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SvmParams&) const = default;
};

/// One-vs-rest linear SVM. weights is class-major: class k occupies [k*features, (k+1)*features).
struct SvmModel {
  int classes = 0;
  int features = 0;
  std::vector<double> weights;
  std::vector<double> biases;
  SvmParams params;

  double decision(int k, std::span<const float> x) const;
  void validate() const;
  bool operator==(const SvmModel&) const = default;
};

/// Hinge-loss subgradient descent (Pegasos) with lambda = 1/(C n), bias as an
/// extra constant feature. Each binary problem runs in the dual (Gram) form,
/// which yields the same iterates as the primal updates.
SvmModel train_svm(std::span<const std::vector<float>> features, std::span<const int> labels, int classes,
                   const SvmParams& params);

/// argmax over decision values; ties go to the lowest class index.
int predict(const SvmModel& model, std::span<const float> feature);

struct EvalResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]

  double accuracy() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }
  /// Adds another fold's counts (sample-weighted accumulation).
  void merge(const EvalResult& other);
};

EvalResult evaluate(const SvmModel& model, std::span<const std::vector<float>> features, std::span<const int> labels);

struct RunSummary {
  std::vector<double> runs;
  double mean = 0.0;
  double std = 0.0;  // population

  std::string format() const;  // "mean ± std"
};

RunSummary aggregate_runs(std::span<const double> accuracies);

/// Two decimals, ties rounded away from zero.
std::string format_percent(double value);

// Model checkpoint: "STSV", u32 version, u32 classes, u32 features, f64 C,
// u32 epochs, u64 seed, f64 weights, f64 biases.
std::vector<std::uint8_t> serialize_model(const SvmModel& model);
SvmModel deserialize_model(std::vector<std::uint8_t> bytes, const std::string& source = "model");
void save_model(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_model(const std::filesystem::path& path);

}  // namespace stsnn
