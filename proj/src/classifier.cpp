#include "stsnn/classifier.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "stsnn/binary_io.hpp"
#include "stsnn/errors.hpp"
#include "stsnn/rng.hpp"

namespace stsnn {

void SvmParams::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ParameterError("svm C must be positive");
  if (epochs < 1) throw ParameterError("svm epochs must be >= 1");
}

double SvmModel::decision(int k, std::span<const float> x) const {
  const double* w = weights.data() + static_cast<std::size_t>(k) * features;
  double acc = biases[k];
  for (int i = 0; i < features; ++i) acc += w[i] * x[i];
  return acc;
}

void SvmModel::validate() const {
  if (classes < 2 || features < 1) throw InputError("svm model needs >= 2 classes and >= 1 feature");
  if (weights.size() != static_cast<std::size_t>(classes) * features || biases.size() != static_cast<std::size_t>(classes))
    throw InputError("svm model weight storage does not match its shape");
}

namespace {

std::vector<double> gram_matrix(std::span<const std::vector<float>> x) {
  const std::size_t n = x.size();
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 1.0;  // constant bias feature
      const float* a = x[i].data();
      const float* b = x[j].data();
      for (std::size_t d = 0; d < x[i].size(); ++d) acc += static_cast<double>(a[d]) * b[d];
      k[i * n + j] = acc;
      k[j * n + i] = acc;
    }
  return k;
}

// Returns alpha (hinge-active counts) and the final step count.
std::vector<double> pegasos_dual(const std::vector<double>& gram, const std::vector<double>& y, double lambda,
                                 int epochs, Rng& rng, double& scale) {
  const std::size_t n = y.size();
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  std::uint64_t t = 0;
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i : order) {
      ++t;
      double s = 0.0;
      if (t > 1) {
        const double* row = gram.data() + i * n;
        for (std::size_t j = 0; j < n; ++j)
          if (alpha[j] != 0.0) s += alpha[j] * y[j] * row[j];
        s /= lambda * static_cast<double>(t - 1);
      }
      if (y[i] * s < 1.0) alpha[i] += 1.0;
    }
  }
  scale = 1.0 / (lambda * static_cast<double>(t));
  return alpha;
}

}  // namespace

SvmModel train_svm(std::span<const std::vector<float>> features, std::span<const int> labels, int classes,
                   const SvmParams& params) {
  params.validate();
  if (features.size() != labels.size()) throw InputError("feature and label counts differ");
  if (features.empty()) throw TrainingError("svm training set is empty");
  const std::size_t d = features[0].size();
  if (d == 0) throw InputError("svm features are empty");
  for (const auto& f : features)
    if (f.size() != d) throw InputError("feature vectors have inconsistent lengths");
  std::vector<bool> seen(static_cast<std::size_t>(std::max(classes, 0)), false);
  int distinct = 0;
  for (int l : labels) {
    if (l < 0 || l >= classes) throw InputError("label out of range");
    if (!seen[l]) ++distinct;
    seen[l] = true;
  }
  if (classes < 2 || distinct < 2) throw TrainingError("degenerate svm training: fewer than 2 classes present");

  SvmModel model;
  model.classes = classes;
  model.features = static_cast<int>(d);
  model.params = params;
  model.weights.assign(static_cast<std::size_t>(classes) * d, 0.0);
  model.biases.assign(static_cast<std::size_t>(classes), 0.0);

  const std::size_t n = features.size();
  const auto gram = gram_matrix(features);
  const double lambda = 1.0 / (params.c * static_cast<double>(n));
  for (int k = 0; k < classes; ++k) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == k ? 1.0 : -1.0;
    Rng rng(derive_seed(params.seed, "svm-class-" + std::to_string(k)));
    double scale = 0.0;
    const auto alpha = pegasos_dual(gram, y, lambda, params.epochs, rng, scale);
    double* w = model.weights.data() + static_cast<std::size_t>(k) * d;
    double b = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (alpha[j] == 0.0) continue;
      const double coef = scale * alpha[j] * y[j];
      const float* x = features[j].data();
      for (std::size_t i = 0; i < d; ++i) w[i] += coef * x[i];
      b += coef;
    }
    model.biases[k] = b;
  }
  return model;
}

int predict(const SvmModel& model, std::span<const float> feature) {
  if (feature.size() != static_cast<std::size_t>(model.features))
    throw InputError("feature length " + std::to_string(feature.size()) + " does not match model length " +
                     std::to_string(model.features));
  int best = 0;
  double best_value = model.decision(0, feature);
  for (int k = 1; k < model.classes; ++k) {
    const double v = model.decision(k, feature);
    if (v > best_value) {
      best = k;
      best_value = v;
    }
  }
  return best;
}

void EvalResult::merge(const EvalResult& other) {
  if (confusion.empty()) confusion = other.confusion;
  else {
    if (confusion.size() != other.confusion.size()) throw InputError("confusion matrices differ in class count");
    for (std::size_t i = 0; i < confusion.size(); ++i)
      for (std::size_t j = 0; j < confusion.size(); ++j) confusion[i][j] += other.confusion[i][j];
  }
  correct += other.correct;
  total += other.total;
}

EvalResult evaluate(const SvmModel& model, std::span<const std::vector<float>> features, std::span<const int> labels) {
  if (features.empty()) throw EvaluationError("cannot evaluate on an empty test set");
  if (features.size() != labels.size()) throw InputError("feature and label counts differ");
  EvalResult r;
  r.confusion.assign(static_cast<std::size_t>(model.classes), std::vector<std::size_t>(model.classes, 0));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= model.classes) throw InputError("test label out of range");
    const int p = predict(model, features[i]);
    ++r.confusion[labels[i]][p];
    if (p == labels[i]) ++r.correct;
    ++r.total;
  }
  return r;
}

std::string format_percent(double value) {
  // Nudge before rounding so decimal ties such as 0.125 -> 0.13 survive binary representation.
  const double scaled = std::round(value * 100.0 + (value >= 0 ? 1e-7 : -1e-7));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", scaled / 100.0);
  return buf;
}

std::string RunSummary::format() const { return format_percent(mean) + " ± " + format_percent(std); }

RunSummary aggregate_runs(std::span<const double> accuracies) {
  if (accuracies.empty()) throw EvaluationError("no runs to aggregate");
  RunSummary s;
  s.runs.assign(accuracies.begin(), accuracies.end());
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  s.mean = sum / static_cast<double>(accuracies.size());
  double sq = 0.0;
  for (double a : accuracies) sq += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(accuracies.size()));
  return s;
}

std::vector<std::uint8_t> serialize_model(const SvmModel& model) {
  model.validate();
  ByteWriter w;
  w.magic("STSV");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(model.classes));
  w.u32(static_cast<std::uint32_t>(model.features));
  w.f64(model.params.c);
  w.u32(static_cast<std::uint32_t>(model.params.epochs));
  w.u64(model.params.seed);
  w.f64s(model.weights);
  w.f64s(model.biases);
  return w.bytes();
}

SvmModel deserialize_model(std::vector<std::uint8_t> bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("STSV");
  if (r.u32() != 1) throw IngestError(source + ": unsupported model version");
  SvmModel m;
  m.classes = static_cast<int>(r.u32());
  m.features = static_cast<int>(r.u32());
  m.params.c = r.f64();
  m.params.epochs = static_cast<int>(r.u32());
  m.params.seed = r.u64();
  if (m.classes < 2 || m.features < 1 || static_cast<std::uint64_t>(m.classes) * m.features > (1ULL << 32))
    throw IngestError(source + ": implausible model shape");
  m.weights.resize(static_cast<std::size_t>(m.classes) * m.features);
  m.biases.resize(static_cast<std::size_t>(m.classes));
  r.f64s(m.weights);
  r.f64s(m.biases);
  r.expect_end();
  return m;
}

void save_model(const std::filesystem::path& path, const SvmModel& model) {
  write_file_atomic(path, serialize_model(model));
}

SvmModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file_bytes(path), path.string()); }

}  // namespace stsnn
