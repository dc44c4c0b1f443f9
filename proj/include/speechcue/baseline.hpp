#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"
#include "speechcue/metrics.hpp"
#include "speechcue/thresholds.hpp"

namespace speechcue::baseline {

enum class Encoding { Numerical, OneHot };

inline std::string_view to_string(Encoding e) { return e == Encoding::Numerical ? "numerical" : "onehot"; }

inline Encoding parse_encoding(std::string_view s) {
  if (s == "numerical") return Encoding::Numerical;
  if (s == "onehot") return Encoding::OneHot;
  throw Error(ErrorCode::InvalidArgument, "unknown encoding '" + std::string(s) + "'");
}

struct FeatureVector {
  std::vector<double> values;
  Encoding encoding = Encoding::Numerical;
  bool pitch_imputed = false;
};

// Standardized 5-vector in feature order; absent pitch becomes the
// standardized mean, 0.
inline FeatureVector encode(const FeatureValues& standardized) {
  FeatureVector v;
  v.encoding = Encoding::Numerical;
  v.values.reserve(5);
  for (auto f : kAllFeatures) {
    const auto& x = standardized[f];
    if (!x) v.pitch_imputed = true;
    v.values.push_back(x.value_or(0.0));
  }
  return v;
}

// Concatenated indicator blocks (avg_volume, volume_variation, avg_pitch,
// pitch_variation, speaking_rate). Absent pitch takes the middle level,
// index num_classes / 2, so every vector still has exactly five ones.
inline FeatureVector encode(const CategorizedFeatures& cf, int num_classes) {
  if (cf.num_classes != num_classes)
    throw Error(ErrorCode::SchemeMismatch, "levels use " + std::to_string(cf.num_classes) + " classes, expected " +
                                               std::to_string(num_classes));
  FeatureVector v;
  v.encoding = Encoding::OneHot;
  const auto k = static_cast<std::size_t>(num_classes);
  v.values.assign(5 * k, 0.0);
  auto set = [&](std::size_t block, const std::optional<CategorizedFeature>& c) {
    int index = num_classes / 2;
    if (c) index = c->level.index;
    else v.pitch_imputed = true;
    if (index < 0 || index >= num_classes) throw Error(ErrorCode::SchemeMismatch, "level index out of range");
    v.values[block * k + static_cast<std::size_t>(index)] = 1.0;
  };
  set(0, cf.avg_volume);
  set(1, cf.volume_variation);
  set(2, cf.avg_pitch);
  set(3, cf.pitch_variation);
  set(4, cf.speaking_rate);
  return v;
}

// ---------------------------------------------------------------------------
// One-hidden-layer perceptron: input -> ReLU(hidden) -> softmax(output)

struct ClassifierModel {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  std::vector<double> w1;  // hidden x inputs, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // outputs x hidden, row-major
  std::vector<double> b2;  // outputs

  ClassifierModel() = default;
  ClassifierModel(std::size_t in, std::size_t hid, std::size_t out)
      : inputs(in), hidden(hid), outputs(out), w1(hid * in, 0.0), b1(hid, 0.0), w2(out * hid, 0.0), b2(out, 0.0) {}

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  // Flat view order: w1, b1, w2, b2.
  double& parameter(std::size_t i) {
    if (i < w1.size()) return w1[i];
    i -= w1.size();
    if (i < b1.size()) return b1[i];
    i -= b1.size();
    if (i < w2.size()) return w2[i];
    return b2[i - w2.size()];
  }

  bool operator==(const ClassifierModel&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double l2 = 1e-4;
  std::size_t hidden = 32;

  void validate() const {
    if (!(learning_rate > 0.0) || epochs == 0 || batch_size == 0 || hidden == 0 || l2 < 0.0)
      throw Error(ErrorCode::InvalidArgument, "training hyperparameters must be positive");
  }
};

namespace detail {

struct Activations {
  std::vector<double> hidden;  // post-ReLU
  std::vector<double> logits;
  std::vector<double> probs;
};

inline void softmax_inplace(std::span<const double> logits, std::vector<double>& probs) {
  probs.resize(logits.size());
  double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - peak);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
}

inline void forward(const ClassifierModel& m, std::span<const double> x, Activations& a) {
  a.hidden.assign(m.hidden, 0.0);
  for (std::size_t h = 0; h < m.hidden; ++h) {
    double z = m.b1[h];
    const double* row = &m.w1[h * m.inputs];
    for (std::size_t i = 0; i < m.inputs; ++i) z += row[i] * x[i];
    a.hidden[h] = z > 0.0 ? z : 0.0;
  }
  a.logits.assign(m.outputs, 0.0);
  for (std::size_t o = 0; o < m.outputs; ++o) {
    double z = m.b2[o];
    const double* row = &m.w2[o * m.hidden];
    for (std::size_t h = 0; h < m.hidden; ++h) z += row[h] * a.hidden[h];
    a.logits[o] = z;
  }
  softmax_inplace(a.logits, a.probs);
}

}  // namespace detail

inline std::vector<double> logits(const ClassifierModel& m, std::span<const double> x) {
  if (x.size() != m.inputs) throw Error(ErrorCode::DimensionMismatch, "vector length does not match the model");
  detail::Activations a;
  detail::forward(m, x, a);
  return a.logits;
}

inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p;
  detail::softmax_inplace(z, p);
  return p;
}

// Mean softmax cross-entropy over the batch plus (l2/2)·||W||² on the weight
// matrices (biases are not penalized). Writes the gradient in the flat
// parameter order of ClassifierModel::parameter.
inline double loss_and_gradient(const ClassifierModel& m, std::span<const std::vector<double>> xs,
                                std::span<const int> ys, double l2, ClassifierModel* grad) {
  if (grad) *grad = ClassifierModel(m.inputs, m.hidden, m.outputs);
  detail::Activations a;
  std::vector<double> dlogit(m.outputs), dhidden(m.hidden);
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(xs.size());
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const auto& x = xs[n];
    const auto y = static_cast<std::size_t>(ys[n]);
    detail::forward(m, x, a);
    loss -= std::log(std::max(a.probs[y], 1e-300));
    if (!grad) continue;
    for (std::size_t o = 0; o < m.outputs; ++o) dlogit[o] = (a.probs[o] - (o == y ? 1.0 : 0.0)) * scale;
    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (std::size_t o = 0; o < m.outputs; ++o) {
      grad->b2[o] += dlogit[o];
      for (std::size_t h = 0; h < m.hidden; ++h) {
        grad->w2[o * m.hidden + h] += dlogit[o] * a.hidden[h];
        dhidden[h] += dlogit[o] * m.w2[o * m.hidden + h];
      }
    }
    for (std::size_t h = 0; h < m.hidden; ++h) {
      if (a.hidden[h] <= 0.0) continue;
      grad->b1[h] += dhidden[h];
      for (std::size_t i = 0; i < m.inputs; ++i) grad->w1[h * m.inputs + i] += dhidden[h] * x[i];
    }
  }
  loss *= scale;
  double penalty = 0.0;
  for (double w : m.w1) penalty += w * w;
  for (double w : m.w2) penalty += w * w;
  loss += 0.5 * l2 * penalty;
  if (grad) {
    for (std::size_t i = 0; i < m.w1.size(); ++i) grad->w1[i] += l2 * m.w1[i];
    for (std::size_t i = 0; i < m.w2.size(); ++i) grad->w2[i] += l2 * m.w2[i];
  }
  return loss;
}

inline ClassifierModel init_model(std::size_t inputs, std::size_t hidden, std::size_t outputs, std::uint64_t seed) {
  ClassifierModel m(inputs, hidden, outputs);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> he1(0.0, std::sqrt(2.0 / static_cast<double>(inputs)));
  std::normal_distribution<double> he2(0.0, std::sqrt(2.0 / static_cast<double>(hidden)));
  for (double& w : m.w1) w = he1(rng);
  for (double& w : m.w2) w = he2(rng);
  return m;
}

// Mini-batch gradient descent. `on_epoch`, when given, receives the mean
// training loss after every epoch.
template <typename EpochCallback = std::nullptr_t>
ClassifierModel train(std::span<const std::vector<double>> xs, std::span<const int> ys, std::size_t num_labels,
                      const TrainConfig& cfg, EpochCallback on_epoch = nullptr) {
  cfg.validate();
  if (xs.empty() || xs.size() != ys.size()) throw Error(ErrorCode::DimensionMismatch, "features and labels differ");
  const std::size_t dim = xs.front().size();
  for (const auto& x : xs)
    if (x.size() != dim) throw Error(ErrorCode::DimensionMismatch, "feature vectors differ in length");
  std::vector<bool> seen(num_labels, false);
  for (int y : ys) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_labels) throw Error(ErrorCode::InvalidArgument, "label index");
    seen[static_cast<std::size_t>(y)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2)
    throw Error(ErrorCode::DegenerateData, "training data holds a single class");

  std::mt19937_64 rng(cfg.seed);
  ClassifierModel model = init_model(dim, cfg.hidden, num_labels, rng());
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> batch_x;
  std::vector<int> batch_y;
  ClassifierModel grad;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_x.push_back(xs[order[i]]);
        batch_y.push_back(ys[order[i]]);
      }
      loss_and_gradient(model, batch_x, batch_y, cfg.l2, &grad);
      for (std::size_t p = 0; p < model.parameter_count(); ++p)
        model.parameter(p) -= cfg.learning_rate * grad.parameter(p);
    }
    if constexpr (!std::is_same_v<EpochCallback, std::nullptr_t>)
      on_epoch(epoch, loss_and_gradient(model, xs, ys, cfg.l2, nullptr));
  }
  return model;
}

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;
};

// Argmax of the softmax output; ties go to the lowest label index.
inline std::vector<Prediction> predict(const ClassifierModel& model, std::span<const std::vector<double>> xs) {
  std::vector<Prediction> out;
  out.reserve(xs.size());
  detail::Activations a;
  for (const auto& x : xs) {
    if (x.size() != model.inputs)
      throw Error(ErrorCode::DimensionMismatch,
                  "expected length " + std::to_string(model.inputs) + ", got " + std::to_string(x.size()));
    detail::forward(model, x, a);
    Prediction p;
    p.label = static_cast<int>(std::max_element(a.probs.begin(), a.probs.end()) - a.probs.begin());
    p.probabilities = a.probs;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chance level

// Monte-Carlo weighted F1 of uniform-random guessing. Each trial scores
// `sample_size` fresh uniform guesses against a fixed gold sample whose class
// counts follow `distribution` (largest-remainder rounding).
inline double expected_random_f1(std::span<const double> distribution, std::size_t num_trials, std::uint64_t seed,
                                 std::size_t sample_size = 1000) {
  const std::size_t k = distribution.size();
  if (k == 0 || num_trials == 0 || sample_size == 0)
    throw Error(ErrorCode::InvalidArgument, "empty distribution or zero trials");
  double total = std::accumulate(distribution.begin(), distribution.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "distribution must sum to 1");

  std::vector<std::size_t> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double exact = distribution[c] * static_cast<double>(sample_size);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < sample_size; ++i, ++assigned) ++counts[remainders[i % k].second];

  std::vector<int> gold;
  for (std::size_t c = 0; c < k; ++c) gold.insert(gold.end(), counts[c], static_cast<int>(c));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> guess(0, static_cast<int>(k) - 1);
  std::vector<std::size_t> tp(k), predicted(k);
  double sum = 0.0;
  for (std::size_t t = 0; t < num_trials; ++t) {
    std::fill(tp.begin(), tp.end(), 0);
    std::fill(predicted.begin(), predicted.end(), 0);
    for (int g : gold) {
      int p = guess(rng);
      ++predicted[static_cast<std::size_t>(p)];
      if (p == g) ++tp[static_cast<std::size_t>(g)];
    }
    double weighted = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double precision = predicted[c] ? static_cast<double>(tp[c]) / predicted[c] : 0.0;
      double recall = static_cast<double>(tp[c]) / counts[c];
      weighted += metrics::f1_from(precision, recall) * static_cast<double>(counts[c]);
    }
    sum += weighted / static_cast<double>(gold.size());
  }
  return sum / static_cast<double>(num_trials);
}

// ---------------------------------------------------------------------------
// Serialization

inline Json to_json(const ClassifierModel& m, const std::vector<std::string>& labels, Encoding encoding,
                    int num_classes) {
  Json j;
  j["schema"] = schema::kModel;
  j["encoding"] = std::string(to_string(encoding));
  j["num_classes"] = num_classes;
  j["labels"] = labels;
  j["shape"] = {m.inputs, m.hidden, m.outputs};
  j["w1"] = m.w1;
  j["b1"] = m.b1;
  j["w2"] = m.w2;
  j["b2"] = m.b2;
  return j;
}

inline ClassifierModel model_from_json(const Json& j) {
  expect_schema(j, schema::kModel, "model document");
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3) throw Error(ErrorCode::MalformedRecord, "model shape must have three entries");
  ClassifierModel m(shape[0], shape[1], shape[2]);
  m.w1 = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  m.w2 = j.at("w2").get<std::vector<double>>();
  m.b2 = j.at("b2").get<std::vector<double>>();
  if (m.w1.size() != shape[1] * shape[0] || m.b1.size() != shape[1] || m.w2.size() != shape[2] * shape[1] ||
      m.b2.size() != shape[2])
    throw Error(ErrorCode::DimensionMismatch, "parameter arrays do not match the declared shape");
  return m;
}

}  // namespace speechcue::baseline
