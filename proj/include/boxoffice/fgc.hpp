#pragma once

// The three-branch FC-GRU-CNN box-office classifier.
//
//   meta (5)          -> dense (ReLU)                      -> fc_hidden
//   actor_seq (L x 11) -> GRU, final state                  -> gru_hidden
//   path_block (1 x L x P) -> 5 x [3x3 same conv, ReLU], 2x2 max-pool after
//                         convs 1-3, global max-pool after conv 5 -> channels[4]
//   concat -> dense (ReLU) -> dense (2 logits) -> softmax
//
// Trained with softmax cross-entropy plus an L2 penalty on weights using
// mini-batch Adam. Class index 0 is A, 1 is B.

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "boxoffice/actor_repr.hpp"
#include "boxoffice/corpus.hpp"
#include "boxoffice/error.hpp"
#include "boxoffice/io.hpp"
#include "boxoffice/nn.hpp"
#include "boxoffice/rng.hpp"

namespace boxoffice::fgc {

using repr::MovieInput;

inline constexpr std::size_t kConvLayers = 5;
inline constexpr std::size_t kPooledConvs = 3;

struct FgcConfig {
  std::size_t L = 16;
  std::size_t P = 32;
  std::size_t fc_hidden = 32;
  std::size_t gru_hidden = 64;
  std::array<std::size_t, kConvLayers> cnn_channels = {4, 8, 16, 16, 16};
  std::size_t merge_hidden = 64;
  double lambda_l2 = 1e-4;
  double lr = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  std::size_t merge_input() const { return fc_hidden + gru_hidden + cnn_channels.back(); }

  /// Same-padded convolutions and ceil-mode pooling accept any L, P >= 1.
  void validate() const {
    if (L < 1 || P < 1) throw UsageError("fgc config: L and P must be at least 1 (minimum feasible L = 1, P = 1)");
    if (fc_hidden < 1 || gru_hidden < 1 || merge_hidden < 1 || epochs < 1 || batch_size < 1) {
      throw UsageError("fgc config: layer sizes, epochs and batch_size must be at least 1");
    }
    for (auto c : cnn_channels) {
      if (c < 1) throw UsageError("fgc config: cnn_channels must be at least 1");
    }
    if (!(lambda_l2 >= 0.0)) throw UsageError("fgc config: lambda_l2 must be non-negative");
    if (!(lr > 0.0)) throw UsageError("fgc config: lr must be positive");
  }

  bool operator==(const FgcConfig&) const = default;
};

/// Parses flat `key = value` text. Keys are the FgcConfig field names;
/// cnn_channels takes five comma-separated counts. Keys not present keep
/// their defaults.
inline FgcConfig parse_config(const std::map<std::string, std::string>& kv, FgcConfig c = {}) {
  auto size_value = [](const std::string& k, const std::string& v) {
    std::size_t out{};
    if (!io::parse_number(v, out)) throw UsageError("config: invalid value for " + k + ": '" + v + "'");
    return out;
  };
  auto real_value = [](const std::string& k, const std::string& v) {
    double out{};
    if (!io::parse_number(v, out)) throw UsageError("config: invalid value for " + k + ": '" + v + "'");
    return out;
  };
  for (const auto& [k, v] : kv) {
    if (k == "L") c.L = size_value(k, v);
    else if (k == "P") c.P = size_value(k, v);
    else if (k == "fc_hidden") c.fc_hidden = size_value(k, v);
    else if (k == "gru_hidden") c.gru_hidden = size_value(k, v);
    else if (k == "merge_hidden") c.merge_hidden = size_value(k, v);
    else if (k == "lambda_l2") c.lambda_l2 = real_value(k, v);
    else if (k == "lr") c.lr = real_value(k, v);
    else if (k == "epochs") c.epochs = size_value(k, v);
    else if (k == "batch_size") c.batch_size = size_value(k, v);
    else if (k == "seed") c.seed = size_value(k, v);
    else if (k == "cnn_channels") {
      const auto parts = io::split(v, ',');
      if (parts.size() != kConvLayers) throw UsageError("config: cnn_channels needs exactly 5 values");
      for (std::size_t i = 0; i < kConvLayers; ++i) c.cnn_channels[i] = size_value(k, parts[i]);
    } else {
      throw UsageError("config: unknown key '" + k + "'");
    }
  }
  c.validate();
  return c;
}

inline std::string format_config(const FgcConfig& c) {
  std::ostringstream out;
  out << "L = " << c.L << "\nP = " << c.P << "\nfc_hidden = " << c.fc_hidden << "\ngru_hidden = " << c.gru_hidden
      << "\ncnn_channels = ";
  for (std::size_t i = 0; i < kConvLayers; ++i) out << (i ? "," : "") << c.cnn_channels[i];
  out << "\nmerge_hidden = " << c.merge_hidden << "\nlambda_l2 = " << io::format_double(c.lambda_l2)
      << "\nlr = " << io::format_double(c.lr) << "\nepochs = " << c.epochs << "\nbatch_size = " << c.batch_size
      << "\nseed = " << c.seed << "\n";
  return out.str();
}

class FgcModel {
 public:
  struct Cache {
    nn::DenseLayer::Cache fc;
    nn::GruLayer::Cache gru;
    std::array<nn::Conv2dLayer::Cache, kConvLayers> conv;
    std::array<nn::PoolResult, kPooledConvs> pool;
    std::array<std::vector<std::size_t>, kPooledConvs> pool_in_shape;
    nn::PoolResult global;
    std::vector<std::size_t> global_in_shape;
    nn::DenseLayer::Cache merge;
    nn::DenseLayer::Cache head;
  };

  FgcModel() = default;

  explicit FgcModel(const FgcConfig& config) : config_(config) {
    config.validate();
    fc_ = nn::DenseLayer(repr::kMetaDims, config.fc_hidden, nn::Activation::relu);
    gru_ = nn::GruLayer(repr::kActorDims, config.gru_hidden);
    std::size_t in_ch = 1;
    for (std::size_t k = 0; k < kConvLayers; ++k) {
      convs_[k] = nn::Conv2dLayer(in_ch, config.cnn_channels[k], 3, 3, nn::Padding::same);
      in_ch = config.cnn_channels[k];
    }
    merge_ = nn::DenseLayer(config.merge_input(), config.merge_hidden, nn::Activation::relu);
    head_ = nn::DenseLayer(config.merge_hidden, 2, nn::Activation::identity);
  }

  const FgcConfig& config() const { return config_; }
  const repr::NormStats& norm_stats() const { return norm_; }
  void set_norm_stats(repr::NormStats s) { norm_ = std::move(s); }

  /// Glorot weights, zero biases. Initialisation order does not depend on
  /// L or P, so configs differing only there start from equal parameters.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    fc_.init(rng);
    gru_.init(rng);
    for (auto& c : convs_) c.init(rng);
    merge_.init(rng);
    head_.init(rng);
  }

  std::vector<nn::Param> params() {
    std::vector<nn::Param> out;
    fc_.collect(out, "fc");
    gru_.collect(out, "gru");
    for (std::size_t k = 0; k < kConvLayers; ++k) convs_[k].collect(out, "conv" + std::to_string(k + 1));
    merge_.collect(out, "merge");
    head_.collect(out, "head");
    return out;
  }

  nn::DenseLayer& fc() { return fc_; }
  nn::GruLayer& gru() { return gru_; }
  nn::Conv2dLayer& conv(std::size_t k) { return convs_.at(k); }
  nn::DenseLayer& merge() { return merge_; }
  nn::DenseLayer& head() { return head_; }

  void check_input(const MovieInput& in) const {
    if (in.max_cast != config_.L || in.path_dims != config_.P || in.actor_seq.size() != in.max_cast * repr::kActorDims ||
        in.path_block.size() != in.max_cast * in.path_dims) {
      throw UsageError("fgc: input shape (L=" + std::to_string(in.max_cast) + ", P=" + std::to_string(in.path_dims) +
                       ") does not match the model (L=" + std::to_string(config_.L) +
                       ", P=" + std::to_string(config_.P) + ")");
    }
  }

  std::vector<double> logits(const MovieInput& in, Cache* cache = nullptr) const {
    check_input(in);
    const auto fc_out = fc_.forward(in.meta, cache ? &cache->fc : nullptr);
    const std::vector<double> h0(config_.gru_hidden, 0.0);
    const auto gru_out = gru_.forward(in.actor_seq, config_.L, h0, cache ? &cache->gru : nullptr);

    nn::Tensor x({1, config_.L, config_.P});
    x.data = in.path_block;
    for (std::size_t k = 0; k < kConvLayers; ++k) {
      x = convs_[k].forward(x, cache ? &cache->conv[k] : nullptr);
      if (k < kPooledConvs) {
        auto pooled = nn::maxpool2d(x, 2, 2, true);
        if (cache) {
          cache->pool_in_shape[k] = x.shape;
          cache->pool[k] = pooled;
        }
        x = std::move(pooled.y);
      }
    }
    auto global = nn::global_maxpool(x);
    if (cache) {
      cache->global_in_shape = x.shape;
      cache->global = global;
    }

    std::vector<double> merged;
    merged.reserve(config_.merge_input());
    merged.insert(merged.end(), fc_out.begin(), fc_out.end());
    merged.insert(merged.end(), gru_out.begin(), gru_out.end());
    merged.insert(merged.end(), global.y.data.begin(), global.y.data.end());
    const auto hidden = merge_.forward(merged, cache ? &cache->merge : nullptr);
    return head_.forward(hidden, cache ? &cache->head : nullptr);
  }

  /// Accumulates parameter gradients for dL/dlogits.
  void backward(const Cache& cache, std::span<const double> dlogits) {
    const auto dhidden = head_.backward(cache.head, dlogits);
    const auto dmerged = merge_.backward(cache.merge, dhidden);
    const auto F = config_.fc_hidden;
    const auto G = config_.gru_hidden;
    fc_.backward(cache.fc, std::span(dmerged).subspan(0, F));
    gru_.backward(cache.gru, std::span(dmerged).subspan(F, G));

    nn::Tensor dx({config_.cnn_channels.back()});
    std::copy(dmerged.begin() + static_cast<std::ptrdiff_t>(F + G), dmerged.end(), dx.data.begin());
    dx = nn::maxpool_backward(cache.global_in_shape, cache.global, dx);
    for (std::size_t k = kConvLayers; k-- > 0;) {
      if (k < kPooledConvs) dx = nn::maxpool_backward(cache.pool_in_shape[k], cache.pool[k], dx);
      dx = convs_[k].backward(cache.conv[k], dx);
    }
  }

  struct Probabilities {
    double a = 0.5;
    double b = 0.5;
  };

  /// Applies the stored normalisation to a raw input, then the softmax.
  Probabilities probabilities_raw(const MovieInput& raw) const {
    return probabilities(repr::apply_normalization(raw, norm_));
  }

  Probabilities probabilities(const MovieInput& normalized) const {
    const auto z = logits(normalized);
    const auto sm = nn::softmax_xent(z, 0);
    return {sm.probabilities[0], sm.probabilities[1]};
  }

  bool operator==(const FgcModel& o) const {
    auto& a = const_cast<FgcModel&>(*this);
    auto& b = const_cast<FgcModel&>(o);
    if (config_ != o.config_ || norm_ != o.norm_) return false;
    auto pa = a.params();
    auto pb = b.params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (*pa[i].value != *pb[i].value) return false;
    }
    return true;
  }

 private:
  FgcConfig config_;
  nn::DenseLayer fc_;
  nn::GruLayer gru_;
  std::array<nn::Conv2dLayer, kConvLayers> convs_;
  nn::DenseLayer merge_;
  nn::DenseLayer head_;
  repr::NormStats norm_;
};

inline FgcModel build_model(const FgcConfig& config, std::uint64_t seed) {
  FgcModel m(config);
  m.init(seed);
  return m;
}

inline FgcModel build_model(const FgcConfig& config) { return build_model(config, config.seed); }

inline std::size_t class_index(corpus::ClassLabel l) { return l == corpus::ClassLabel::A ? 0 : 1; }

/// Per-example loss = cross-entropy; the penalty is added per batch.
struct ExampleResult {
  double loss = 0.0;
  std::size_t predicted = 0;
};

/// Forward + backward for one normalised example; `scale` multiplies the
/// gradient (1 / batch size).
inline ExampleResult accumulate_example(FgcModel& model, const MovieInput& in, double scale) {
  FgcModel::Cache cache;
  const auto z = model.logits(in, &cache);
  const auto sm = nn::softmax_xent(z, class_index(in.label));
  std::vector<double> g = sm.gradient;
  for (auto& v : g) v *= scale;
  model.backward(cache, g);
  return {sm.loss, sm.probabilities[1] >= sm.probabilities[0] ? std::size_t{1} : std::size_t{0}};
}

struct TrainHistory {
  std::vector<double> epoch_loss;      // mean of (cross-entropy + penalty) over the epoch
  std::vector<double> epoch_accuracy;  // running training accuracy during the epoch
};

/// Mini-batch Adam over normalised inputs with seeded per-epoch shuffling.
/// The last partial batch is kept.
inline TrainHistory train(FgcModel& model, const std::vector<MovieInput>& inputs) {
  const auto& cfg = model.config();
  if (inputs.empty()) throw DataError("fgc train: no inputs");
  bool has_a = false;
  bool has_b = false;
  for (const auto& in : inputs) {
    model.check_input(in);
    (in.label == corpus::ClassLabel::A ? has_a : has_b) = true;
  }
  if (!has_a || !has_b) throw DataError("fgc train: both classes must be present");

  auto params = model.params();
  nn::AdamState adam;
  const nn::AdamHyper hyper{cfg.lr};
  Rng shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainHistory history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      nn::zero_grads(params);
      double batch_loss = 0.0;
      for (auto k = start; k < end; ++k) {
        const auto& in = inputs[order[k]];
        const auto r = accumulate_example(model, in, scale);
        batch_loss += r.loss * scale;
        if (r.predicted == class_index(in.label)) ++correct;
      }
      batch_loss += nn::l2_penalty(params, cfg.lambda_l2);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "fgc train: non-finite loss at epoch " << epoch + 1 << ", batch " << batch + 1 << "; parameter norms:";
        for (const auto& p : params) {
          double s = 0.0;
          for (double v : p.value->data) s += v * v;
          msg << " " << p.name << "=" << std::sqrt(s);
        }
        throw NumericError(msg.str());
      }
      loss_sum += batch_loss * static_cast<double>(end - start);
      nn::adam_step(params, adam, hyper);
    }
    history.epoch_loss.push_back(loss_sum / static_cast<double>(inputs.size()));
    history.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(inputs.size()));
  }
  return history;
}

struct Prediction {
  corpus::ClassLabel label = corpus::ClassLabel::B;
  double probability = 0.5;  // of the predicted label
  double probability_b = 0.5;
};

/// Argmax of the softmax; an exact tie goes to B.
inline Prediction decide(const FgcModel::Probabilities& p) {
  const bool b = p.b >= p.a;
  return {b ? corpus::ClassLabel::B : corpus::ClassLabel::A, b ? p.b : p.a, p.b};
}

/// Prediction for a normalised input.
inline Prediction predict(const FgcModel& model, const MovieInput& normalized) {
  return decide(model.probabilities(normalized));
}

// ---------------------------------------------------------------- evaluation

struct EvalReport {
  std::size_t total = 0;
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // [actual][predicted], index 0 = A, 1 = B
  double accuracy = 0.0;
  double precision = 0.0;  // B is the positive class
  double recall = 0.0;
  double f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  bool operator==(const EvalReport&) const = default;
};

namespace detail {

struct Prf {
  double p = 0, r = 0, f = 0;
  bool p_undef = false, r_undef = false, f_undef = false;
};

inline Prf prf(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf o;
  if (tp + fp == 0) o.p_undef = true;
  else o.p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn == 0) o.r_undef = true;
  else o.r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (o.p + o.r == 0.0) o.f_undef = true;
  else o.f = 2.0 * o.p * o.r / (o.p + o.r);
  return o;
}

}  // namespace detail

/// Builds the report from a confusion matrix. Zero denominators report 0
/// and raise the matching flag.
inline EvalReport report_from_confusion(const std::array<std::array<std::size_t, 2>, 2>& confusion) {
  EvalReport r;
  r.confusion = confusion;
  r.total = confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
  if (r.total == 0) throw UsageError("evaluate: no samples");
  r.accuracy = static_cast<double>(confusion[0][0] + confusion[1][1]) / static_cast<double>(r.total);
  const auto b = detail::prf(confusion[1][1], confusion[0][1], confusion[1][0]);
  const auto a = detail::prf(confusion[0][0], confusion[1][0], confusion[0][1]);
  r.precision = b.p;
  r.recall = b.r;
  r.f1 = b.f;
  r.precision_undefined = b.p_undef;
  r.recall_undefined = b.r_undef;
  r.f1_undefined = b.f_undef;
  r.macro_precision = 0.5 * (a.p + b.p);
  r.macro_recall = 0.5 * (a.r + b.r);
  r.macro_f1 = 0.5 * (a.f + b.f);
  return r;
}

inline EvalReport evaluate_labels(const std::vector<corpus::ClassLabel>& actual,
                                  const std::vector<corpus::ClassLabel>& predicted) {
  if (actual.size() != predicted.size()) throw UsageError("evaluate: label count mismatch");
  std::array<std::array<std::size_t, 2>, 2> c{};
  for (std::size_t i = 0; i < actual.size(); ++i) c[class_index(actual[i])][class_index(predicted[i])] += 1;
  return report_from_confusion(c);
}

/// Evaluates normalised inputs.
inline EvalReport evaluate(const FgcModel& model, const std::vector<MovieInput>& inputs) {
  if (inputs.empty()) throw UsageError("evaluate: no inputs");
  std::vector<corpus::ClassLabel> actual;
  std::vector<corpus::ClassLabel> predicted;
  for (const auto& in : inputs) {
    actual.push_back(in.label);
    predicted.push_back(predict(model, in).label);
  }
  return evaluate_labels(actual, predicted);
}

inline std::string format_report_table(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "metric            value\n";
  out << "accuracy          " << r.accuracy << "\n";
  out << "precision (B)     " << r.precision << (r.precision_undefined ? "  (undefined)" : "") << "\n";
  out << "recall (B)        " << r.recall << (r.recall_undefined ? "  (undefined)" : "") << "\n";
  out << "f1 (B)            " << r.f1 << (r.f1_undefined ? "  (undefined)" : "") << "\n";
  out << "macro precision   " << r.macro_precision << "\n";
  out << "macro recall      " << r.macro_recall << "\n";
  out << "macro f1          " << r.macro_f1 << "\n";
  out << "\nconfusion  pred A  pred B\n";
  out << "actual A   " << std::setw(6) << r.confusion[0][0] << "  " << std::setw(6) << r.confusion[0][1] << "\n";
  out << "actual B   " << std::setw(6) << r.confusion[1][0] << "  " << std::setw(6) << r.confusion[1][1] << "\n";
  return out.str();
}

inline std::string format_report_kv(const EvalReport& r) {
  std::ostringstream out;
  out << "total=" << r.total << "\n";
  out << "accuracy=" << io::format_double(r.accuracy) << "\n";
  out << "precision=" << io::format_double(r.precision) << "\n";
  out << "recall=" << io::format_double(r.recall) << "\n";
  out << "f1=" << io::format_double(r.f1) << "\n";
  out << "macro_precision=" << io::format_double(r.macro_precision) << "\n";
  out << "macro_recall=" << io::format_double(r.macro_recall) << "\n";
  out << "macro_f1=" << io::format_double(r.macro_f1) << "\n";
  out << "precision_undefined=" << (r.precision_undefined ? 1 : 0) << "\n";
  out << "recall_undefined=" << (r.recall_undefined ? 1 : 0) << "\n";
  out << "f1_undefined=" << (r.f1_undefined ? 1 : 0) << "\n";
  out << "confusion_aa=" << r.confusion[0][0] << "\nconfusion_ab=" << r.confusion[0][1] << "\n";
  out << "confusion_ba=" << r.confusion[1][0] << "\nconfusion_bb=" << r.confusion[1][1] << "\n";
  return out.str();
}

// ---------------------------------------------------------------- checkpoint

inline constexpr std::string_view kCheckpointMagic = "CNFG";
inline constexpr std::uint8_t kCheckpointVersion = 0x01;

inline std::string serialize_model(const FgcModel& model) {
  const auto& c = model.config();
  io::BinaryWriter w;
  w.bytes(kCheckpointMagic);
  w.u8(kCheckpointVersion);
  for (auto v : {c.L, c.P, c.fc_hidden, c.gru_hidden}) w.u64(v);
  for (auto v : c.cnn_channels) w.u64(v);
  w.u64(c.merge_hidden);
  w.f64(c.lambda_l2);
  w.f64(c.lr);
  w.u64(c.epochs);
  w.u64(c.batch_size);
  w.u64(c.seed);
  auto params = const_cast<FgcModel&>(model).params();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value->shape.size()));
    for (auto d : p.value->shape) w.u64(d);
    w.f64s(p.value->data);
  }
  repr::write_norm_stats(w, model.norm_stats());
  return w.data();
}

inline FgcModel deserialize_model(io::BinaryReader& r) {
  r.expect_magic(kCheckpointMagic, kCheckpointVersion);
  FgcConfig c;
  c.L = r.u64();
  c.P = r.u64();
  c.fc_hidden = r.u64();
  c.gru_hidden = r.u64();
  for (auto& v : c.cnn_channels) v = r.u64();
  c.merge_hidden = r.u64();
  c.lambda_l2 = r.f64();
  c.lr = r.f64();
  c.epochs = r.u64();
  c.batch_size = r.u64();
  c.seed = r.u64();
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw FormatError(r.name() + ": invalid stored config: " + e.what());
  }
  FgcModel m(c);
  auto params = m.params();
  if (r.u32() != params.size()) throw FormatError(r.name() + ": parameter count mismatch");
  for (auto& p : params) {
    if (r.str() != p.name) throw FormatError(r.name() + ": unexpected parameter, wanted " + p.name);
    const auto rank = r.u32();
    if (rank != p.value->shape.size()) throw FormatError(r.name() + ": rank mismatch for " + p.name);
    for (auto d : p.value->shape) {
      if (r.u64() != d) throw FormatError(r.name() + ": shape mismatch for " + p.name);
    }
    p.value->data = r.f64s(p.value->size());
  }
  m.set_norm_stats(repr::read_norm_stats(r));
  return m;
}

inline void save_model(const FgcModel& m, const std::string& path) { io::write_file(path, serialize_model(m)); }

inline FgcModel load_model(const std::string& path) {
  auto r = io::BinaryReader::open(path);
  auto m = deserialize_model(r);
  r.expect_end();
  return m;
}

}  // namespace boxoffice::fgc
