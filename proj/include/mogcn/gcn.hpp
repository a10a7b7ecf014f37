// Copyright 2026 The mogcn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mogcn/graph.hpp"

namespace mogcn {

inline constexpr int kClassCount = 2;  // background, foreground
inline constexpr double kLogFloor = 1e-12;

/// Two-layer GCN parameters: W0 is C x H, W1 is H x F.
struct GcnModel {
  Matrix w0;
  Matrix w1;
  std::uint64_t seed = 0;
  std::uint64_t version = 0;  // bumped on every update; guards backward caches

  Eigen::Index input_dim() const { return w0.rows(); }
  Eigen::Index hidden() const { return w0.cols(); }
  Eigen::Index classes() const { return w1.cols(); }
};

/// Glorot-uniform initialisation, limit sqrt(6 / (fan_in + fan_out)).
inline GcnModel init_model(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index classes, std::uint64_t seed) {
  require(input_dim >= 1 && hidden >= 1 && classes >= 2, ErrorCode::kInvalidArgument, "bad model shape");
  Rng rng(seed);
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
    return m;
  };
  GcnModel model;
  model.w0 = glorot(input_dim, hidden);
  model.w1 = glorot(hidden, classes);
  model.seed = seed;
  return model;
}

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double dropout_rate = 0.5;
  int max_epochs = 600;
  int early_stop_window = 10;
  int hidden = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCode::kInvalidArgument, "dropout_rate must be in [0, 1)");
    require(early_stop_window >= 1, ErrorCode::kInvalidArgument, "early_stop_window must be >= 1");
    require(max_epochs >= 1, ErrorCode::kInvalidArgument, "max_epochs must be >= 1");
    require(hidden >= 1, ErrorCode::kInvalidArgument, "hidden must be >= 1");
    require(learning_rate > 0.0 && weight_decay >= 0.0, ErrorCode::kInvalidArgument, "bad optimiser settings");
  }
};

/// Intermediates of one forward pass, consumed by backward().
struct ForwardCache {
  Matrix x_dropped;  // empty when no input dropout was applied
  Matrix pre_hidden;  // A (X W0)
  Matrix hidden_mask;  // inverted-dropout factors on the hidden layer (empty = none)
  Matrix hidden_in;  // relu(pre_hidden) after dropout
  Matrix propagated_hidden;  // A hidden_in
  std::uint64_t model_version = 0;
};

struct ForwardResult {
  Matrix z;  // N x F row-stochastic
  ForwardCache cache;
};

struct Dropout {
  double rate = 0.5;
  Rng* rng = nullptr;
};

namespace detail {

inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, const Dropout& d) {
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - d.rate);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = d.rng->uniform() < d.rate ? 0.0 : keep;
  return mask;
}

inline void softmax_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double top = m.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = std::exp(m(i, j) - top);
      sum += m(i, j);
    }
    m.row(i) /= sum;
  }
}

}  // namespace detail

/// Z = softmax(A relu(A X W0) W1). With dropout, inverted dropout is applied
/// to X and to the hidden activations before their weight products.
inline ForwardResult forward(const Matrix& x, const NormalizedAdjacency& a, const GcnModel& model,
                             std::optional<Dropout> dropout = std::nullopt) {
  require(x.rows() == a.n, ErrorCode::kShapeMismatch, "X rows differ from graph size");
  require(x.cols() == model.w0.rows(), ErrorCode::kShapeMismatch, "X columns differ from W0 rows");
  require(model.w0.cols() == model.w1.rows(), ErrorCode::kShapeMismatch, "W0 columns differ from W1 rows");
  const bool drop = dropout && dropout->rate > 0.0;
  require(!drop || dropout->rng != nullptr, ErrorCode::kInvalidArgument, "dropout needs an rng");

  ForwardResult out;
  ForwardCache& c = out.cache;
  c.model_version = model.version;
  if (drop) c.x_dropped = x.cwiseProduct(detail::dropout_mask(x.rows(), x.cols(), *dropout));
  const Matrix& x_in = drop ? c.x_dropped : x;
  c.pre_hidden = a.matrix.multiply(x_in * model.w0);
  c.hidden_in = c.pre_hidden.cwiseMax(0.0);
  if (drop) {
    c.hidden_mask = detail::dropout_mask(c.hidden_in.rows(), c.hidden_in.cols(), *dropout);
    c.hidden_in = c.hidden_in.cwiseProduct(c.hidden_mask);
  }
  c.propagated_hidden = a.matrix.multiply(c.hidden_in);
  out.z = c.propagated_hidden * model.w1;
  detail::softmax_rows(out.z);
  return out;
}

/// -sum_{i in nodes} sum_j Y(i,j) ln max(Z(i,j), 1e-12), without decay.
inline double cross_entropy(const Matrix& z, const Matrix& y, std::span<const int> nodes) {
  require(z.rows() == y.rows() && z.cols() == y.cols(), ErrorCode::kShapeMismatch, "Z and Y differ in shape");
  double sum = 0.0;
  for (int i : nodes) {
    require(i >= 0 && i < z.rows(), ErrorCode::kOutOfBounds, "node index out of range");
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      if (y(i, j) != 0.0) sum -= y(i, j) * std::log(std::max(z(i, j), kLogFloor));
  }
  return sum;
}

/// Training objective: cross-entropy over `nodes` plus
/// (weight_decay / 2)(|W0|^2 + |W1|^2).
inline double loss(const Matrix& z, const Matrix& y, std::span<const int> nodes, const GcnModel& model,
                   double weight_decay) {
  require(!nodes.empty(), ErrorCode::kEmptySet, "loss over an empty node set");
  return cross_entropy(z, y, nodes) + 0.5 * weight_decay * (model.w0.squaredNorm() + model.w1.squaredNorm());
}

struct Gradients {
  Matrix w0;
  Matrix w1;
};

/// Exact gradient of loss() for the pass recorded in `fwd`.
inline Gradients backward(const Matrix& x, const NormalizedAdjacency& a, const GcnModel& model,
                          const ForwardResult& fwd, const Matrix& y, std::span<const int> nodes,
                          double weight_decay) {
  const ForwardCache& c = fwd.cache;
  require(c.model_version == model.version && c.pre_hidden.rows() == a.n, ErrorCode::kStaleCache,
          "forward cache does not belong to this model state");
  require(!nodes.empty(), ErrorCode::kEmptySet, "backward over an empty node set");
  const Matrix& z = fwd.z;

  // d loss / d logits, honouring the log floor (clamped entries carry no gradient).
  Matrix g = Matrix::Zero(z.rows(), z.cols());
  for (int i : nodes) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (y(i, j) == 0.0 || z(i, j) < kLogFloor) continue;
      g.row(i) += y(i, j) * z.row(i);
      g(i, j) -= y(i, j);
    }
  }

  Gradients grads;
  grads.w1 = c.propagated_hidden.transpose() * g + weight_decay * model.w1;
  Matrix d_hidden = a.matrix.multiply_transpose(g * model.w1.transpose());
  if (c.hidden_mask.size() != 0) d_hidden = d_hidden.cwiseProduct(c.hidden_mask);
  for (Eigen::Index i = 0; i < d_hidden.rows(); ++i)
    for (Eigen::Index j = 0; j < d_hidden.cols(); ++j)
      if (c.pre_hidden(i, j) <= 0.0) d_hidden(i, j) = 0.0;
  const Matrix d_xw = a.matrix.multiply_transpose(d_hidden);
  const Matrix& x_in = c.x_dropped.size() != 0 ? c.x_dropped : x;
  grads.w0 = x_in.transpose() * d_xw + weight_decay * model.w0;
  return grads;
}

struct AdamState {
  Matrix m0, v0, m1, v1;
  long step = 0;

  static AdamState zeros_like(const GcnModel& model) {
    return {Matrix::Zero(model.w0.rows(), model.w0.cols()), Matrix::Zero(model.w0.rows(), model.w0.cols()),
            Matrix::Zero(model.w1.rows(), model.w1.cols()), Matrix::Zero(model.w1.rows(), model.w1.cols()), 0};
  }
};

namespace detail {

inline void adam_update(Matrix& w, const Matrix& g, Matrix& m, Matrix& v, double lr, double b1, double b2, double eps,
                        double correction1, double correction2) {
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      m(i, j) = b1 * m(i, j) + (1.0 - b1) * g(i, j);
      v(i, j) = b2 * v(i, j) + (1.0 - b2) * g(i, j) * g(i, j);
      const double m_hat = m(i, j) / correction1;
      const double v_hat = v(i, j) / correction2;
      w(i, j) -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace detail

/// One bias-corrected Adam step on both weight matrices.
inline void adam_step(GcnModel& model, const Gradients& grads, AdamState& state, const TrainConfig& config) {
  require(grads.w0.rows() == model.w0.rows() && grads.w0.cols() == model.w0.cols() &&
              grads.w1.rows() == model.w1.rows() && grads.w1.cols() == model.w1.cols(),
          ErrorCode::kShapeMismatch, "gradient shapes differ from model");
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  detail::adam_update(model.w0, grads.w0, state.m0, state.v0, config.learning_rate, config.beta1, config.beta2,
                      config.epsilon, c1, c2);
  detail::adam_update(model.w1, grads.w1, state.m1, state.v1, config.learning_rate, config.beta1, config.beta2,
                      config.epsilon, c1, c2);
  ++model.version;
}

/// Halts after `window` consecutive epochs without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int window) : window_(window) {}

  /// Returns true when `value` is a new best.
  bool update(int epoch, double value) {
    if (value < best_) {
      best_ = value;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= window_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int window_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int stale_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  std::string stop_reason;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  GcnModel model;
  TrainHistory history;
};

/// Argmax per row; ties go to class 0 (background).
inline std::vector<int> argmax_rows(const Matrix& z) {
  std::vector<int> out(static_cast<std::size_t>(z.rows()), 0);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < z.cols(); ++j)
      if (z(i, j) > z(i, best)) best = static_cast<int>(j);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

/// Mean cross-entropy and accuracy over `nodes`.
inline std::pair<double, double> evaluate_nodes(const Matrix& z, const Matrix& y, std::span<const int> nodes) {
  const auto pred = argmax_rows(z);
  std::size_t correct = 0;
  for (int i : nodes) {
    int truth = 0;
    for (Eigen::Index j = 1; j < y.cols(); ++j)
      if (y(i, j) > y(i, truth)) truth = static_cast<int>(j);
    if (pred[static_cast<std::size_t>(i)] == truth) ++correct;
  }
  const double n = static_cast<double>(nodes.size());
  return {cross_entropy(z, y, nodes) / n, static_cast<double>(correct) / n};
}

/// Full-batch training with Adam and early stopping on the validation loss
/// (mean cross-entropy over `val`). Returns the weights of the best epoch.
inline TrainResult train(const Matrix& x, const NormalizedAdjacency& a, const Matrix& y, std::span<const int> train_nodes,
                         std::span<const int> val_nodes, const TrainConfig& config) {
  config.validate();
  require(!train_nodes.empty(), ErrorCode::kEmptySet, "empty training set");
  require(!val_nodes.empty(), ErrorCode::kEmptySet, "empty validation set");
  require(y.rows() == x.rows() && y.cols() == kClassCount, ErrorCode::kShapeMismatch, "Y must be N x 2");
  {
    std::vector<char> in_train(static_cast<std::size_t>(x.rows()), 0);
    for (int i : train_nodes) {
      require(i >= 0 && i < x.rows(), ErrorCode::kOutOfBounds, "training node out of range");
      in_train[static_cast<std::size_t>(i)] = 1;
    }
    for (int i : val_nodes) {
      require(i >= 0 && i < x.rows(), ErrorCode::kOutOfBounds, "validation node out of range");
      require(!in_train[static_cast<std::size_t>(i)], ErrorCode::kOverlappingSets,
              "node " + std::to_string(i) + " is in both training and validation sets");
    }
  }

  GcnModel model = init_model(x.cols(), config.hidden, kClassCount, derive_seed(config.seed, "init"));
  AdamState adam = AdamState::zeros_like(model);
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  EarlyStopping stopper(config.early_stop_window);
  TrainResult result{model, {}};
  result.history.stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto fwd = forward(x, a, model, Dropout{config.dropout_rate, &dropout_rng});
    const double train_loss = loss(fwd.z, y, train_nodes, model, config.weight_decay);
    const auto grads = backward(x, a, model, fwd, y, train_nodes, config.weight_decay);
    adam_step(model, grads, adam, config);

    const auto eval = forward(x, a, model);
    const auto [val_loss, val_acc] = evaluate_nodes(eval.z, y, val_nodes);
    result.history.epochs.push_back({epoch, train_loss, val_loss, val_acc});
    if (stopper.update(epoch, val_loss)) result.model = model;
    if (stopper.should_stop()) {
      result.history.stop_reason = "early_stopping";
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  return result;
}

struct Prediction {
  std::vector<int> classes;
  Matrix probabilities;
};

inline Prediction predict(const GcnModel& model, const Matrix& x, const NormalizedAdjacency& a) {
  auto fwd = forward(x, a, model);
  Prediction p;
  p.classes = argmax_rows(fwd.z);
  p.probabilities = std::move(fwd.z);
  return p;
}

// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kModelMagic = 0x4e4e474d;  // "MGNN"

// Header: magic, C, H, F (u32); then W0 and W1 row-major as f64.
inline void save_model(const std::string& path, const GcnModel& model) {
  auto os = open_out(path, true);
  le::put<std::uint32_t>(os, kModelMagic);
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(model.input_dim()));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(model.hidden()));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(model.classes()));
  for (Eigen::Index i = 0; i < model.w0.rows(); ++i)
    for (Eigen::Index j = 0; j < model.w0.cols(); ++j) le::put<double>(os, model.w0(i, j));
  for (Eigen::Index i = 0; i < model.w1.rows(); ++i)
    for (Eigen::Index j = 0; j < model.w1.cols(); ++j) le::put<double>(os, model.w1(i, j));
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed: " + path);
}

inline GcnModel load_model(const std::string& path) {
  auto is = open_in(path, true);
  require(le::get<std::uint32_t>(is) == kModelMagic, ErrorCode::kMalformedFile, path + ": not a model file");
  const auto c = le::get<std::uint32_t>(is);
  const auto h = le::get<std::uint32_t>(is);
  const auto f = le::get<std::uint32_t>(is);
  GcnModel model;
  model.w0.resize(c, h);
  model.w1.resize(h, f);
  for (std::uint32_t i = 0; i < c; ++i)
    for (std::uint32_t j = 0; j < h; ++j) model.w0(i, j) = le::get<double>(is);
  for (std::uint32_t i = 0; i < h; ++i)
    for (std::uint32_t j = 0; j < f; ++j) model.w1(i, j) = le::get<double>(is);
  require(model.w0.allFinite() && model.w1.allFinite(), ErrorCode::kMalformedFile, path + ": non-finite weights");
  return model;
}

inline void save_history_csv(const std::string& path, const TrainHistory& history) {
  auto os = open_out(path);
  os << "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& e : history.epochs)
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
       << format_double(e.val_acc) << '\n';
}

}  // namespace mogcn
