#pragma once

// Gated recurrent sequence predictor with a single update gate.
//
//   z  = sigmoid(Wz [x; h] + bz)
//   h~ = tanh(Wh [x; h] + bh)
//   h' = (1 - z) * h + z * h~
//   y  = x_last + Wo h' + bo
//
// Inputs and targets are z-normalized per feature. The readout predicts the
// one-step change on top of the last input.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ndt/error.hpp"
#include "ndt/rng.hpp"

namespace ndt::learners {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct PredictorHyper {
  int hidden = 16;
  int window = 8;
  double learning_rate = 0.05;
  int epochs = 200;
  int update_epochs = 5;
  /// Uniform init half-width is init_scale / sqrt(hidden); 0 gives zero weights.
  double init_scale = 1.0;
  double grad_clip = 5.0;
  /// Lower bound on the per-feature normalization scale. Empty means 1e-6 for all.
  std::vector<double> scale_floor;
};

struct GruParams {
  Matrix wz, wh, wo;
  Vector bz, bh, bo;

  std::size_t size() const {
    return static_cast<std::size_t>(wz.size() + wh.size() + wo.size() + bz.size() + bh.size() + bo.size());
  }

  template <class F>
  void for_each(F&& f) {
    for (auto* m : {&wz, &wh, &wo}) f(m->data(), static_cast<std::size_t>(m->size()));
    for (auto* v : {&bz, &bh, &bo}) f(v->data(), static_cast<std::size_t>(v->size()));
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    auto self = *this;
    self.for_each([&](double* p, std::size_t n) { out.insert(out.end(), p, p + n); });
    return out;
  }

  void unflatten(std::span<const double> flat) {
    require(flat.size() == size(), ErrorCode::dim_mismatch, "GruParams::unflatten: size mismatch");
    std::size_t off = 0;
    for_each([&](double* p, std::size_t n) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + n), p);
      off += n;
    });
  }

  void set_zero() {
    for_each([](double* p, std::size_t n) { std::fill(p, p + n, 0.0); });
  }
};

class SequencePredictor {
 public:
  SequencePredictor() = default;

  SequencePredictor(int input_dim, PredictorHyper hyper, RandomStream rng)
      : dim_(input_dim), hyper_(std::move(hyper)) {
    require(input_dim > 0 && hyper_.hidden > 0 && hyper_.window > 0, ErrorCode::invalid_argument,
            "SequencePredictor: dimensions must be positive");
    const int h = hyper_.hidden;
    const int cat = dim_ + h;
    params_.wz = Matrix(h, cat);
    params_.wh = Matrix(h, cat);
    params_.wo = Matrix(dim_, h);
    params_.bz = Vector::Zero(h);
    params_.bh = Vector::Zero(h);
    params_.bo = Vector::Zero(dim_);
    const double s = hyper_.init_scale / std::sqrt(static_cast<double>(h));
    for (Matrix* m : {&params_.wz, &params_.wh, &params_.wo})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-s, s);
    mean_ = Vector::Zero(dim_);
    scale_ = Vector::Ones(dim_);
  }

  int input_dim() const { return dim_; }
  int window() const { return hyper_.window; }
  const PredictorHyper& hyper() const { return hyper_; }
  GruParams& params() { return params_; }
  const GruParams& params() const { return params_; }
  const Vector& norm_mean() const { return mean_; }
  const Vector& norm_scale() const { return scale_; }
  bool trained() const { return trained_; }

  void set_normalization(Vector mean, Vector scale) {
    require(mean.size() == dim_ && scale.size() == dim_, ErrorCode::dim_mismatch,
            "set_normalization: dimension mismatch");
    require((scale.array() > 0.0).all(), ErrorCode::invalid_argument, "normalization scale must be > 0");
    mean_ = std::move(mean);
    scale_ = std::move(scale);
  }
  void mark_trained() { trained_ = true; }

  /// Forward pass over a normalized window; returns the normalized prediction.
  Vector forward(std::span<const Vector> window_norm) const {
    Vector h = Vector::Zero(hyper_.hidden);
    Vector cat(dim_ + hyper_.hidden);
    for (const Vector& x : window_norm) {
      cat << x, h;
      const Vector z = sigmoid(params_.wz * cat + params_.bz);
      const Vector cand = (params_.wh * cat + params_.bh).array().tanh().matrix();
      h = (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(cand);
    }
    return window_norm.back() + params_.wo * h + params_.bo;
  }

  /// Squared-error loss (mean over features) of one window and its gradient.
  double loss_and_gradient(std::span<const Vector> window_norm, const Vector& target_norm,
                           GruParams& grad) const {
    const int hd = hyper_.hidden;
    const std::size_t steps = window_norm.size();
    std::vector<Vector> cats(steps), zs(steps), cands(steps), hs(steps + 1);
    hs[0] = Vector::Zero(hd);
    for (std::size_t t = 0; t < steps; ++t) {
      cats[t].resize(dim_ + hd);
      cats[t] << window_norm[t], hs[t];
      zs[t] = sigmoid(params_.wz * cats[t] + params_.bz);
      cands[t] = (params_.wh * cats[t] + params_.bh).array().tanh().matrix();
      hs[t + 1] = (1.0 - zs[t].array()).matrix().cwiseProduct(hs[t]) + zs[t].cwiseProduct(cands[t]);
    }
    const Vector y = window_norm.back() + params_.wo * hs[steps] + params_.bo;
    const Vector diff = y - target_norm;
    const double loss = diff.squaredNorm() / dim_;

    grad.wz = Matrix::Zero(params_.wz.rows(), params_.wz.cols());
    grad.wh = Matrix::Zero(params_.wh.rows(), params_.wh.cols());
    const Vector dy = diff * (2.0 / dim_);
    grad.wo = dy * hs[steps].transpose();
    grad.bo = dy;
    grad.bz = Vector::Zero(hd);
    grad.bh = Vector::Zero(hd);

    Vector dh = params_.wo.transpose() * dy;
    for (std::size_t t = steps; t-- > 0;) {
      const Vector& z = zs[t];
      const Vector& cand = cands[t];
      const Vector dz = dh.cwiseProduct(cand - hs[t]);
      const Vector dcand = dh.cwiseProduct(z);
      const Vector dz_pre = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
      const Vector dcand_pre = dcand.cwiseProduct((1.0 - cand.array().square()).matrix());
      grad.wz += dz_pre * cats[t].transpose();
      grad.bz += dz_pre;
      grad.wh += dcand_pre * cats[t].transpose();
      grad.bh += dcand_pre;
      const Vector dcat = params_.wz.transpose() * dz_pre + params_.wh.transpose() * dcand_pre;
      dh = dh.cwiseProduct((1.0 - z.array()).matrix()) + dcat.tail(hd);
    }
    return loss;
  }

  Vector normalize(const Vector& x) const { return (x - mean_).cwiseQuotient(scale_); }
  Vector denormalize(const Vector& x) const { return x.cwiseProduct(scale_) + mean_; }

  /// One SGD pass over every window of an already-normalized series.
  /// Returns the mean window loss before each step.
  double sgd_epoch(std::span<const Vector> series_norm) {
    const auto w = static_cast<std::size_t>(hyper_.window);
    GruParams grad;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start + w < series_norm.size(); ++start) {
      total += loss_and_gradient(series_norm.subspan(start, w), series_norm[start + w], grad);
      ++count;
      double norm2 = 0.0;
      grad.for_each([&](double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) norm2 += p[i] * p[i];
      });
      const double norm = std::sqrt(norm2);
      const double step = hyper_.learning_rate *
                          (norm > hyper_.grad_clip && norm > 0.0 ? hyper_.grad_clip / norm : 1.0);
      auto flat_g = grad.flatten();
      std::size_t off = 0;
      params_.for_each([&](double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] -= step * flat_g[off + i];
        off += n;
      });
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
  }

  /// Mean one-step loss over every window of a raw series (no update).
  double evaluate(std::span<const Vector> series) const {
    const auto norm = normalize_series(series);
    const auto w = static_cast<std::size_t>(hyper_.window);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s + w < norm.size(); ++s) {
      total += (forward(std::span<const Vector>(norm).subspan(s, w)) - norm[s + w]).squaredNorm() / dim_;
      ++count;
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
  }

  std::vector<Vector> normalize_series(std::span<const Vector> series) const {
    std::vector<Vector> out;
    out.reserve(series.size());
    for (const auto& x : series) out.push_back(normalize(x));
    return out;
  }

  /// Per-epoch mean training loss of the most recent training call.
  const std::vector<double>& loss_history() const { return loss_history_; }
  std::vector<double>& loss_history() { return loss_history_; }

 private:
  static Vector sigmoid(const Vector& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); }

  int dim_ = 0;
  PredictorHyper hyper_;
  GruParams params_;
  Vector mean_;
  Vector scale_;
  bool trained_ = false;
  std::vector<double> loss_history_;
};

namespace detail {

inline void check_series(std::span<const Vector> series, int dim, int window) {
  require(series.size() >= static_cast<std::size_t>(window) + 1, ErrorCode::series_too_short,
          "series length " + std::to_string(series.size()) + " < window + 1 = " +
              std::to_string(window + 1));
  for (const auto& x : series)
    require(x.size() == dim, ErrorCode::dim_mismatch, "series vector has wrong dimension");
}

}  // namespace detail

/// Fits normalization statistics and trains from fresh weights.
inline SequencePredictor train_predictor(std::span<const Vector> series, const PredictorHyper& hyper,
                                         RandomStream rng) {
  require(!series.empty(), ErrorCode::series_too_short, "train_predictor: empty series");
  const int dim = static_cast<int>(series.front().size());
  detail::check_series(series, dim, hyper.window);
  SequencePredictor p(dim, hyper, rng);

  Vector mean = Vector::Zero(dim);
  for (const auto& x : series) mean += x;
  mean /= static_cast<double>(series.size());
  Vector var = Vector::Zero(dim);
  for (const auto& x : series) var += (x - mean).cwiseAbs2();
  var /= static_cast<double>(series.size());
  Vector scale = var.cwiseSqrt();
  for (int i = 0; i < dim; ++i) {
    const double floor = hyper.scale_floor.empty() ? 1e-6 : hyper.scale_floor.at(static_cast<std::size_t>(i));
    scale[i] = std::max(scale[i], floor);
  }
  p.set_normalization(mean, scale);

  const auto norm = p.normalize_series(series);
  p.loss_history().clear();
  for (int e = 0; e < hyper.epochs; ++e) p.loss_history().push_back(p.sgd_epoch(norm));
  p.mark_trained();
  return p;
}

/// Continues training from the current weights and normalization.
inline SequencePredictor incremental_update(SequencePredictor p, std::span<const Vector> new_data,
                                            int epochs = -1) {
  detail::check_series(new_data, p.input_dim(), p.window());
  const int n = epochs >= 0 ? epochs : p.hyper().update_epochs;
  const auto norm = p.normalize_series(new_data);
  p.loss_history().clear();
  for (int e = 0; e < n; ++e) p.loss_history().push_back(p.sgd_epoch(norm));
  p.mark_trained();
  return p;
}

inline Vector predict_next(const SequencePredictor& p, std::span<const Vector> window) {
  require(window.size() == static_cast<std::size_t>(p.window()), ErrorCode::wrong_window_length,
          "predict_next: window has " + std::to_string(window.size()) + " vectors, expected " +
              std::to_string(p.window()));
  for (const auto& x : window)
    require(x.size() == p.input_dim(), ErrorCode::dim_mismatch, "predict_next: vector dimension");
  const auto norm = p.normalize_series(window);
  return p.denormalize(p.forward(norm));
}

}  // namespace ndt::learners
