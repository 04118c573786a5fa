#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ndt/error.hpp"
#include "ndt/rng.hpp"

namespace ndt::learners {

struct AutoencoderHyper {
  int iterations = 1500;
  int update_iterations = 200;
  double learning_rate = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

/// Linear autoencoder without bias: x ~ decoder * (encoder * x).
struct Autoencoder {
  Eigen::MatrixXd encoder;  // m x d
  Eigen::MatrixXd decoder;  // d x m

  int input_dim() const { return static_cast<int>(encoder.cols()); }
  int latent_dim() const { return static_cast<int>(encoder.rows()); }
};

/// Mean squared reconstruction error over all entries of `data` (rows are samples).
inline double reconstruction_error(const Autoencoder& ae, const Eigen::MatrixXd& data) {
  const Eigen::MatrixXd recon = data * ae.encoder.transpose() * ae.decoder.transpose();
  return (recon - data).squaredNorm() / static_cast<double>(data.size());
}

inline Eigen::VectorXd encode(const Autoencoder& ae, const Eigen::VectorXd& x) {
  require(x.size() == ae.input_dim(), ErrorCode::dim_mismatch,
          "encode: input has dimension " + std::to_string(x.size()) + ", expected " +
              std::to_string(ae.input_dim()));
  return ae.encoder * x;
}

namespace detail {

/// Adam on the mean squared reconstruction loss. The step size is scaled by
/// the data RMS so one setting serves differently scaled inputs.
inline void fit_autoencoder(Autoencoder& ae, const Eigen::MatrixXd& data, int iterations,
                            const AutoencoderHyper& hyper) {
  const double n_entries = static_cast<double>(data.size());
  Eigen::MatrixXd m_e = Eigen::MatrixXd::Zero(ae.encoder.rows(), ae.encoder.cols());
  Eigen::MatrixXd v_e = m_e;
  Eigen::MatrixXd m_d = Eigen::MatrixXd::Zero(ae.decoder.rows(), ae.decoder.cols());
  Eigen::MatrixXd v_d = m_d;
  const double eps = 1e-12;
  for (int it = 1; it <= iterations; ++it) {
    const Eigen::MatrixXd latent = data * ae.encoder.transpose();              // n x m
    const Eigen::MatrixXd resid = latent * ae.decoder.transpose() - data;      // n x d
    const Eigen::MatrixXd g_dec = (2.0 / n_entries) * resid.transpose() * latent;            // d x m
    const Eigen::MatrixXd g_enc = (2.0 / n_entries) * (resid * ae.decoder).transpose() * data;  // m x d
    m_e = hyper.beta1 * m_e + (1 - hyper.beta1) * g_enc;
    v_e = hyper.beta2 * v_e + (1 - hyper.beta2) * g_enc.cwiseAbs2();
    m_d = hyper.beta1 * m_d + (1 - hyper.beta1) * g_dec;
    v_d = hyper.beta2 * v_d + (1 - hyper.beta2) * g_dec.cwiseAbs2();
    const double c1 = 1.0 - std::pow(hyper.beta1, it);
    const double c2 = 1.0 - std::pow(hyper.beta2, it);
    const double lr = hyper.learning_rate;
    ae.encoder -= (lr * (m_e / c1).array() / ((v_e / c2).array().sqrt() + eps)).matrix();
    ae.decoder -= (lr * (m_d / c1).array() / ((v_d / c2).array().sqrt() + eps)).matrix();
  }
}

}  // namespace detail

inline Autoencoder train_autoencoder(const Eigen::MatrixXd& data, int latent_dim, RandomStream rng,
                                     const AutoencoderHyper& hyper = {}) {
  const auto n = data.rows();
  const auto d = data.cols();
  require(latent_dim >= 1 && latent_dim < d && n >= latent_dim, ErrorCode::degenerate_dims,
          "train_autoencoder: need 1 <= m < d and n >= m (n=" + std::to_string(n) +
              ", d=" + std::to_string(d) + ", m=" + std::to_string(latent_dim) + ")");
  Autoencoder ae;
  ae.encoder.resize(latent_dim, d);
  ae.decoder.resize(d, latent_dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < ae.encoder.size(); ++i) ae.encoder.data()[i] = rng.uniform(-s, s);
  ae.decoder = ae.encoder.transpose();
  detail::fit_autoencoder(ae, data, hyper.iterations, hyper);
  return ae;
}

inline Autoencoder update_autoencoder(Autoencoder ae, const Eigen::MatrixXd& data,
                                      const AutoencoderHyper& hyper = {}) {
  require(data.cols() == ae.input_dim(), ErrorCode::dim_mismatch, "update_autoencoder: dimension");
  detail::fit_autoencoder(ae, data, hyper.update_iterations, hyper);
  return ae;
}

}  // namespace ndt::learners
