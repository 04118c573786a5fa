#pragma once

// Versioned text snapshots of learner state: a JSON object with a kind tag,
// a format version and named numeric arrays. Matrices are stored row-major
// together with their shape.

#include <Eigen/Dense>
#include <json.hpp>
#include <string>

#include "ndt/error.hpp"
#include "ndt/learners/autoencoder.hpp"
#include "ndt/learners/kmeans.hpp"
#include "ndt/learners/predictor.hpp"
#include "ndt/learners/qagent.hpp"

namespace ndt::learners {

inline constexpr int kSnapshotVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(flat.size()) == rows * cols, ErrorCode::parse_error,
          "matrix snapshot: data size does not match shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto flat = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

inline void check_header(const nlohmann::json& j, const std::string& kind) {
  require(j.value("kind", "") == kind, ErrorCode::parse_error, "snapshot kind is not '" + kind + "'");
  require(j.value("version", 0) == kSnapshotVersion, ErrorCode::parse_error,
          "unsupported snapshot version");
}

}  // namespace detail

inline nlohmann::json to_snapshot(const SequencePredictor& p) {
  const auto& h = p.hyper();
  return {
      {"kind", "sequence_predictor"},
      {"version", kSnapshotVersion},
      {"input_dim", p.input_dim()},
      {"hyper",
       {{"hidden", h.hidden},
        {"window", h.window},
        {"learning_rate", h.learning_rate},
        {"epochs", h.epochs},
        {"update_epochs", h.update_epochs},
        {"init_scale", h.init_scale},
        {"grad_clip", h.grad_clip},
        {"scale_floor", h.scale_floor}}},
      {"trained", p.trained()},
      {"norm_mean", detail::vector_to_json(p.norm_mean())},
      {"norm_scale", detail::vector_to_json(p.norm_scale())},
      {"wz", detail::matrix_to_json(p.params().wz)},
      {"wh", detail::matrix_to_json(p.params().wh)},
      {"wo", detail::matrix_to_json(p.params().wo)},
      {"bz", detail::vector_to_json(p.params().bz)},
      {"bh", detail::vector_to_json(p.params().bh)},
      {"bo", detail::vector_to_json(p.params().bo)},
  };
}

inline SequencePredictor predictor_from_snapshot(const nlohmann::json& j) {
  detail::check_header(j, "sequence_predictor");
  const auto& hj = j.at("hyper");
  PredictorHyper h;
  h.hidden = hj.at("hidden");
  h.window = hj.at("window");
  h.learning_rate = hj.at("learning_rate");
  h.epochs = hj.at("epochs");
  h.update_epochs = hj.at("update_epochs");
  h.init_scale = hj.at("init_scale");
  h.grad_clip = hj.at("grad_clip");
  h.scale_floor = hj.at("scale_floor").get<std::vector<double>>();
  SequencePredictor p(j.at("input_dim").get<int>(), h, RandomStream{});
  p.params().wz = detail::matrix_from_json(j.at("wz"));
  p.params().wh = detail::matrix_from_json(j.at("wh"));
  p.params().wo = detail::matrix_from_json(j.at("wo"));
  p.params().bz = detail::vector_from_json(j.at("bz"));
  p.params().bh = detail::vector_from_json(j.at("bh"));
  p.params().bo = detail::vector_from_json(j.at("bo"));
  p.set_normalization(detail::vector_from_json(j.at("norm_mean")),
                      detail::vector_from_json(j.at("norm_scale")));
  if (j.at("trained").get<bool>()) p.mark_trained();
  return p;
}

inline nlohmann::json to_snapshot(const Autoencoder& ae) {
  return {{"kind", "autoencoder"},
          {"version", kSnapshotVersion},
          {"encoder", detail::matrix_to_json(ae.encoder)},
          {"decoder", detail::matrix_to_json(ae.decoder)}};
}

inline Autoencoder autoencoder_from_snapshot(const nlohmann::json& j) {
  detail::check_header(j, "autoencoder");
  return {detail::matrix_from_json(j.at("encoder")), detail::matrix_from_json(j.at("decoder"))};
}

inline nlohmann::json to_snapshot(const QAgent& q) {
  return {{"kind", "q_agent"},
          {"version", kSnapshotVersion},
          {"epsilon", q.hyper().epsilon},
          {"alpha", q.hyper().alpha},
          {"gamma", q.hyper().gamma},
          {"table_a", detail::matrix_to_json(q.table_a())},
          {"table_b", detail::matrix_to_json(q.table_b())}};
}

inline QAgent qagent_from_snapshot(const nlohmann::json& j) {
  detail::check_header(j, "q_agent");
  auto a = detail::matrix_from_json(j.at("table_a"));
  QAgent q(static_cast<int>(a.rows()), static_cast<int>(a.cols()),
           {j.at("epsilon").get<double>(), j.at("alpha").get<double>(), j.at("gamma").get<double>()});
  q.table_a() = std::move(a);
  q.table_b() = detail::matrix_from_json(j.at("table_b"));
  return q;
}

inline nlohmann::json to_snapshot(const Clustering& c) {
  return {{"kind", "clustering"},
          {"version", kSnapshotVersion},
          {"centroids", detail::matrix_to_json(c.centroids)},
          {"assignment", c.assignment},
          {"wcss", c.wcss}};
}

inline Clustering clustering_from_snapshot(const nlohmann::json& j) {
  detail::check_header(j, "clustering");
  Clustering c;
  c.centroids = detail::matrix_from_json(j.at("centroids"));
  c.assignment = j.at("assignment").get<std::vector<int>>();
  c.wcss = j.at("wcss").get<double>();
  return c;
}

}  // namespace ndt::learners
