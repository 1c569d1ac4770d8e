#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsod/detector.hpp"
#include "wsod/errors.hpp"

namespace wsod {

inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw IoError("model json: expected an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw IoError("model json: ragged matrix rows");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k));
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw IoError("model json: expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i));
  return v;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const MinibootstrapParams& p) {
  j = nlohmann::json{{"n_batches", p.n_batches},
                     {"batch_size", p.batch_size},
                     {"hard_negative_score_min", p.hard_negative_score_min},
                     {"max_negatives_kept", p.max_negatives_kept}};
}

inline void from_json(const nlohmann::json& j, MinibootstrapParams& p) {
  j.at("n_batches").get_to(p.n_batches);
  j.at("batch_size").get_to(p.batch_size);
  j.at("hard_negative_score_min").get_to(p.hard_negative_score_min);
  j.at("max_negatives_kept").get_to(p.max_negatives_kept);
}

inline void to_json(nlohmann::json& j, const DetectorParams& p) {
  j = nlohmann::json{{"num_classes", p.num_classes},
                     {"feature_dim", p.feature_dim},
                     {"lambda", p.lambda},
                     {"sigma", p.sigma},
                     {"nystrom_centers", p.nystrom_centers},
                     {"bootstrap", p.bootstrap},
                     {"refiner_ridge", p.refiner_ridge},
                     {"refiner_iou_min", p.refiner_iou_min},
                     {"positive_iou_min", p.positive_iou_min},
                     {"background_iou_max", p.background_iou_max},
                     {"confidence_threshold", p.confidence_threshold},
                     {"nms_threshold", p.nms_threshold},
                     {"confidence_temperature", p.confidence_temperature},
                     {"train_seed", p.train_seed}};
}

inline void from_json(const nlohmann::json& j, DetectorParams& p) {
  j.at("num_classes").get_to(p.num_classes);
  j.at("feature_dim").get_to(p.feature_dim);
  j.at("lambda").get_to(p.lambda);
  j.at("sigma").get_to(p.sigma);
  j.at("nystrom_centers").get_to(p.nystrom_centers);
  j.at("bootstrap").get_to(p.bootstrap);
  j.at("refiner_ridge").get_to(p.refiner_ridge);
  j.at("refiner_iou_min").get_to(p.refiner_iou_min);
  j.at("positive_iou_min").get_to(p.positive_iou_min);
  j.at("background_iou_max").get_to(p.background_iou_max);
  j.at("confidence_threshold").get_to(p.confidence_threshold);
  j.at("nms_threshold").get_to(p.nms_threshold);
  j.at("confidence_temperature").get_to(p.confidence_temperature);
  j.at("train_seed").get_to(p.train_seed);
}

inline nlohmann::json model_to_json(const DetectorModel& model) {
  nlohmann::json classifiers = nlohmann::json::array();
  for (const ClassClassifier& clf : model.classifiers) {
    classifiers.push_back(nlohmann::json{{"centers", detail::matrix_to_json(clf.centers)},
                                         {"coefficients", detail::vector_to_json(clf.coefficients)},
                                         {"kernel_sigma", clf.kernel_sigma},
                                         {"lambda", clf.lambda}});
  }
  nlohmann::json refiner;
  if (model.refiner.trained()) {
    refiner = nlohmann::json{{"weights", detail::matrix_to_json(model.refiner.weights)},
                             {"ridge", model.refiner.ridge}};
  }
  return nlohmann::json{{"schema_version", kModelSchemaVersion},
                        {"kind", "detector_model"},
                        {"params", model.params},
                        {"classifiers", std::move(classifiers)},
                        {"refiner", std::move(refiner)}};
}

inline DetectorModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("schema_version")) throw IoError("model json: missing schema_version");
  if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
    throw IoError("model json: unsupported schema_version");
  }
  if (j.value("kind", std::string{}) != "detector_model") {
    throw IoError("model json: not a detector model");
  }
  DetectorModel model;
  j.at("params").get_to(model.params);
  for (const auto& cj : j.at("classifiers")) {
    ClassClassifier clf;
    clf.centers = detail::matrix_from_json(cj.at("centers"));
    clf.coefficients = detail::vector_from_json(cj.at("coefficients"));
    cj.at("kernel_sigma").get_to(clf.kernel_sigma);
    cj.at("lambda").get_to(clf.lambda);
    if (clf.centers.rows() != clf.coefficients.size()) {
      throw IoError("model json: centers/coefficients size mismatch");
    }
    model.classifiers.push_back(std::move(clf));
  }
  if (static_cast<int>(model.classifiers.size()) != model.params.num_classes) {
    throw IoError("model json: classifier count does not match num_classes");
  }
  const auto& rj = j.at("refiner");
  if (!rj.is_null()) {
    model.refiner.weights = detail::matrix_from_json(rj.at("weights"));
    rj.at("ridge").get_to(model.refiner.ridge);
  }
  return model;
}

inline void save_model(const std::string& path, const DetectorModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("save_model: cannot open " + path);
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw IoError("save_model: write failed for " + path);
}

inline DetectorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_model: invalid json in " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace wsod
