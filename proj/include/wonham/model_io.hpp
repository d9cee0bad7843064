#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wonham/model.hpp"

namespace wonham {

namespace detail {

inline double finite_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw Error(ErrorCode::InvalidArgument, where + " is not a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, where + " is not finite");
  return v;
}

}  // namespace detail

/// Parses the model document {"d", "A", "h", "R", "name"?} and validates it.
inline HmmModel model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "model document must be a JSON object");
  for (const char* key : {"d", "A", "h", "R"})
    if (!doc.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("model is missing field '") + key + "'");
  if (!doc["d"].is_number_integer() || doc["d"].get<long long>() <= 0)
    throw Error(ErrorCode::InvalidArgument, "'d' must be a positive integer");
  const auto d = doc["d"].get<long long>();

  const auto& jA = doc["A"];
  if (!jA.is_array()) throw Error(ErrorCode::InvalidArgument, "'A' must be an array of rows");
  std::vector<std::vector<double>> A;
  for (std::size_t i = 0; i < jA.size(); ++i) {
    if (!jA[i].is_array()) throw Error(ErrorCode::InvalidArgument, "'A' rows must be arrays");
    std::vector<double> row;
    for (std::size_t j = 0; j < jA[i].size(); ++j)
      row.push_back(detail::finite_number(jA[i][j], "A[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
    A.push_back(std::move(row));
  }
  const auto& jh = doc["h"];
  if (!jh.is_array()) throw Error(ErrorCode::InvalidArgument, "'h' must be an array");
  std::vector<double> h;
  for (std::size_t i = 0; i < jh.size(); ++i)
    h.push_back(detail::finite_number(jh[i], "h[" + std::to_string(i) + "]"));
  const double R = detail::finite_number(doc["R"], "R");

  if (static_cast<long long>(A.size()) != d || static_cast<long long>(h.size()) != d) {
    std::ostringstream os;
    os << "declared d=" << d << " but A has " << A.size() << " rows and h has " << h.size() << " entries";
    throw ModelValidationError({{ErrorCode::DimensionMismatch, os.str()}});
  }
  std::string name = doc.value("name", std::string{});
  return validate_model(A, h, R, std::move(name));
}

inline nlohmann::json model_to_json(const HmmModel& model) {
  nlohmann::json doc;
  doc["d"] = model.d();
  nlohmann::json A = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.d(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < model.d(); ++j) row.push_back(model.A()(i, j));
    A.push_back(row);
  }
  doc["A"] = A;
  doc["h"] = detail::to_std(model.h());
  doc["R"] = model.R();
  if (!model.name().empty()) doc["name"] = model.name();
  return doc;
}

inline HmmModel parse_model(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("model JSON: ") + e.what());
  }
  return model_from_json(doc);
}

inline HmmModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace wonham
