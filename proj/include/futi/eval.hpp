#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futi/models.hpp"

namespace futi::eval {

/// K x K counts; rows are the actual class, columns the predicted class.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t k) : classes(k), counts(k * k, 0) {}

  std::uint64_t& at(std::size_t actual, std::size_t predicted) {
    return counts[actual * classes + predicted];
  }
  std::uint64_t at(std::size_t actual, std::size_t predicted) const {
    return counts[actual * classes + predicted];
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t k = 0; k < classes; ++k) s += at(k, k);
    return s;
  }
  std::uint64_t column_sum(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t a = 0; a < classes; ++a) s += at(a, k);
    return s;
  }
  std::uint64_t row_sum(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < classes; ++p) s += at(k, p);
    return s;
  }

  /// Shard merge.
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.classes != classes) throw std::invalid_argument("confusion matrices differ in size");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> labels, std::size_t classes) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  if (classes == 0) throw std::invalid_argument("confusion: class count must be positive");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes || predictions[i] >= classes)
      throw std::out_of_range("confusion: class id outside [0," + std::to_string(classes) +
                              ") at sample " + std::to_string(i));
    ++cm.at(labels[i], predictions[i]);
  }
  return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw std::invalid_argument("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

struct PrecisionResult {
  double macro = 0.0;
  std::vector<double> per_class;
  /// Classes that were never predicted; their precision is reported as 0.
  std::vector<std::size_t> never_predicted;
};

inline PrecisionResult precision(const ConfusionMatrix& cm) {
  if (cm.classes < 2) throw std::invalid_argument("precision needs at least 2 classes");
  if (cm.total() == 0) throw std::invalid_argument("precision of an all-zero confusion matrix");
  PrecisionResult r;
  r.per_class.resize(cm.classes);
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.classes; ++k) {
    const auto col = cm.column_sum(k);
    if (col == 0) {
      r.never_predicted.push_back(k);
      r.per_class[k] = 0.0;
    } else {
      r.per_class[k] = static_cast<double>(cm.at(k, k)) / static_cast<double>(col);
    }
    sum += r.per_class[k];
  }
  r.macro = sum / static_cast<double>(cm.classes);
  return r;
}

inline double precision_macro(const ConfusionMatrix& cm) { return precision(cm).macro; }

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double precision_macro = 0.0;
  /// Equal to accuracy for single-label classification.
  double precision_micro = 0.0;
  std::vector<double> per_class_precision;
  std::vector<std::size_t> never_predicted;
  std::uint64_t n_samples = 0;
  std::string model;
  std::string scenario;
  std::uint64_t seed = 0;
};

inline EvalReport make_report(ConfusionMatrix cm) {
  EvalReport r;
  r.n_samples = cm.total();
  r.accuracy = accuracy(cm);
  r.precision_micro = r.accuracy;
  auto p = precision(cm);
  r.precision_macro = p.macro;
  r.per_class_precision = std::move(p.per_class);
  r.never_predicted = std::move(p.never_predicted);
  r.confusion = std::move(cm);
  return r;
}

/// Argmax (lowest class id on ties) of eval-mode probabilities.
template <typename T>
EvalReport predict_and_report(models::Model<T>& model, const models::LabeledSet<T>& test_set,
                              std::size_t classes) {
  if (test_set.size() == 0) throw std::invalid_argument("evaluation set is empty");
  const auto probs = models::predict_proba(model, test_set);
  const auto pred = argmax_rows(probs);
  EvalReport r = make_report(confusion(pred, test_set.labels, classes));
  r.model = models::kind_name(model.kind());
  return r;
}

// ---------------------------------------------------------------------------
// Report files

inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["n_samples"] = r.n_samples;
  j["accuracy"] = r.accuracy;
  j["precision_macro"] = r.precision_macro;
  j["precision_micro"] = r.precision_micro;
  j["per_class_precision"] = r.per_class_precision;
  j["never_predicted"] = r.never_predicted;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < r.confusion.classes; ++a) {
    std::vector<std::uint64_t> row(r.confusion.counts.begin() + a * r.confusion.classes,
                                   r.confusion.counts.begin() + (a + 1) * r.confusion.classes);
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

inline EvalReport from_json(const nlohmann::json& j) {
  EvalReport r;
  r.model = j.at("model").get<std::string>();
  r.scenario = j.at("scenario").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_samples = j.at("n_samples").get<std::uint64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.precision_macro = j.at("precision_macro").get<double>();
  r.precision_micro = j.at("precision_micro").get<double>();
  r.per_class_precision = j.at("per_class_precision").get<std::vector<double>>();
  r.never_predicted = j.at("never_predicted").get<std::vector<std::size_t>>();
  const auto rows = j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>();
  r.confusion = ConfusionMatrix(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].size() != rows.size()) throw std::invalid_argument("confusion matrix not square");
    for (std::size_t p = 0; p < rows.size(); ++p) r.confusion.at(a, p) = rows[a][p];
  }
  return r;
}

inline void write_report(const EvalReport& r, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << to_json(r).dump(2) << '\n';
}

inline EvalReport read_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read report " + path);
  try {
    return from_json(nlohmann::json::parse(f));
  } catch (const std::exception& e) {
    throw std::runtime_error("malformed report " + path + ": " + e.what());
  }
}

/// Header "actual,pred_0,...,pred_{K-1}", one row per actual class.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "actual";
  for (std::size_t p = 0; p < cm.classes; ++p) os << ",pred_" << p;
  os << '\n';
  for (std::size_t a = 0; a < cm.classes; ++a) {
    os << a;
    for (std::size_t p = 0; p < cm.classes; ++p) os << ',' << cm.at(a, p);
    os << '\n';
  }
  return os.str();
}

inline ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty confusion csv");
  std::vector<std::vector<std::uint64_t>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    std::vector<std::uint64_t> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stoull(cell));
    rows.push_back(std::move(row));
  }
  ConfusionMatrix cm(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].size() != rows.size()) throw std::invalid_argument("confusion csv not square");
    for (std::size_t p = 0; p < rows.size(); ++p) cm.at(a, p) = rows[a][p];
  }
  return cm;
}

}  // namespace futi::eval
