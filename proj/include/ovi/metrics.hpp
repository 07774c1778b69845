#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "json.hpp"
#include "ovi/common.hpp"

namespace ovi::eval {

using json = nlohmann::json;

struct Metrics {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  double f1 = 0.0;
  bool zero_division = false;

  std::int64_t total() const { return tp + fp + fn + tn; }

  json to_json() const {
    json j{{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn},
           {"f1", f1}, {"zero_division", zero_division}};
    j["precision"] = precision ? json(*precision) : json(nullptr);
    j["recall"] = recall ? json(*recall) : json(nullptr);
    return j;
  }
};

// Confusion counts with precision, recall and their harmonic mean. Undefined
// ratios stay absent with the zero-division flag set; F1 is 0 whenever
// P + R = 0.
inline Metrics prf1(std::span<const int> predictions,
                    std::span<const int> labels) {
  require(predictions.size() == labels.size(), "prediction/label length mismatch");
  Metrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] != 0;
    const bool y = labels[i] != 0;
    if (p && y) ++m.tp;
    else if (p && !y) ++m.fp;
    else if (!p && y) ++m.fn;
    else ++m.tn;
  }
  if (m.tp + m.fp > 0) {
    m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  } else {
    m.zero_division = true;
  }
  if (m.tp + m.fn > 0) {
    m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  } else {
    m.zero_division = true;
  }
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  } else {
    m.f1 = 0.0;
  }
  return m;
}

}  // namespace ovi::eval
