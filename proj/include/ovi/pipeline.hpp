#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ovi/beam.hpp"
#include "ovi/common.hpp"
#include "ovi/io.hpp"
#include "ovi/traffic.hpp"

namespace ovi::data {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Girder sections and labeling
// ---------------------------------------------------------------------------

// Equal-length sections tiling [0, L]; the last section may be shorter. The
// section length must be a whole number of automaton cells so cells never
// straddle a boundary.
struct SectionMap {
  std::vector<double> boundaries;  // n_sections + 1 ascending values, 0..L
  int target_section = 0;
  double overload_threshold_kg = 30000.0;

  int n_sections() const { return static_cast<int>(boundaries.size()) - 1; }
  double section_lo(int i) const { return boundaries[static_cast<std::size_t>(i)]; }
  double section_hi(int i) const { return boundaries[static_cast<std::size_t>(i) + 1]; }

  int section_of(double pos_m) const {
    if (pos_m < boundaries.front() || pos_m >= boundaries.back()) return -1;
    const auto it =
        std::upper_bound(boundaries.begin(), boundaries.end(), pos_m);
    return static_cast<int>(it - boundaries.begin()) - 1;
  }
  bool in_target(double pos_m) const {
    return section_of(pos_m) == target_section;
  }

  json to_json() const {
    return json{{"boundaries_m", boundaries},
                {"target_section", target_section},
                {"overload_threshold_kg", overload_threshold_kg}};
  }
  static SectionMap from_json(const json& j) {
    SectionMap m;
    m.boundaries = j.at("boundaries_m").get<std::vector<double>>();
    m.target_section = j.at("target_section").get<int>();
    m.overload_threshold_kg = j.at("overload_threshold_kg").get<double>();
    return m;
  }
};

inline SectionMap make_section_map(double bridge_length_m,
                                   double section_length_m,
                                   double cell_length_m, int target_section,
                                   double overload_threshold_kg = 30000.0) {
  require(section_length_m > 0.0 && section_length_m <= bridge_length_m,
          "bad section length");
  const double cells = section_length_m / cell_length_m;
  require(std::abs(cells - std::round(cells)) <= 1e-9 && cells >= 1.0 - 1e-9,
          "section length must be a multiple of the cell length");
  SectionMap m;
  m.overload_threshold_kg = overload_threshold_kg;
  m.boundaries.push_back(0.0);
  while (m.boundaries.back() < bridge_length_m - 1e-9) {
    m.boundaries.push_back(
        std::min(m.boundaries.back() + section_length_m, bridge_length_m));
  }
  require(target_section >= 0 && target_section < m.n_sections(),
          "target section out of range");
  m.target_section = target_section;
  return m;
}

// 1 iff some single vehicle at or above the threshold occupies a cell of the
// target section. Cell membership is judged by the cell center.
inline int label_at(const traffic::RoadState& state, const SectionMap& sections) {
  for (const auto& v : state.vehicles) {
    if (v.weight_kg >= sections.overload_threshold_kg &&
        sections.in_target((v.cell + 0.5) * state.cell_length_m)) {
      return 1;
    }
  }
  return 0;
}

// Per-sampling-instant labels using the same interpolated positions that
// drive the response synthesis, so labels and responses stay coherent at
// sub-tick sampling rates.
inline std::vector<std::uint8_t> labels_for_instants(
    const traffic::TrafficTrajectory& traj, const SectionMap& sections,
    std::size_t n_instants, double sample_dt_s) {
  std::vector<std::uint8_t> labels(n_instants, 0);
  for (std::size_t j = 0; j < n_instants; ++j) {
    const auto loads =
        traffic::loads_at(traj, static_cast<double>(j) * sample_dt_s);
    for (const auto& load : loads) {
      if (load.weight_kg >= sections.overload_threshold_kg &&
          sections.in_target(load.pos_m)) {
        labels[j] = 1;
        break;
      }
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Normalization and noise
// ---------------------------------------------------------------------------

// Fitted on the training portion only and then applied to every split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> max_abs;  // of the raw values

  json to_json() const { return json{{"mean", mean}, {"max_abs", max_abs}}; }
  static NormStats from_json(const json& j) {
    NormStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.max_abs = j.at("max_abs").get<std::vector<double>>();
    return s;
  }
};

inline NormStats fit_norm_stats(const beam::ResponseMatrix& resp,
                                std::size_t row_begin, std::size_t row_end) {
  require(row_begin < row_end && row_end <= resp.n_rows(),
          "bad normalization row range");
  const std::size_t n = resp.n_sensors;
  NormStats stats;
  stats.mean.assign(n, 0.0);
  stats.max_abs.assign(n, 0.0);
  for (std::size_t t = row_begin; t < row_end; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      const double v = resp.at(t, s);
      stats.mean[s] += v;
      stats.max_abs[s] = std::max(stats.max_abs[s], std::abs(v));
    }
  }
  const double count = static_cast<double>(row_end - row_begin);
  for (double& m : stats.mean) m /= count;
  return stats;
}

// x <- (x - mean) / max|x_raw| per sensor column. A degenerate column with
// zero max-abs maps to all zeros and is reported through `warnings`.
inline beam::ResponseMatrix normalize(const beam::ResponseMatrix& resp,
                                      const NormStats& stats,
                                      std::vector<std::string>* warnings = nullptr) {
  require(stats.mean.size() == resp.n_sensors &&
              stats.max_abs.size() == resp.n_sensors,
          "normalization stats shape mismatch");
  ensure_finite(stats.mean, "normalization mean");
  ensure_finite(stats.max_abs, "normalization max-abs");
  beam::ResponseMatrix out = resp;
  for (std::size_t s = 0; s < resp.n_sensors; ++s) {
    if (stats.max_abs[s] == 0.0) {
      if (warnings) {
        warnings->push_back("sensor " + std::to_string(s) +
                            " has zero max-abs; column mapped to zeros");
      }
      for (std::size_t t = 0; t < out.n_rows(); ++t) out.at(t, s) = 0.0;
      continue;
    }
    const double inv = 1.0 / stats.max_abs[s];
    const double mean = stats.mean[s];
    for (std::size_t t = 0; t < out.n_rows(); ++t) {
      out.at(t, s) = (out.at(t, s) - mean) * inv;
    }
  }
  ensure_finite(out.values, "normalized response");
  return out;
}

// White Gaussian noise added elementwise after normalization. sigma = 0 is
// the bitwise identity.
inline beam::ResponseMatrix inject_noise(const beam::ResponseMatrix& resp,
                                         double sigma, Rng& rng) {
  require(sigma >= 0.0, "noise sigma must be >= 0");
  beam::ResponseMatrix out = resp;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& v : out.values) v += normal(rng);
  ensure_finite(out.values, "noisy response");
  return out;
}

// ---------------------------------------------------------------------------
// Slicing and splitting
// ---------------------------------------------------------------------------

struct Sample {
  std::vector<double> window;  // l x n row-major
  int label = 0;
  std::size_t end_instant = 0;
};

// N instants turn into N - l + 1 windows; window k covers instants
// [k, k+l-1] and takes its label from the last instant.
inline std::vector<Sample> slice(const beam::ResponseMatrix& resp,
                                 const std::vector<std::uint8_t>& labels,
                                 int l) {
  require(l >= 1, "window length must be >= 1");
  const std::size_t n_rows = resp.n_rows();
  require(labels.size() == n_rows, "labels/response length mismatch");
  require(n_rows >= static_cast<std::size_t>(l),
          "fewer instants than the window length");
  const std::size_t n = resp.n_sensors;
  std::vector<Sample> samples;
  samples.reserve(n_rows - l + 1);
  for (std::size_t k = 0; k + l <= n_rows; ++k) {
    Sample s;
    s.window.assign(resp.values.begin() + static_cast<std::ptrdiff_t>(k * n),
                    resp.values.begin() + static_cast<std::ptrdiff_t>((k + l) * n));
    s.end_instant = k + l - 1;
    s.label = labels[s.end_instant];
    samples.push_back(std::move(s));
  }
  return samples;
}

struct SplitRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// Contiguous temporal split over sample indices. Ratios apply to the instant
// count; the test split takes the remaining samples, matching the
// first-60k convention for 100k instants.
struct SplitSpec {
  SplitRange train, val, test;

  static SplitSpec from_ratios(std::size_t n_instants, int l,
                               double r_train = 0.6, double r_val = 0.2) {
    require(r_train > 0.0 && r_val >= 0.0 && r_train + r_val < 1.0 + 1e-12,
            "bad split ratios");
    require(n_instants >= static_cast<std::size_t>(l), "too few instants");
    const std::size_t n_samples = n_instants - static_cast<std::size_t>(l) + 1;
    const auto n_train = static_cast<std::size_t>(
        std::llround(r_train * static_cast<double>(n_instants)));
    const auto n_val = static_cast<std::size_t>(
        std::llround(r_val * static_cast<double>(n_instants)));
    require(n_train >= 1 && n_train + n_val < n_samples,
            "split leaves no test samples");
    SplitSpec s;
    s.train = {0, n_train};
    s.val = {n_train, n_train + n_val};
    s.test = {n_train + n_val, n_samples};
    return s;
  }

  void validate(std::size_t n_samples) const {
    require(train.begin == 0 && train.end == val.begin && val.end == test.begin &&
                test.end == n_samples,
            "split ranges must be contiguous, ordered and covering");
    require(train.begin <= train.end && val.begin <= val.end &&
                test.begin <= test.end,
            "split ranges must be non-overlapping");
  }

  json to_json() const {
    return json{{"train", {train.begin, train.end}},
                {"val", {val.begin, val.end}},
                {"test", {test.begin, test.end}}};
  }
  static SplitSpec from_json(const json& j) {
    SplitSpec s;
    s.train = {j.at("train")[0].get<std::size_t>(), j.at("train")[1].get<std::size_t>()};
    s.val = {j.at("val")[0].get<std::size_t>(), j.at("val")[1].get<std::size_t>()};
    s.test = {j.at("test")[0].get<std::size_t>(), j.at("test")[1].get<std::size_t>()};
    return s;
  }
};

struct SplitSamples {
  std::vector<Sample> train, val, test;
};

inline SplitSamples split(const std::vector<Sample>& samples,
                          const SplitSpec& spec) {
  spec.validate(samples.size());
  SplitSamples out;
  out.train.assign(samples.begin() + static_cast<std::ptrdiff_t>(spec.train.begin),
                   samples.begin() + static_cast<std::ptrdiff_t>(spec.train.end));
  out.val.assign(samples.begin() + static_cast<std::ptrdiff_t>(spec.val.begin),
                 samples.begin() + static_cast<std::ptrdiff_t>(spec.val.end));
  out.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(spec.test.begin),
                  samples.begin() + static_cast<std::ptrdiff_t>(spec.test.end));
  return out;
}

// ---------------------------------------------------------------------------
// The assembled dataset: processed response + per-instant labels + split
// ---------------------------------------------------------------------------

struct Dataset {
  beam::ResponseMatrix resp;          // normalized (+ noise) values
  std::vector<std::uint8_t> labels;   // per instant
  int l = 8;
  double sigma = 0.0;
  SplitSpec split;
  NormStats stats;
  SectionMap sections;
  json meta;                          // provenance written to the sidecar

  std::size_t n_samples() const { return resp.n_rows() - l + 1; }
  int sample_label(std::size_t i) const {
    return labels[i + static_cast<std::size_t>(l) - 1];
  }
  // Copies window i (l x n rows ending at instant i + l - 1) into out.
  void fill_window(std::size_t i, double* out) const {
    const std::size_t n = resp.n_sensors;
    const double* src = resp.values.data() + i * n;
    std::copy(src, src + static_cast<std::size_t>(l) * n, out);
  }
  double positive_rate(const SplitRange& r) const {
    if (r.size() == 0) return 0.0;
    std::size_t pos = 0;
    for (std::size_t i = r.begin; i < r.end; ++i) pos += sample_label(i) ? 1 : 0;
    return static_cast<double>(pos) / static_cast<double>(r.size());
  }
};

// Normalization stats come from the training instants only; noise goes into
// every split with one stream so a given (seed, sigma) pair is reproducible.
inline Dataset build_dataset(const beam::ResponseMatrix& raw,
                             std::vector<std::uint8_t> labels,
                             const SectionMap& sections, int l, double sigma,
                             std::uint64_t noise_seed, double r_train = 0.6,
                             double r_val = 0.2,
                             std::vector<std::string>* warnings = nullptr) {
  const std::size_t n_instants = raw.n_rows();
  require(labels.size() == n_instants, "labels/response length mismatch");
  Dataset ds;
  ds.l = l;
  ds.sigma = sigma;
  ds.sections = sections;
  ds.split = SplitSpec::from_ratios(n_instants, l, r_train, r_val);
  const auto train_instants = static_cast<std::size_t>(
      std::llround(r_train * static_cast<double>(n_instants)));
  ds.stats = fit_norm_stats(raw, 0, train_instants);
  beam::ResponseMatrix normed = normalize(raw, ds.stats, warnings);
  Rng rng(noise_seed);
  ds.resp = inject_noise(normed, sigma, rng);
  ds.labels = std::move(labels);
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset files: CSV of processed instants plus a JSON sidecar
// ---------------------------------------------------------------------------

inline std::string dataset_to_csv(const Dataset& ds,
                                  const std::string& config_digest = {}) {
  std::string out;
  out.reserve(ds.resp.values.size() * 20);
  if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
  out += "t_index";
  for (std::size_t s = 0; s < ds.resp.n_sensors; ++s) {
    out += ",sensor_" + std::to_string(s);
  }
  out += ",label\n";
  for (std::size_t t = 0; t < ds.resp.n_rows(); ++t) {
    out += std::to_string(t);
    for (std::size_t s = 0; s < ds.resp.n_sensors; ++s) {
      out += ',';
      out += format_double(ds.resp.at(t, s));
    }
    out += ',';
    out += std::to_string(static_cast<int>(ds.labels[t]));
    out += '\n';
  }
  return out;
}

inline json dataset_meta_json(const Dataset& ds, const json& extra) {
  json j{{"l", ds.l},
         {"sigma", ds.sigma},
         {"n_instants", ds.resp.n_rows()},
         {"n_sensors", ds.resp.n_sensors},
         {"dt_s", ds.resp.dt_s},
         {"sensor_positions_m", ds.resp.sensor_positions_m},
         {"norm_stats", ds.stats.to_json()},
         {"sections", ds.sections.to_json()},
         {"split", ds.split.to_json()}};
  j.update(extra);
  return j;
}

inline Dataset dataset_from_files(const std::string& csv, const json& meta) {
  Dataset ds;
  ds.l = meta.at("l").get<int>();
  ds.sigma = meta.at("sigma").get<double>();
  ds.stats = NormStats::from_json(meta.at("norm_stats"));
  ds.sections = SectionMap::from_json(meta.at("sections"));
  ds.split = SplitSpec::from_json(meta.at("split"));
  ds.meta = meta;
  ds.resp.n_sensors = meta.at("n_sensors").get<std::size_t>();
  ds.resp.dt_s = meta.at("dt_s").get<double>();
  ds.resp.sensor_positions_m =
      meta.at("sensor_positions_m").get<std::vector<double>>();
  for_each_csv_row(csv, [&](const std::vector<std::string_view>& cols) {
    if (cols.size() != ds.resp.n_sensors + 2) {
      throw IoError("dataset row has wrong column count");
    }
    for (std::size_t s = 0; s < ds.resp.n_sensors; ++s) {
      ds.resp.values.push_back(parse_double(cols[s + 1]));
    }
    ds.labels.push_back(static_cast<std::uint8_t>(parse_int(cols.back())));
  });
  require(ds.resp.n_rows() == meta.at("n_instants").get<std::size_t>(),
          "dataset row count does not match its sidecar");
  ds.split.validate(ds.n_samples());
  return ds;
}

}  // namespace ovi::data
