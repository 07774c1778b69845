#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ovi/config.hpp"
#include "ovi/io.hpp"
#include "ovi/metrics.hpp"
#include "ovi/model.hpp"
#include "ovi/pipeline.hpp"

namespace ovi::eval {

// Bounded worker pool over independent tasks. Every task owns its output
// slot, so results are identical no matter how the pool schedules them.
inline void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
  if (tasks.empty()) return;
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) break;
        try {
          tasks[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Shared pipeline stages
// ---------------------------------------------------------------------------

struct PipelineArtifacts {
  traffic::TrafficTrajectory traj;
  beam::ResponseMatrix raw;  // unnormalized response
};

inline PipelineArtifacts build_artifacts(const RunConfig& c) {
  PipelineArtifacts art;
  art.traj = traffic::simulate(c.ca_params(), c.required_ticks());
  art.raw = beam::synthesize_response(art.traj, c.beam_model(), c.sensors(),
                                      c.dataset.sample_dt_s,
                                      c.dataset.n_instants,
                                      c.response_backend());
  return art;
}

inline data::Dataset make_dataset(const RunConfig& c,
                                  const PipelineArtifacts& art,
                                  int target_section, double sigma) {
  const auto sections = c.section_map(target_section);
  auto labels = data::labels_for_instants(
      art.traj, sections, c.dataset.n_instants, c.dataset.sample_dt_s);
  return data::build_dataset(art.raw, std::move(labels), sections,
                             c.dataset.l, sigma, noise_seed(c, sigma),
                             c.dataset.train_ratio, c.dataset.val_ratio);
}

struct TrainedRun {
  std::string approach;
  model::TrainReport report;
  std::vector<double> test_scores;
  Metrics test_metrics;
  nn::Network net;
};

inline TrainedRun train_and_eval(const RunConfig& c, const data::Dataset& ds,
                                 const std::string& approach, int section,
                                 double sigma) {
  TrainedRun run;
  run.approach = approach;
  const auto cfg = c.dovi_config(train_seed(c, approach, section, sigma));
  run.net = model::build_network(approach, ds.resp.n_sensors, cfg);
  run.report = model::train(run.net, ds, cfg);
  run.test_scores = model::score_range(run.net, ds, ds.split.test);
  run.test_metrics = model::metrics_at_threshold(
      run.test_scores, ds, ds.split.test, run.report.threshold);
  return run;
}

// ---------------------------------------------------------------------------
// Study results
// ---------------------------------------------------------------------------

struct StudyRow {
  double axis = 0.0;
  std::string approach;
  Metrics metrics;
};

struct StudyResult {
  std::string id;
  std::vector<StudyRow> rows;
  json summary;
};

inline std::string study_to_csv(const StudyResult& res,
                                const std::string& config_digest = {}) {
  std::string out;
  if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
  out += "axis_value,approach,precision,recall,f1,tp,fp,fn,tn\n";
  for (const auto& r : res.rows) {
    out += format_double(r.axis);
    out += ',' + r.approach + ',';
    out += r.metrics.precision ? format_double(*r.metrics.precision) : "";
    out += ',';
    out += r.metrics.recall ? format_double(*r.metrics.recall) : "";
    out += ',' + format_double(r.metrics.f1);
    out += ',' + std::to_string(r.metrics.tp);
    out += ',' + std::to_string(r.metrics.fp);
    out += ',' + std::to_string(r.metrics.fn);
    out += ',' + std::to_string(r.metrics.tn);
    out += '\n';
  }
  return out;
}

// Sections eligible as classification targets: a trailing stub much shorter
// than the nominal section length is excluded (the long-span preset's 5 m
// remainder), while a modestly shorter last section still counts.
inline std::vector<int> usable_sections(const data::SectionMap& map,
                                        double nominal_length_m) {
  std::vector<int> out;
  for (int i = 0; i < map.n_sections(); ++i) {
    const double len = map.section_hi(i) - map.section_lo(i);
    if (len < 0.5 * nominal_length_m) continue;
    out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

// Trains and evaluates every approach with each usable section as the
// target; the per-section F1 table.
inline StudyResult section_study(const RunConfig& c,
                                 const PipelineArtifacts& art) {
  const auto all = c.section_map(0);
  const std::vector<int> sections_idx =
      usable_sections(all, c.sections.section_length_m);

  std::vector<data::Dataset> datasets(sections_idx.size());
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < sections_idx.size(); ++i) {
      tasks.push_back([&, i] {
        datasets[i] = make_dataset(c, art, sections_idx[i], c.dataset.sigma);
      });
    }
    run_parallel(tasks, c.jobs);
  }

  StudyResult res;
  res.id = "sections";
  res.rows.resize(sections_idx.size() * c.study.approaches.size());
  json reports = json::object();
  {
    std::vector<std::function<void()>> tasks;
    std::mutex report_mutex;
    for (std::size_t i = 0; i < sections_idx.size(); ++i) {
      for (std::size_t a = 0; a < c.study.approaches.size(); ++a) {
        tasks.push_back([&, i, a] {
          const int section = sections_idx[i];
          const auto& approach = c.study.approaches[a];
          auto run = train_and_eval(c, datasets[i], approach, section,
                                    c.dataset.sigma);
          res.rows[i * c.study.approaches.size() + a] =
              StudyRow{static_cast<double>(section), approach,
                       run.test_metrics};
          std::lock_guard<std::mutex> lock(report_mutex);
          reports[approach + "/section" + std::to_string(section)] =
              run.report.to_json();
        });
      }
    }
    run_parallel(tasks, c.jobs);
  }
  res.summary = json{{"study", "sections"},
                     {"preset", c.preset},
                     {"seed", c.seed},
                     {"config_digest", c.digest()},
                     {"sigma", c.dataset.sigma},
                     {"sections", sections_idx},
                     {"approaches", c.study.approaches},
                     {"train_reports", reports}};
  for (const auto& r : res.rows) {
    res.summary["f1"][r.approach].push_back(
        json{{"section", r.axis}, {"f1", r.metrics.f1}});
  }
  return res;
}

// Reruns normalization + noise + training per noise level on the configured
// target section.
inline StudyResult noise_sweep(const RunConfig& c,
                               const PipelineArtifacts& art) {
  const int target = c.sections.target_section;

  std::vector<data::Dataset> datasets(c.study.sigmas.size());
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < c.study.sigmas.size(); ++i) {
      tasks.push_back([&, i] {
        datasets[i] = make_dataset(c, art, target, c.study.sigmas[i]);
      });
    }
    run_parallel(tasks, c.jobs);
  }

  StudyResult res;
  res.id = "noise";
  res.rows.resize(c.study.sigmas.size() * c.study.approaches.size());
  json reports = json::object();
  {
    std::vector<std::function<void()>> tasks;
    std::mutex report_mutex;
    for (std::size_t i = 0; i < c.study.sigmas.size(); ++i) {
      for (std::size_t a = 0; a < c.study.approaches.size(); ++a) {
        tasks.push_back([&, i, a] {
          const double sigma = c.study.sigmas[i];
          const auto& approach = c.study.approaches[a];
          auto run = train_and_eval(c, datasets[i], approach, target, sigma);
          res.rows[i * c.study.approaches.size() + a] =
              StudyRow{sigma, approach, run.test_metrics};
          std::lock_guard<std::mutex> lock(report_mutex);
          reports[approach + "/sigma" + format_double(sigma)] =
              run.report.to_json();
        });
      }
    }
    run_parallel(tasks, c.jobs);
  }
  res.summary = json{{"study", "noise"},
                     {"preset", c.preset},
                     {"seed", c.seed},
                     {"config_digest", c.digest()},
                     {"target_section", target},
                     {"sigmas", c.study.sigmas},
                     {"approaches", c.study.approaches},
                     {"train_reports", reports}};
  for (const auto& r : res.rows) {
    res.summary["f1"][r.approach].push_back(
        json{{"sigma", r.axis}, {"f1", r.metrics.f1}});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Multi-vehicle false-positive analyses
// ---------------------------------------------------------------------------

struct FpBin {
  double lo_kg = 0.0;
  std::int64_t cases = 0;
  std::int64_t false_positives = 0;
};

struct FpStudy {
  std::int64_t cases = 0;
  std::int64_t false_positives = 0;
  std::optional<double> rate;  // absent when no qualifying instants
  std::vector<FpBin> bins;     // total-weight study only

  json to_json() const {
    json j{{"cases", cases}, {"false_positives", false_positives}};
    j["rate"] = rate ? json(*rate) : json(nullptr);
    if (!bins.empty()) {
      json b = json::array();
      for (const auto& bin : bins) {
        json row{{"lo_kg", bin.lo_kg},
                 {"cases", bin.cases},
                 {"false_positives", bin.false_positives}};
        row["rate"] = bin.cases > 0
                          ? json(static_cast<double>(bin.false_positives) /
                                 static_cast<double>(bin.cases))
                          : json(nullptr);
        b.push_back(row);
      }
      j["bins"] = b;
    }
    return j;
  }
};

// False positives among test instants with an overloaded vehicle on the
// neighbor section and none on the target.
inline FpStudy neighbor_fp_study(const std::vector<double>& test_scores,
                                 double threshold, const data::Dataset& ds,
                                 const traffic::TrafficTrajectory& traj,
                                 int neighbor_section) {
  const auto& sections = ds.sections;
  require(neighbor_section >= 0 && neighbor_section < sections.n_sections(),
          "neighbor section out of range");
  FpStudy out;
  for (std::size_t i = 0; i < test_scores.size(); ++i) {
    const std::size_t sample = ds.split.test.begin + i;
    const std::size_t instant = sample + static_cast<std::size_t>(ds.l) - 1;
    const double t = static_cast<double>(instant) * ds.resp.dt_s;
    const auto loads = traffic::loads_at(traj, t);
    bool target_overload = false, neighbor_overload = false;
    for (const auto& load : loads) {
      if (load.weight_kg < sections.overload_threshold_kg) continue;
      const int sec = sections.section_of(load.pos_m);
      if (sec == sections.target_section) target_overload = true;
      if (sec == neighbor_section) neighbor_overload = true;
    }
    if (target_overload || !neighbor_overload) continue;
    ++out.cases;
    if (model::predict_label(test_scores[i], threshold)) ++out.false_positives;
  }
  if (out.cases > 0) {
    out.rate = static_cast<double>(out.false_positives) /
               static_cast<double>(out.cases);
  }
  return out;
}

// False positives among test instants where no single vehicle on the target
// section is overloaded but their total weight exceeds the threshold, binned
// by total weight (10 t bins from the threshold up).
inline FpStudy total_weight_fp_study(const std::vector<double>& test_scores,
                                     double threshold, const data::Dataset& ds,
                                     const traffic::TrafficTrajectory& traj,
                                     double bin_width_kg = 10000.0) {
  const auto& sections = ds.sections;
  FpStudy out;
  std::map<int, FpBin> bins;
  for (std::size_t i = 0; i < test_scores.size(); ++i) {
    const std::size_t sample = ds.split.test.begin + i;
    const std::size_t instant = sample + static_cast<std::size_t>(ds.l) - 1;
    const double t = static_cast<double>(instant) * ds.resp.dt_s;
    const auto loads = traffic::loads_at(traj, t);
    bool target_overload = false;
    double total = 0.0;
    for (const auto& load : loads) {
      if (sections.section_of(load.pos_m) != sections.target_section) continue;
      total += load.weight_kg;
      if (load.weight_kg >= sections.overload_threshold_kg) {
        target_overload = true;
      }
    }
    if (target_overload || total <= sections.overload_threshold_kg) continue;
    ++out.cases;
    const bool fp = model::predict_label(test_scores[i], threshold) != 0;
    if (fp) ++out.false_positives;
    const int bin_idx = static_cast<int>(
        (total - sections.overload_threshold_kg) / bin_width_kg);
    auto& bin = bins[bin_idx];
    bin.lo_kg = sections.overload_threshold_kg + bin_idx * bin_width_kg;
    ++bin.cases;
    if (fp) ++bin.false_positives;
  }
  if (out.cases > 0) {
    out.rate = static_cast<double>(out.false_positives) /
               static_cast<double>(out.cases);
  }
  for (const auto& [idx, bin] : bins) out.bins.push_back(bin);
  return out;
}

inline std::string fp_study_to_csv(const FpStudy& s, const std::string& approach,
                                   double axis,
                                   const std::string& config_digest = {}) {
  std::string out;
  if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
  out += "axis_value,approach,cases,false_positives,fp_rate\n";
  auto row = [&](double a, std::int64_t cases, std::int64_t fps) {
    out += format_double(a);
    out += ',' + approach + ',' + std::to_string(cases) + ',' +
           std::to_string(fps) + ',';
    out += cases > 0 ? format_double(static_cast<double>(fps) /
                                     static_cast<double>(cases))
                     : "";
    out += '\n';
  };
  if (s.bins.empty()) {
    row(axis, s.cases, s.false_positives);
  } else {
    for (const auto& b : s.bins) row(b.lo_kg, b.cases, b.false_positives);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Section length sweep (traffic only)
// ---------------------------------------------------------------------------

struct SectionLengthResult {
  std::vector<std::pair<double, double>> rows;  // length -> mean vehicles
  json summary;
};

inline SectionLengthResult section_length_study(
    const RunConfig& c, const traffic::TrafficTrajectory& traj) {
  require(!c.study.section_lengths.empty(),
          "no section lengths configured for the sweep");
  SectionLengthResult res;
  for (double len : c.study.section_lengths) {
    res.rows.emplace_back(len, traffic::avg_vehicles_per_section(traj, len));
  }
  res.summary = json{{"study", "section-length"},
                     {"preset", c.preset},
                     {"seed", c.seed},
                     {"config_digest", c.digest()}};
  for (const auto& [len, avg] : res.rows) {
    res.summary["rows"].push_back(
        json{{"section_length_m", len}, {"avg_vehicles", avg}});
  }
  return res;
}

inline std::string section_length_to_csv(const SectionLengthResult& res,
                                         const std::string& config_digest = {}) {
  std::string out;
  if (!config_digest.empty()) out += "# config_digest=" + config_digest + "\n";
  out += "section_length_m,avg_vehicles\n";
  for (const auto& [len, avg] : res.rows) {
    out += format_double(len);
    out += ',' + format_double(avg) + '\n';
  }
  return out;
}

}  // namespace ovi::eval
