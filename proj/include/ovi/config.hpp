#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ovi/beam.hpp"
#include "ovi/common.hpp"
#include "ovi/model.hpp"
#include "ovi/pipeline.hpp"
#include "ovi/traffic.hpp"

namespace ovi {

using json = nlohmann::json;

struct BridgeConfig {
  int n_cells = 30;
  double cell_length_m = 2.0;
  int v_max = 4;
  double e_pa = 33e9;
  double inertia_m4 = 0.28;  // vertical bending uses the larger listed value
  double density_kg_m3 = 2600.0;
  double area_m2 = 0.94;
  int n_elements = 64;
  std::string response_model = "closed-form-ss";  // or "finite-element"
  double spring_spacing_m = 0.0;                  // 0 = no springs
  double spring_stiffness_n_per_m = 0.0;

  double length_m() const { return n_cells * cell_length_m; }
};

struct TrafficConfig {
  double p_slow = 0.3;
  double p_inject = 0.5;
  std::array<double, 5> type_probs{0.10, 0.10, 0.15, 0.15, 0.50};
  double weight_cap_kg = 60000.0;
};

struct SectionConfig {
  double section_length_m = 16.0;
  int target_section = 1;
  double overload_threshold_kg = 30000.0;
};

struct DatasetConfig {
  std::size_t n_instants = 100000;
  int l = 8;
  double sigma = 0.0;
  double sample_dt_s = 0.5;
  double train_ratio = 0.6;
  double val_ratio = 0.2;
};

struct ModelConfig {
  std::string approach = "dovi";
  int c = 3;
  int s = 3;
  int k = 64;
  double lr = 0.002;
  int batch_size = 128;
  int epochs = 50;
  double threshold = 0.5;
  bool threshold_search = true;
};

struct StudyConfig {
  std::string id = "sections";
  std::vector<double> sigmas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::string> approaches{"dovi", "lr", "mlp"};
  std::vector<double> section_lengths;
  int neighbor_section = -1;  // -1: section preceding the target
};

struct RunConfig {
  std::string preset = "sbm";
  std::uint64_t seed = 42;
  int jobs = 1;
  BridgeConfig bridge;
  TrafficConfig traffic;
  SectionConfig sections;
  DatasetConfig dataset;
  ModelConfig model;
  StudyConfig study;

  // --- derived pieces -------------------------------------------------------

  traffic::CaParams ca_params() const {
    traffic::CaParams p;
    p.n_cells = bridge.n_cells;
    p.cell_length_m = bridge.cell_length_m;
    p.v_max = bridge.v_max;
    p.p_slow = traffic.p_slow;
    p.p_inject = traffic.p_inject;
    p.type_probs = traffic.type_probs;
    p.weight_cap_kg = traffic.weight_cap_kg;
    p.seed = derive_seed(seed, "traffic");
    return p;
  }

  beam::BeamModel beam_model() const {
    beam::BeamModel m = beam::make_simply_supported(
        bridge.length_m(), bridge.e_pa, bridge.inertia_m4,
        bridge.density_kg_m3, bridge.area_m2, bridge.n_elements);
    if (bridge.spring_spacing_m > 0.0) {
      for (double x = bridge.spring_spacing_m; x < bridge.length_m() - 1e-9;
           x += bridge.spring_spacing_m) {
        m.supports.push_back(
            {x, beam::SupportKind::kSpring, bridge.spring_stiffness_n_per_m});
      }
    }
    return m;
  }

  beam::ResponseBackend response_backend() const {
    if (bridge.response_model == "closed-form-ss") {
      return beam::ResponseBackend::kClosedFormSS;
    }
    if (bridge.response_model == "finite-element") {
      return beam::ResponseBackend::kFiniteElement;
    }
    throw ConfigError("unknown response_model: " + bridge.response_model);
  }

  beam::SensorLayout sensors() const {
    return beam::sensors_for_sections(bridge.length_m(),
                                      sections.section_length_m);
  }

  data::SectionMap section_map(int target) const {
    return data::make_section_map(bridge.length_m(), sections.section_length_m,
                                  bridge.cell_length_m, target,
                                  sections.overload_threshold_kg);
  }
  data::SectionMap section_map() const {
    return section_map(sections.target_section);
  }

  // Ticks needed to cover n_instants at the configured sampling step
  // (tick duration is 1 s; sub-tick instants interpolate toward the next
  // state, which must exist).
  std::size_t required_ticks() const {
    const double t_max =
        static_cast<double>(dataset.n_instants - 1) * dataset.sample_dt_s;
    const double rounded = std::round(t_max);
    if (std::abs(t_max - rounded) <= 1e-9) {
      return static_cast<std::size_t>(rounded) + 1;
    }
    return static_cast<std::size_t>(std::floor(t_max)) + 2;
  }

  model::DoviConfig dovi_config(std::uint64_t run_seed) const {
    model::DoviConfig cfg;
    cfg.l = dataset.l;
    cfg.c = model.c;
    cfg.s = model.s;
    cfg.k = model.k;
    cfg.lr = model.lr;
    cfg.batch_size = model.batch_size;
    cfg.epochs = model.epochs;
    cfg.threshold = model.threshold;
    cfg.threshold_search = model.threshold_search;
    cfg.seed = run_seed;
    return cfg;
  }

  // --- serialization --------------------------------------------------------

  json to_json() const {
    return json{
        {"preset", preset},
        {"seed", seed},
        {"jobs", jobs},
        {"bridge",
         {{"n_cells", bridge.n_cells},
          {"cell_length_m", bridge.cell_length_m},
          {"v_max", bridge.v_max},
          {"e_pa", bridge.e_pa},
          {"inertia_m4", bridge.inertia_m4},
          {"density_kg_m3", bridge.density_kg_m3},
          {"area_m2", bridge.area_m2},
          {"n_elements", bridge.n_elements},
          {"response_model", bridge.response_model},
          {"spring_spacing_m", bridge.spring_spacing_m},
          {"spring_stiffness_n_per_m", bridge.spring_stiffness_n_per_m}}},
        {"traffic",
         {{"p_slow", traffic.p_slow},
          {"p_inject", traffic.p_inject},
          {"type_probs", traffic.type_probs},
          {"weight_cap_kg", traffic.weight_cap_kg}}},
        {"sections",
         {{"section_length_m", sections.section_length_m},
          {"target_section", sections.target_section},
          {"overload_threshold_kg", sections.overload_threshold_kg}}},
        {"dataset",
         {{"n_instants", dataset.n_instants},
          {"l", dataset.l},
          {"sigma", dataset.sigma},
          {"sample_dt_s", dataset.sample_dt_s},
          {"train_ratio", dataset.train_ratio},
          {"val_ratio", dataset.val_ratio}}},
        {"model",
         {{"approach", model.approach},
          {"c", model.c},
          {"s", model.s},
          {"k", model.k},
          {"lr", model.lr},
          {"batch_size", model.batch_size},
          {"epochs", model.epochs},
          {"threshold", model.threshold},
          {"threshold_search", model.threshold_search}}},
        {"study",
         {{"id", study.id},
          {"sigmas", study.sigmas},
          {"approaches", study.approaches},
          {"section_lengths", study.section_lengths},
          {"neighbor_section", study.neighbor_section}}}};
  }

  // Digest over everything that shapes artifacts (out dir, jobs and study
  // selection excluded).
  std::string digest() const {
    json j = to_json();
    j.erase("jobs");
    j.erase("study");
    return hex64(fnv1a64(j.dump()));
  }

  // Digest of the dataset identity alone (no model block): a checkpoint is
  // only evaluated against the dataset it was trained on.
  std::string data_digest() const {
    json j = to_json();
    j.erase("jobs");
    j.erase("study");
    j.erase("model");
    return hex64(fnv1a64(j.dump()));
  }
};

// Simple bridge preset: 60 m simply supported beam, 30 cells of 2 m,
// four 16/16/16/12 m sections, 0.5 s sampling.
inline RunConfig preset_sbm() {
  RunConfig c;
  c.preset = "sbm";
  c.study.section_lengths = {4, 8, 12, 16, 20, 24, 28};
  return c;
}

// Surrogate long-span preset: 705 m continuous beam on vertical springs,
// 141 cells of 5 m, fifteen 50 m sections (last 5 m), 1 s sampling.
inline RunConfig preset_cbm() {
  RunConfig c;
  c.preset = "cbm";
  c.bridge.n_cells = 141;
  c.bridge.cell_length_m = 5.0;
  c.bridge.v_max = 6;
  c.bridge.e_pa = 200e9;
  c.bridge.inertia_m4 = 5.0;
  c.bridge.density_kg_m3 = 7850.0;
  c.bridge.area_m2 = 1.72;
  c.bridge.n_elements = 282;
  c.bridge.response_model = "finite-element";
  c.bridge.spring_spacing_m = 15.0;
  c.bridge.spring_stiffness_n_per_m = 1e8;
  c.traffic.p_inject = 0.6;
  c.sections.section_length_m = 50.0;
  c.sections.target_section = 13;
  c.dataset.sample_dt_s = 1.0;
  c.study.section_lengths = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  return c;
}

inline RunConfig preset_by_name(const std::string& name) {
  if (name == "sbm") return preset_sbm();
  if (name == "cbm") return preset_cbm();
  throw ConfigError("unknown preset: " + name);
}

namespace detail {
template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace detail

// Builds a RunConfig from JSON: `preset` selects the baseline, every other
// present key overrides it.
inline RunConfig config_from_json(const json& j) {
  std::string preset = "sbm";
  detail::maybe(j, "preset", preset);
  RunConfig c = preset_by_name(preset);

  detail::maybe(j, "seed", c.seed);
  detail::maybe(j, "jobs", c.jobs);
  if (j.contains("bridge")) {
    const json& b = j.at("bridge");
    detail::maybe(b, "n_cells", c.bridge.n_cells);
    detail::maybe(b, "cell_length_m", c.bridge.cell_length_m);
    detail::maybe(b, "v_max", c.bridge.v_max);
    detail::maybe(b, "e_pa", c.bridge.e_pa);
    detail::maybe(b, "inertia_m4", c.bridge.inertia_m4);
    detail::maybe(b, "density_kg_m3", c.bridge.density_kg_m3);
    detail::maybe(b, "area_m2", c.bridge.area_m2);
    detail::maybe(b, "n_elements", c.bridge.n_elements);
    detail::maybe(b, "response_model", c.bridge.response_model);
    detail::maybe(b, "spring_spacing_m", c.bridge.spring_spacing_m);
    detail::maybe(b, "spring_stiffness_n_per_m",
                  c.bridge.spring_stiffness_n_per_m);
  }
  if (j.contains("traffic")) {
    const json& t = j.at("traffic");
    detail::maybe(t, "p_slow", c.traffic.p_slow);
    detail::maybe(t, "p_inject", c.traffic.p_inject);
    detail::maybe(t, "type_probs", c.traffic.type_probs);
    detail::maybe(t, "weight_cap_kg", c.traffic.weight_cap_kg);
  }
  if (j.contains("sections")) {
    const json& s = j.at("sections");
    detail::maybe(s, "section_length_m", c.sections.section_length_m);
    detail::maybe(s, "target_section", c.sections.target_section);
    detail::maybe(s, "overload_threshold_kg", c.sections.overload_threshold_kg);
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    detail::maybe(d, "n_instants", c.dataset.n_instants);
    detail::maybe(d, "l", c.dataset.l);
    detail::maybe(d, "sigma", c.dataset.sigma);
    detail::maybe(d, "sample_dt_s", c.dataset.sample_dt_s);
    detail::maybe(d, "train_ratio", c.dataset.train_ratio);
    detail::maybe(d, "val_ratio", c.dataset.val_ratio);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    detail::maybe(m, "approach", c.model.approach);
    detail::maybe(m, "c", c.model.c);
    detail::maybe(m, "s", c.model.s);
    detail::maybe(m, "k", c.model.k);
    detail::maybe(m, "lr", c.model.lr);
    detail::maybe(m, "batch_size", c.model.batch_size);
    detail::maybe(m, "epochs", c.model.epochs);
    detail::maybe(m, "threshold", c.model.threshold);
    detail::maybe(m, "threshold_search", c.model.threshold_search);
  }
  if (j.contains("study")) {
    const json& s = j.at("study");
    detail::maybe(s, "id", c.study.id);
    detail::maybe(s, "sigmas", c.study.sigmas);
    detail::maybe(s, "approaches", c.study.approaches);
    detail::maybe(s, "section_lengths", c.study.section_lengths);
    detail::maybe(s, "neighbor_section", c.study.neighbor_section);
  }
  return c;
}

// Deterministic per-run random seeds, keyed by what the run is.
inline std::uint64_t train_seed(const RunConfig& c, const std::string& approach,
                                int section, double sigma) {
  std::uint64_t s = derive_seed(c.seed, "train");
  s = derive_seed(s, approach);
  s = derive_seed(s, "section", static_cast<std::uint64_t>(section));
  s = derive_seed(s, "sigma",
                  static_cast<std::uint64_t>(std::llround(sigma * 1000.0)));
  return s;
}

inline std::uint64_t noise_seed(const RunConfig& c, double sigma) {
  return derive_seed(derive_seed(c.seed, "noise"),
                     "sigma",
                     static_cast<std::uint64_t>(std::llround(sigma * 1000.0)));
}

}  // namespace ovi
