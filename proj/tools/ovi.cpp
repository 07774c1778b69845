// Command-line front end: drives the traffic simulation, response synthesis,
// dataset assembly, training, evaluation and the study runners from a JSON
// config with preset inheritance. Command-line flags win over the config
// file. Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O
// failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "ovi/ovi.hpp"

namespace fs = std::filesystem;
using ovi::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma;
  std::optional<int> section;
  std::optional<std::string> preset;
  std::optional<int> jobs;
  std::string trajectory_path;  // defaults under out_dir
  std::string response_path;
  std::string dataset_prefix;
  std::string checkpoint_path;
  std::string study_id;
};

ovi::RunConfig load_run_config(const CliOptions& opt) {
  json j = json::object();
  if (!opt.config_path.empty()) {
    try {
      j = json::parse(ovi::read_text(opt.config_path));
    } catch (const ovi::IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw ovi::ConfigError("config parse error: " + std::string(e.what()));
    }
  }
  if (opt.preset) j["preset"] = *opt.preset;
  ovi::RunConfig c = ovi::config_from_json(j);
  if (opt.seed) c.seed = *opt.seed;
  if (opt.sigma) c.dataset.sigma = *opt.sigma;
  if (opt.section) c.sections.target_section = *opt.section;
  if (opt.jobs) c.jobs = *opt.jobs;
  if (!opt.study_id.empty()) c.study.id = opt.study_id;
  return c;
}

fs::path path_or_default(const std::string& given, const CliOptions& opt,
                         const char* name) {
  return given.empty() ? fs::path(opt.out_dir) / name : fs::path(given);
}

void write_json(const fs::path& path, const json& j) {
  ovi::atomic_write_text(path, j.dump(2) + "\n");
}

ovi::traffic::TrafficTrajectory read_trajectory(const CliOptions& opt) {
  const fs::path csv_path = path_or_default(opt.trajectory_path, opt, "trajectory.csv");
  fs::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  const json meta = json::parse(ovi::read_text(meta_path));
  return ovi::traffic::trajectory_from_csv(
      ovi::read_text(csv_path), meta.at("n_ticks").get<std::size_t>(),
      meta.at("n_cells").get<int>(), meta.at("cell_length_m").get<double>(),
      meta.at("tick_duration_s").get<double>());
}

ovi::beam::ResponseMatrix read_response(const CliOptions& opt) {
  const fs::path csv_path = path_or_default(opt.response_path, opt, "response.csv");
  fs::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  const json meta = json::parse(ovi::read_text(meta_path));
  return ovi::beam::response_from_csv(
      ovi::read_text(csv_path), meta.at("sample_dt_s").get<double>(),
      meta.at("sensor_positions_m").get<std::vector<double>>());
}

struct DatasetFiles {
  ovi::data::Dataset ds;
  json meta;
};

DatasetFiles read_dataset(const CliOptions& opt) {
  const fs::path csv_path =
      opt.dataset_prefix.empty() ? fs::path(opt.out_dir) / "dataset.csv"
                                 : fs::path(opt.dataset_prefix + ".csv");
  fs::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  DatasetFiles out;
  out.meta = json::parse(ovi::read_text(meta_path));
  out.ds = ovi::data::dataset_from_files(ovi::read_text(csv_path), out.meta);
  return out;
}

int cmd_simulate(const CliOptions& opt) {
  const auto c = load_run_config(opt);
  const auto params = c.ca_params();
  const std::size_t n_ticks = c.required_ticks();
  const auto traj = ovi::traffic::simulate(params, n_ticks);
  ovi::atomic_write_text(fs::path(opt.out_dir) / "trajectory.csv",
                         ovi::traffic::trajectory_to_csv(traj, c.digest()));
  json meta{{"n_ticks", n_ticks},
            {"n_cells", params.n_cells},
            {"cell_length_m", params.cell_length_m},
            {"tick_duration_s", traj.tick_duration_s},
            {"v_max", params.v_max},
            {"p_slow", params.p_slow},
            {"p_inject", params.p_inject},
            {"type_probs", params.type_probs},
            {"weight_cap_kg", params.weight_cap_kg},
            {"seed", params.seed},
            {"config_digest", c.digest()},
            {"data_digest", c.data_digest()}};
  write_json(fs::path(opt.out_dir) / "trajectory.meta.json", meta);
  std::cout << "simulate: " << n_ticks << " ticks -> " << opt.out_dir
            << "/trajectory.csv\n";
  return 0;
}

int cmd_synthesize(const CliOptions& opt) {
  const auto c = load_run_config(opt);
  const auto traj = read_trajectory(opt);
  const auto resp = ovi::beam::synthesize_response(
      traj, c.beam_model(), c.sensors(), c.dataset.sample_dt_s,
      c.dataset.n_instants, c.response_backend());
  ovi::atomic_write_text(fs::path(opt.out_dir) / "response.csv",
                         ovi::beam::response_to_csv(resp, c.digest()));
  json meta{{"preset", c.preset},
            {"response_model", c.bridge.response_model},
            {"quasi_static", true},
            {"gravity_m_s2", ovi::kGravity},
            {"inertia_m4", c.bridge.inertia_m4},
            {"n_elements", c.bridge.n_elements},
            {"sample_dt_s", resp.dt_s},
            {"n_instants", resp.n_rows()},
            {"sensor_positions_m", resp.sensor_positions_m},
            {"config_digest", c.digest()},
            {"data_digest", c.data_digest()}};
  write_json(fs::path(opt.out_dir) / "response.meta.json", meta);
  std::cout << "synthesize: " << resp.n_rows() << " instants x "
            << resp.n_sensors << " sensors -> " << opt.out_dir
            << "/response.csv\n";
  return 0;
}

int cmd_build_dataset(const CliOptions& opt) {
  const auto c = load_run_config(opt);
  const auto traj = read_trajectory(opt);
  const auto resp = read_response(opt);
  const auto sections = c.section_map();
  auto labels = ovi::data::labels_for_instants(
      traj, sections, resp.n_rows(), resp.dt_s);
  std::vector<std::string> warnings;
  auto ds = ovi::data::build_dataset(
      resp, std::move(labels), sections, c.dataset.l, c.dataset.sigma,
      ovi::noise_seed(c, c.dataset.sigma), c.dataset.train_ratio,
      c.dataset.val_ratio, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  ovi::atomic_write_text(fs::path(opt.out_dir) / "dataset.csv",
                         ovi::data::dataset_to_csv(ds, c.digest()));
  const json meta = ovi::data::dataset_meta_json(
      ds, json{{"preset", c.preset},
               {"response_model", c.bridge.response_model},
               {"threshold_kg", sections.overload_threshold_kg},
               {"seed", c.seed},
               {"noise_seed", ovi::noise_seed(c, c.dataset.sigma)},
               {"config_digest", c.digest()},
               {"data_digest", c.data_digest()}});
  write_json(fs::path(opt.out_dir) / "dataset.meta.json", meta);
  std::cout << "build-dataset: " << ds.n_samples() << " samples (l=" << ds.l
            << ", sigma=" << ds.sigma << ") -> " << opt.out_dir
            << "/dataset.csv\n";
  return 0;
}

int cmd_train(const CliOptions& opt) {
  const auto c = load_run_config(opt);
  auto files = read_dataset(opt);
  const std::string dataset_digest =
      files.meta.value("data_digest", std::string());
  if (dataset_digest != c.data_digest()) {
    throw ovi::ConfigError(
        "dataset was built from a different config (data digest mismatch)");
  }
  const auto cfg = c.dovi_config(ovi::train_seed(
      c, c.model.approach, c.sections.target_section, c.dataset.sigma));
  auto net =
      ovi::model::build_network(c.model.approach, files.ds.resp.n_sensors, cfg);
  const auto report = ovi::model::train(net, files.ds, cfg);

  const json ckpt = ovi::model::checkpoint_json(
      net, ovi::model::model_config_json(c.model.approach,
                                         files.ds.resp.n_sensors, cfg),
      report.threshold, dataset_digest);
  write_json(fs::path(opt.out_dir) / "checkpoint.json", ckpt);
  json report_json = report.to_json();
  report_json["approach"] = c.model.approach;
  report_json["config_digest"] = c.digest();
  write_json(fs::path(opt.out_dir) / "train_report.json", report_json);
  std::cout << "train: " << c.model.approach << " best_epoch="
            << report.best_epoch << " val_f1=" << report.val_f1
            << " threshold=" << report.threshold << "\n";
  return 0;
}

int cmd_evaluate(const CliOptions& opt) {
  const auto c = load_run_config(opt);
  auto files = read_dataset(opt);
  const fs::path ckpt_path =
      path_or_default(opt.checkpoint_path, opt, "checkpoint.json");
  auto ckpt = ovi::model::load_checkpoint(json::parse(ovi::read_text(ckpt_path)));
  const std::string dataset_digest =
      files.meta.value("data_digest", std::string());
  if (ckpt.data_digest != dataset_digest) {
    throw ovi::ConfigError(
        "checkpoint was trained on a different dataset (digest mismatch)");
  }
  const auto scores =
      ovi::model::score_range(ckpt.net, files.ds, files.ds.split.test);
  const auto metrics = ovi::model::metrics_at_threshold(
      scores, files.ds, files.ds.split.test, ckpt.threshold);
  json out{{"metrics", metrics.to_json()},
           {"threshold", ckpt.threshold},
           {"approach", ckpt.config.at("approach")},
           {"split", "test"},
           {"data_digest", dataset_digest},
           {"config_digest", c.digest()}};
  write_json(fs::path(opt.out_dir) / "metrics.json", out);
  std::cout << "evaluate: f1=" << metrics.f1 << " tp=" << metrics.tp
            << " fp=" << metrics.fp << " fn=" << metrics.fn
            << " tn=" << metrics.tn << "\n";
  return 0;
}

int cmd_study(const CliOptions& opt) {
  const auto c = load_run_config(opt);
  const std::string& id = c.study.id;
  const fs::path out_dir(opt.out_dir);

  if (id == "section-length") {
    const auto traj = ovi::traffic::simulate(c.ca_params(), c.required_ticks());
    const auto res = ovi::eval::section_length_study(c, traj);
    ovi::atomic_write_text(out_dir / "study_section-length.csv",
                           ovi::eval::section_length_to_csv(res, c.digest()));
    write_json(out_dir / "study_section-length.summary.json", res.summary);
    std::cout << "study section-length: " << res.rows.size() << " lengths\n";
    return 0;
  }

  const auto art = ovi::eval::build_artifacts(c);
  if (id == "sections" || id == "noise") {
    const auto res = id == "sections" ? ovi::eval::section_study(c, art)
                                      : ovi::eval::noise_sweep(c, art);
    ovi::atomic_write_text(out_dir / ("study_" + id + ".csv"),
                           ovi::eval::study_to_csv(res, c.digest()));
    write_json(out_dir / ("study_" + id + ".summary.json"), res.summary);
    std::cout << "study " << id << ": " << res.rows.size() << " rows\n";
    return 0;
  }

  if (id == "neighbor-fp" || id == "weight-fp") {
    const int target = c.sections.target_section;
    const auto ds = ovi::eval::make_dataset(c, art, target, c.dataset.sigma);
    const auto run = ovi::eval::train_and_eval(c, ds, c.model.approach, target,
                                               c.dataset.sigma);
    ovi::eval::FpStudy fp;
    double axis = 0.0;
    if (id == "neighbor-fp") {
      const int neighbor = c.study.neighbor_section >= 0
                               ? c.study.neighbor_section
                               : target - 1;
      fp = ovi::eval::neighbor_fp_study(run.test_scores, run.report.threshold,
                                        ds, art.traj, neighbor);
      axis = neighbor;
    } else {
      fp = ovi::eval::total_weight_fp_study(run.test_scores,
                                            run.report.threshold, ds, art.traj);
      axis = ds.sections.overload_threshold_kg;
    }
    ovi::atomic_write_text(
        out_dir / ("study_" + id + ".csv"),
        ovi::eval::fp_study_to_csv(fp, c.model.approach, axis, c.digest()));
    json summary{{"study", id},
                 {"preset", c.preset},
                 {"seed", c.seed},
                 {"config_digest", c.digest()},
                 {"approach", c.model.approach},
                 {"target_section", target},
                 {"test_f1", run.test_metrics.f1},
                 {"threshold", run.report.threshold},
                 {"result", fp.to_json()}};
    write_json(out_dir / ("study_" + id + ".summary.json"), summary);
    std::cout << "study " << id << ": cases=" << fp.cases
              << " fp=" << fp.false_positives << "\n";
    return 0;
  }

  throw ovi::ConfigError("unknown study id: " + id);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overloaded-vehicle identification lab"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--config,-c", opt.config_path, "JSON config file");
  app.add_option("--out,-o", opt.out_dir, "output directory");
  app.add_option("--seed", opt.seed, "master random seed");
  app.add_option("--sigma", opt.sigma, "noise standard deviation");
  app.add_option("--section", opt.section, "target girder section index");
  app.add_option("--preset", opt.preset, "bridge preset")
      ->check(CLI::IsMember({"sbm", "cbm"}));
  app.add_option("--jobs", opt.jobs, "worker pool size for studies");

  auto* sim = app.add_subcommand("simulate", "run the traffic simulation");
  auto* synth = app.add_subcommand("synthesize", "compute sensor responses");
  synth->add_option("--trajectory", opt.trajectory_path, "trajectory CSV path");
  auto* build = app.add_subcommand("build-dataset", "assemble labeled samples");
  build->add_option("--trajectory", opt.trajectory_path, "trajectory CSV path");
  build->add_option("--response", opt.response_path, "response CSV path");
  auto* train = app.add_subcommand("train", "train the configured approach");
  train->add_option("--dataset", opt.dataset_prefix, "dataset path prefix");
  auto* evaluate = app.add_subcommand("evaluate", "test-split metrics");
  evaluate->add_option("--dataset", opt.dataset_prefix, "dataset path prefix");
  evaluate->add_option("--checkpoint", opt.checkpoint_path, "checkpoint path");
  auto* study = app.add_subcommand("study", "run a study");
  study->add_option(
      "id", opt.study_id,
      "study id: sections|noise|neighbor-fp|weight-fp|section-length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(opt);
    if (synth->parsed()) return cmd_synthesize(opt);
    if (build->parsed()) return cmd_build_dataset(opt);
    if (train->parsed()) return cmd_train(opt);
    if (evaluate->parsed()) return cmd_evaluate(opt);
    if (study->parsed()) return cmd_study(opt);
  } catch (const ovi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ovi::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ovi::IoError& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
