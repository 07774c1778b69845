// Acceptance suite: every criterion runs at its stated tolerance and prints
// one pass/fail line. Exit code is the number of failed criteria.
//
//   acceptance [--only N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "ovi/ovi.hpp"

namespace fs = std::filesystem;
using namespace ovi;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Harness {
  int failures = 0;
  int only = 0;

  bool enabled(int id) const { return only == 0 || only == id; }

  void report(int id, const std::string& name, bool ok,
              const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", id,
                name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

// --------------------------------------------------------------------------
// 1. Structural oracle
// --------------------------------------------------------------------------

void criterion1(Harness& h) {
  const auto t0 = Clock::now();
  const double p = 294300.0;
  const double ei = 33e9 * 0.28;
  const double closed = std::abs(beam::ss_influence(30.0, 30.0, p, 60.0, ei));

  std::vector<double> errs;
  for (int n : {4, 8, 16, 32, 64}) {
    beam::BeamModel m =
        beam::make_simply_supported(60.0, 33e9, 0.28, 2600.0, 0.94, n);
    beam::StaticBeamSolver solver(m);
    const auto u = solver.solve({{30.0, p}});
    const double w = std::abs(solver.deflection_at(u, 30.0));
    errs.push_back(std::abs(w - closed) / closed);
  }
  const double wall = seconds_since(t0);

  const bool match = errs.back() < 1e-8;
  // Hermite elements are nodally exact for a node-coincident point load, so
  // the error sequence sits at rounding level; monotonicity is asserted
  // above a 1e-12 floor.
  bool monotone = true;
  for (std::size_t i = 1; i < errs.size(); ++i) {
    if (errs[i] > std::max(errs[i - 1], 1e-12)) monotone = false;
  }
  const bool fast = wall < 1.0;
  std::string detail = "errors(4..64)=";
  for (double e : errs) detail += fmt(e, 2) + " ";
  detail += "match<1e-8=" + std::string(match ? "yes" : "no") +
            ", monotone(floor 1e-12)=" + (monotone ? "yes" : "no") +
            ", wall=" + fmt(wall, 3) + "s";
  h.report(1, "FE static solve matches PL^3/48EI with monotone refinement",
           match && monotone && fast, detail);
}

// --------------------------------------------------------------------------
// 2. Gradient correctness
// --------------------------------------------------------------------------

nn::Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  nn::Tensor t = nn::Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (double& v : t.data) v = uni(rng);
  return t;
}

double fd_max_rel_error(nn::Network& net, const nn::Tensor& x,
                        const std::vector<double>& targets) {
  const double hstep = 1e-5;
  net.train_step(x, targets);
  std::vector<std::vector<double>> analytic;
  for (nn::Param* p : net.params()) analytic.push_back(p->grad.data);
  double worst = 0.0;
  std::size_t pi = 0;
  for (nn::Param* p : net.params()) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double orig = p->value.data[i];
      p->value.data[i] = orig + hstep;
      const double lp = nn::bce_loss(net.forward(x).data, targets);
      p->value.data[i] = orig - hstep;
      const double lm = nn::bce_loss(net.forward(x).data, targets);
      p->value.data[i] = orig;
      const double fd = (lp - lm) / (2.0 * hstep);
      const double ref =
          std::max({std::abs(fd), std::abs(analytic[pi][i]), 1e-6});
      worst = std::max(worst, std::abs(fd - analytic[pi][i]) / ref);
    }
    ++pi;
  }
  return worst;
}

void criterion2(Harness& h) {
  const auto t0 = Clock::now();
  Rng rng(20240901);
  double worst = 0.0;

  {  // head alone
    nn::Network net;
    net.add(std::make_unique<nn::SigmoidHead>("head", 8));
    nn::init_params(net, 1);
    worst = std::max(worst, fd_max_rel_error(net, random_tensor({4, 8, 8}, rng),
                                             {1.0, 0.0, 1.0, 0.0}));
  }
  {  // feature mapping layer
    nn::Network net;
    net.add(std::make_unique<nn::CausalConv>("feature", 4, 8, 1,
                                             nn::Activation::kReLU));
    net.add(std::make_unique<nn::SigmoidHead>("head", 8));
    nn::init_params(net, 2);
    worst = std::max(worst, fd_max_rel_error(net, random_tensor({4, 8, 4}, rng),
                                             {0.0, 1.0, 0.0, 1.0}));
  }
  {  // temporal layer
    nn::Network net;
    net.add(std::make_unique<nn::CausalConv>("temporal", 8, 8, 3,
                                             nn::Activation::kReLU));
    net.add(std::make_unique<nn::SigmoidHead>("head", 8));
    nn::init_params(net, 3);
    worst = std::max(worst, fd_max_rel_error(net, random_tensor({4, 8, 8}, rng),
                                             {1.0, 1.0, 0.0, 0.0}));
  }
  {  // full model: l=8, n=4, k=8, c=3, s=3
    model::DoviConfig cfg;
    cfg.k = 8;
    auto net = model::build_dovi(4, cfg);
    nn::init_params(net, 4);
    worst = std::max(worst, fd_max_rel_error(net, random_tensor({4, 8, 4}, rng),
                                             {1.0, 0.0, 0.0, 1.0}));
  }
  const double wall = seconds_since(t0);
  h.report(2, "finite-difference gradient checks (h=1e-5)",
           worst < 1e-4 && wall < 30.0,
           "max_rel_err=" + fmt(worst, 3) + ", wall=" + fmt(wall, 2) + "s");
}

// --------------------------------------------------------------------------
// 3. Causality
// --------------------------------------------------------------------------

void criterion3(Harness& h) {
  Rng rng(555);
  const std::size_t l = 8, k = 8, s = 3;
  const nn::Tensor w = random_tensor({k, s * k}, rng);
  const nn::Tensor b = random_tensor({k}, rng);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  bool exact = true;
  for (int trial = 0; trial < 100 && exact; ++trial) {
    nn::Tensor x = random_tensor({l, k}, rng);
    const nn::Tensor base = nn::conv1d_causal(x, w, b, s);
    const std::size_t cut = 1 + rng() % (l - 1);
    nn::Tensor pert = x;
    for (std::size_t t = cut; t < l; ++t) {
      for (std::size_t i = 0; i < k; ++i) pert.data[t * k + i] = uni(rng);
    }
    const nn::Tensor after = nn::conv1d_causal(pert, w, b, s);
    for (std::size_t t = 0; t < cut && exact; ++t) {
      for (std::size_t i = 0; i < k; ++i) {
        if (after.data[t * k + i] != base.data[t * k + i]) exact = false;
      }
    }
  }
  h.report(3, "suffix perturbation leaves prefix outputs bitwise unchanged",
           exact, exact ? "100/100 random inputs exact" : "prefix leaked");
}

// --------------------------------------------------------------------------
// 4. Sampler fidelity
// --------------------------------------------------------------------------

void criterion4(Harness& h) {
  const auto t0 = Clock::now();
  const double inf = std::numeric_limits<double>::infinity();
  double worst_ks = 0.0;
  for (const auto& spec : traffic::default_type_specs()) {
    Rng rng(777 + spec.type_id);
    std::vector<double> samples(100000);
    for (auto& x : samples) {
      x = traffic::sample_vehicle_weight(spec, inf, rng);
    }
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double f = spec.cdf(samples[i]);
      d = std::max(d, std::abs(f - static_cast<double>(i) / n));
      d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    worst_ks = std::max(worst_ks, d);
  }

  const auto type1 = traffic::default_type_specs()[0];
  Rng rng(991);
  double sum = 0.0;
  const int n_mean = 100000;
  for (int i = 0; i < n_mean; ++i) {
    sum += traffic::sample_vehicle_weight(type1, inf, rng);
  }
  const double analytic = type1.mixture_mean();
  const double mean_rel = std::abs(sum / n_mean - analytic) / analytic;
  const double wall = seconds_since(t0);
  h.report(4, "lognormal mixture sampler KS and mean fidelity",
           worst_ks < 0.01 && mean_rel < 0.02 && wall < 10.0,
           "worst_ks=" + fmt(worst_ks, 3) + ", type1_mean_rel=" +
               fmt(mean_rel, 3) + ", wall=" + fmt(wall, 2) + "s");
}

// --------------------------------------------------------------------------
// 5. Pipeline counts
// --------------------------------------------------------------------------

void criterion5(Harness& h) {
  beam::ResponseMatrix r;
  r.n_sensors = 4;
  r.dt_s = 0.5;
  r.sensor_positions_m = {8, 24, 40, 54};
  r.values.assign(100000 * 4, 0.0);
  std::vector<std::uint8_t> labels(100000, 0);
  const auto samples = data::slice(r, labels, 8);
  const auto split = data::SplitSpec::from_ratios(100000, 8);
  const bool ok = samples.size() == 99993 && split.train.size() == 60000 &&
                  split.val.size() == 20000 && split.test.size() == 19993;
  h.report(5, "100k instants -> 99,993 samples split 60,000/20,000/19,993", ok,
           "samples=" + std::to_string(samples.size()) + ", split=" +
               std::to_string(split.train.size()) + "/" +
               std::to_string(split.val.size()) + "/" +
               std::to_string(split.test.size()));
}

// --------------------------------------------------------------------------
// 6. End-to-end learning on the simple bridge
// --------------------------------------------------------------------------

void criterion6(Harness& h) {
  const auto t0 = Clock::now();
  RunConfig c = preset_sbm();
  c.study.approaches = {"dovi", "lr"};
  std::cerr << "criterion 6: building SBM artifacts...\n";
  const auto art = eval::build_artifacts(c);
  std::cerr << "criterion 6: running section study (8 trainings)...\n";
  const auto res = eval::section_study(c, art);

  std::map<int, double> dovi_f1, lr_f1;
  for (const auto& row : res.rows) {
    if (row.approach == "dovi") dovi_f1[static_cast<int>(row.axis)] = row.metrics.f1;
    if (row.approach == "lr") lr_f1[static_cast<int>(row.axis)] = row.metrics.f1;
  }
  double best = 0.0;
  bool margin = true;
  std::string detail;
  for (const auto& [section, f1] : dovi_f1) {
    best = std::max(best, f1);
    if (f1 < lr_f1[section] + 0.02) margin = false;
    detail += "s" + std::to_string(section) + ": dovi=" + fmt(f1, 3) +
              "/lr=" + fmt(lr_f1[section], 3) + " ";
  }
  const double wall = seconds_since(t0);
  detail += "best=" + fmt(best, 3) + ", wall=" + fmt(wall / 60.0, 3) + "min";
  h.report(6, "SBM: best-section F1 >= 0.75 and DOVI >= LR + 0.02 everywhere",
           best >= 0.75 && margin && wall <= 1800.0, detail);
}

// --------------------------------------------------------------------------
// 7 + 8. Long-span noise robustness and multi-vehicle behavior
// --------------------------------------------------------------------------

void criteria78(Harness& h) {
  RunConfig c = preset_cbm();
  c.study.approaches = {"dovi", "lr"};
  std::cerr << "criterion 7: building CBM artifacts...\n";
  const auto art = eval::build_artifacts(c);

  if (h.enabled(7)) {
    const auto t0 = Clock::now();
    std::cerr << "criterion 7: running noise sweep (12 trainings)...\n";
    const auto res = eval::noise_sweep(c, art);
    std::map<double, double> dovi_f1, lr_f1;
    for (const auto& row : res.rows) {
      if (row.approach == "dovi") dovi_f1[row.axis] = row.metrics.f1;
      if (row.approach == "lr") lr_f1[row.axis] = row.metrics.f1;
    }
    bool nonincreasing = true;
    double prev = 2.0;
    std::string detail;
    for (const auto& [sigma, f1] : dovi_f1) {
      if (f1 > prev + 0.02) nonincreasing = false;
      prev = f1;
      detail += "s=" + fmt(sigma, 2) + ": dovi=" + fmt(f1, 3) +
                "/lr=" + fmt(lr_f1[sigma], 3) + " ";
    }
    bool beats_lr = true;
    for (double sigma : {0.0, 0.1, 0.2}) {
      if (dovi_f1[sigma] < lr_f1[sigma]) beats_lr = false;
    }
    const double wall = seconds_since(t0);
    detail += "wall=" + fmt(wall / 60.0, 3) + "min";
    h.report(7,
             "CBM section 14: F1 nonincreasing in sigma (0.02 slack), DOVI >= "
             "LR at sigma <= 0.2",
             nonincreasing && beats_lr && wall <= 7200.0, detail);
  }

  if (h.enabled(8)) {
    std::cerr << "criterion 8: training noise-free CBM model...\n";
    const int target = c.sections.target_section;
    const auto ds = eval::make_dataset(c, art, target, 0.0);
    const auto run = eval::train_and_eval(c, ds, "dovi", target, 0.0);
    const auto neighbor = eval::neighbor_fp_study(
        run.test_scores, run.report.threshold, ds, art.traj, target - 1);
    const auto weight = eval::total_weight_fp_study(
        run.test_scores, run.report.threshold, ds, art.traj);
    const bool neighbor_ok =
        neighbor.cases > 0 && neighbor.rate && *neighbor.rate <= 0.10;
    const bool weight_ok =
        weight.cases > 0 && weight.rate && *weight.rate <= 0.15;
    std::string detail =
        "neighbor: " + std::to_string(neighbor.false_positives) + "/" +
        std::to_string(neighbor.cases) + " (" +
        (neighbor.rate ? fmt(*neighbor.rate * 100.0, 3) + "%" : "n/a") +
        "), total-weight: " + std::to_string(weight.false_positives) + "/" +
        std::to_string(weight.cases) + " (" +
        (weight.rate ? fmt(*weight.rate * 100.0, 3) + "%" : "n/a") +
        "), test_f1=" + fmt(run.test_metrics.f1, 3);
    h.report(8,
             "CBM multi-vehicle: light-total FP <= 15%, neighbor-overload FP "
             "<= 10%",
             neighbor_ok && weight_ok, detail);
  }
}

// --------------------------------------------------------------------------
// 9. Determinism through the CLI
// --------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(OVI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

void criterion9(Harness& h) {
  const auto t0 = Clock::now();
  const fs::path dir =
      fs::temp_directory_path() /
      ("ovi_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const json cfg_json{
      {"preset", "sbm"},
      {"seed", 7},
      {"dataset", {{"n_instants", 4000}, {"l", 8}}},
      {"model", {{"k", 16}, {"c", 2}, {"epochs", 3}, {"batch_size", 64}}}};
  const fs::path cfg = dir / "config.json";
  atomic_write_text(cfg, cfg_json.dump(2));

  bool ran = true;
  for (const char* out : {"a", "b"}) {
    const std::string base =
        "--config " + cfg.string() + " --out " + (dir / out).string();
    for (const char* sub :
         {"simulate", "synthesize", "build-dataset", "train", "evaluate"}) {
      if (run_cli(base + " " + sub) != 0) ran = false;
    }
  }
  bool identical = ran;
  std::string mismatch;
  if (ran) {
    for (const char* name : {"dataset.csv", "dataset.meta.json",
                             "checkpoint.json", "metrics.json"}) {
      if (read_text(dir / "a" / name) != read_text(dir / "b" / name)) {
        identical = false;
        mismatch += std::string(name) + " ";
      }
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  const double wall = seconds_since(t0);
  h.report(9, "same RunConfig twice -> byte-identical dataset/checkpoint/metrics",
           ran && identical,
           ran ? (identical ? "all artifacts byte-identical, wall=" +
                                  fmt(wall, 2) + "s"
                            : "mismatch in: " + mismatch)
               : "pipeline run failed");
}

}  // namespace

int main(int argc, char** argv) {
  Harness h;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) {
      h.only = std::atoi(argv[i + 1]);
    }
  }

  try {
    if (h.enabled(1)) criterion1(h);
    if (h.enabled(2)) criterion2(h);
    if (h.enabled(3)) criterion3(h);
    if (h.enabled(4)) criterion4(h);
    if (h.enabled(5)) criterion5(h);
    if (h.enabled(6)) criterion6(h);
    if (h.enabled(7) || h.enabled(8)) criteria78(h);
    if (h.enabled(9)) criterion9(h);
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 99;
  }

  std::printf("%s: %d criterion(s) failed\n",
              h.failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              h.failures);
  return h.failures;
}
