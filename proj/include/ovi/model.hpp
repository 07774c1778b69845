#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "ovi/common.hpp"
#include "ovi/metrics.hpp"
#include "ovi/nn.hpp"
#include "ovi/pipeline.hpp"

namespace ovi::model {

using json = nlohmann::json;

struct DoviConfig {
  int l = 8;            // sequence length
  int c = 3;            // stacked temporal layers
  int s = 3;            // filter size
  int k = 64;           // filter count
  double lr = 0.002;
  int batch_size = 128;
  int epochs = 50;
  double threshold = 0.5;
  bool threshold_search = true;
  std::uint64_t seed = 42;

  void validate() const {
    require(l >= s && s >= 1, "need l >= s >= 1");
    require(k >= 1 && c >= 1, "need k >= 1 and c >= 1");
    require(threshold > 0.0 && threshold < 1.0, "threshold outside (0,1)");
    require(batch_size >= 1 && epochs >= 0, "bad batch size or epoch count");
    require(lr > 0.0, "learning rate must be positive");
  }
};

// Pointwise feature mapping -> c causal temporal layers -> sigmoid head on
// the last time step.
inline nn::Network build_dovi(std::size_t n_sensors, const DoviConfig& cfg) {
  cfg.validate();
  nn::Network net;
  const auto k = static_cast<std::size_t>(cfg.k);
  net.add(std::make_unique<nn::CausalConv>("feature", n_sensors, k, 1,
                                           nn::Activation::kReLU));
  for (int i = 0; i < cfg.c; ++i) {
    net.add(std::make_unique<nn::CausalConv>(
        "temporal" + std::to_string(i + 1), k, k,
        static_cast<std::size_t>(cfg.s), nn::Activation::kReLU));
  }
  net.add(std::make_unique<nn::SigmoidHead>("head", k));
  return net;
}

// Logistic regression on the flattened window.
inline nn::Network build_lr(std::size_t n_sensors, const DoviConfig& cfg) {
  cfg.validate();
  nn::Network net;
  net.add(std::make_unique<nn::Flatten>());
  net.add(std::make_unique<nn::SigmoidHead>(
      "head", static_cast<std::size_t>(cfg.l) * n_sensors));
  return net;
}

// Two hidden ReLU layers (64, 64) on the flattened window.
inline nn::Network build_mlp(std::size_t n_sensors, const DoviConfig& cfg) {
  cfg.validate();
  nn::Network net;
  net.add(std::make_unique<nn::Flatten>());
  net.add(std::make_unique<nn::CausalConv>(
      "hidden1", static_cast<std::size_t>(cfg.l) * n_sensors, 64, 1,
      nn::Activation::kReLU));
  net.add(std::make_unique<nn::CausalConv>("hidden2", 64, 64, 1,
                                           nn::Activation::kReLU));
  net.add(std::make_unique<nn::SigmoidHead>("head", 64));
  return net;
}

inline nn::Network build_network(const std::string& approach,
                                 std::size_t n_sensors, const DoviConfig& cfg) {
  if (approach == "dovi") return build_dovi(n_sensors, cfg);
  if (approach == "lr") return build_lr(n_sensors, cfg);
  if (approach == "mlp") return build_mlp(n_sensors, cfg);
  throw ConfigError("unknown approach: " + approach);
}

inline int predict_label(double score, double threshold) {
  return score > threshold ? 1 : 0;  // strictly larger
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double threshold = 0.5;
  double val_f1 = 0.0;
  double wall_seconds = 0.0;

  json to_json() const {
    json ep = json::array();
    for (const auto& e : epochs) {
      ep.push_back({{"train_loss", e.train_loss}, {"val_f1", e.val_f1}});
    }
    return json{{"epochs", ep},
                {"best_epoch", best_epoch},
                {"threshold", threshold},
                {"f1_val", val_f1},
                {"wall_seconds", wall_seconds}};
  }
};

// Batched scores over a contiguous sample range.
inline std::vector<double> score_range(nn::Network& net,
                                       const data::Dataset& ds,
                                       const data::SplitRange& range,
                                       int batch_size = 512) {
  const std::size_t n_feat = ds.resp.n_sensors;
  const auto l = static_cast<std::size_t>(ds.l);
  std::vector<double> scores;
  scores.reserve(range.size());
  for (std::size_t begin = range.begin; begin < range.end;
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t b =
        std::min(static_cast<std::size_t>(batch_size), range.end - begin);
    nn::Tensor x = nn::Tensor::zeros({b, l, n_feat});
    for (std::size_t i = 0; i < b; ++i) {
      ds.fill_window(begin + i, x.data.data() + i * l * n_feat);
    }
    const nn::Tensor s = net.forward(x);
    scores.insert(scores.end(), s.data.begin(), s.data.end());
  }
  return scores;
}

inline eval::Metrics metrics_at_threshold(const std::vector<double>& scores,
                                          const data::Dataset& ds,
                                          const data::SplitRange& range,
                                          double threshold) {
  std::vector<int> preds(scores.size()), labels(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    preds[i] = predict_label(scores[i], threshold);
    labels[i] = ds.sample_label(range.begin + i);
  }
  return eval::prf1(preds, labels);
}

// Mini-batch Adam on BCE. Epoch order is reshuffled deterministically from
// the run seed; after each epoch the validation F1 at the configured
// threshold decides the retained parameter snapshot. The test split is never
// touched here.
inline TrainReport train(nn::Network& net, const data::Dataset& ds,
                         const DoviConfig& cfg) {
  cfg.validate();
  require(ds.split.train.size() >= 1 && ds.split.val.size() >= 1,
          "training needs nonempty train and validation splits");
  const auto t0 = std::chrono::steady_clock::now();
  nn::init_params(net, derive_seed(cfg.seed, "init"));

  TrainReport report;
  report.threshold = cfg.threshold;
  if (cfg.epochs == 0) {
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return report;
  }

  const std::size_t n_train = ds.split.train.size();
  const std::size_t n_feat = ds.resp.n_sensors;
  const auto l = static_cast<std::size_t>(ds.l);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = ds.split.train.begin + i;

  std::vector<nn::Tensor> best;
  double best_f1 = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(
        derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n_train - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng() % (i + 1);
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n_train; begin += bs) {
      const std::size_t b = std::min(bs, n_train - begin);
      nn::Tensor x = nn::Tensor::zeros({b, l, n_feat});
      std::vector<double> targets(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t sample = order[begin + i];
        ds.fill_window(sample, x.data.data() + i * l * n_feat);
        targets[i] = static_cast<double>(ds.sample_label(sample));
      }
      const double loss = net.train_step(x, targets);
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
      }
      nn::adam_step(net.store(), cfg.lr);
      loss_sum += loss;
      ++batches;
    }

    const auto val_scores = score_range(net, ds, ds.split.val);
    const auto val_metrics =
        metrics_at_threshold(val_scores, ds, ds.split.val, cfg.threshold);
    report.epochs.push_back(
        {loss_sum / static_cast<double>(batches), val_metrics.f1});
    if (val_metrics.f1 > best_f1) {
      best_f1 = val_metrics.f1;
      best = net.snapshot();
      report.best_epoch = epoch;
    }
  }
  net.restore(best);
  report.val_f1 = best_f1;

  if (cfg.threshold_search) {
    const auto val_scores = score_range(net, ds, ds.split.val);
    double best_thr = cfg.threshold;
    double best_thr_f1 = -1.0;
    for (int i = 1; i <= 9; ++i) {
      const double thr = 0.1 * i;
      const double f1 =
          metrics_at_threshold(val_scores, ds, ds.split.val, thr).f1;
      if (f1 > best_thr_f1) {
        best_thr_f1 = f1;
        best_thr = thr;
      }
    }
    report.threshold = best_thr;
    report.val_f1 = best_thr_f1;
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline json model_config_json(const std::string& approach,
                              std::size_t n_sensors, const DoviConfig& cfg) {
  return json{{"approach", approach}, {"n_sensors", n_sensors},
              {"l", cfg.l},           {"c", cfg.c},
              {"s", cfg.s},           {"k", cfg.k},
              {"lr", cfg.lr},         {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs}, {"seed", cfg.seed}};
}

inline json checkpoint_json(const nn::Network& net, const json& config,
                            double threshold, const std::string& data_digest) {
  json params = json::object();
  for (const nn::Param* p : net.params()) {
    params[p->name] = json{{"shape", p->value.shape},
                           {"values", p->value.data}};
  }
  return json{{"version", 1},
              {"config", config},
              {"threshold", threshold},
              {"data_digest", data_digest},
              {"parameters", params}};
}

struct LoadedCheckpoint {
  nn::Network net;
  json config;
  double threshold = 0.5;
  std::string data_digest;
};

inline LoadedCheckpoint load_checkpoint(const json& j) {
  require(j.at("version").get<int>() == 1, "unsupported checkpoint version");
  const json& config = j.at("config");
  DoviConfig cfg;
  cfg.l = config.at("l").get<int>();
  cfg.c = config.at("c").get<int>();
  cfg.s = config.at("s").get<int>();
  cfg.k = config.at("k").get<int>();
  cfg.lr = config.at("lr").get<double>();
  cfg.batch_size = config.at("batch_size").get<int>();
  cfg.epochs = config.at("epochs").get<int>();
  cfg.seed = config.at("seed").get<std::uint64_t>();

  LoadedCheckpoint out;
  out.config = config;
  out.threshold = j.at("threshold").get<double>();
  out.data_digest = j.at("data_digest").get<std::string>();
  out.net = build_network(config.at("approach").get<std::string>(),
                          config.at("n_sensors").get<std::size_t>(), cfg);

  const json& params = j.at("parameters");
  for (nn::Param* p : out.net.params()) {
    require(params.contains(p->name),
            "checkpoint missing parameter '" + p->name + "'");
    const json& pj = params.at(p->name);
    const auto shape = pj.at("shape").get<std::vector<std::size_t>>();
    require(shape == p->value.shape,
            "checkpoint shape mismatch for '" + p->name + "'");
    p->value.data = pj.at("values").get<std::vector<double>>();
    require(p->value.data.size() == p->value.numel(),
            "checkpoint value count mismatch for '" + p->name + "'");
  }
  return out;
}

}  // namespace ovi::model
