#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "distrank/kernels.hpp"
#include "distrank/letor.hpp"
#include "distrank/metrics.hpp"
#include "distrank/train.hpp"

namespace distrank {

struct dataset_config {
  std::string path;
  std::vector<int> folds = {1, 2, 3, 4, 5};
  int num_grades = 0;  // 0: infer from the data
  bool prenormalized = false;
  bool log_sign_features = false;
  std::size_t list_cap = 150;
  std::string dists;  // judgment-distribution sidecar, optional
};

struct model_config {
  std::size_t heads = 2;
  std::size_t expansion = 3;
  std::size_t hidden = 32;
};

struct training_config {
  std::size_t max_epochs = 100;
  std::size_t patience = 20;
  std::size_t batch_lists = 1;
  std::uint64_t seed = 7;
  std::string sampling = "none";  // none | once | per-epoch
  int sampling_n = 32;
};

struct eval_config {
  std::vector<std::size_t> cutoffs = {1, 3, 5};
  std::string gain = "exp";  // exp | linear
};

struct experiment_config {
  std::string name = "run";
  dataset_config dataset;
  std::string loss = "approx-ndcg";
  loss_config loss_cfg;
  model_config model;
  optimizer_options optimizer;
  training_config training;
  eval_config eval;
  std::string output_dir = "runs";

  void validate() const {
    loss_cfg.validate();
    const loss_spec& spec = loss_by_name(loss);
    if (spec.needs_dists && dataset.dists.empty())
      throw std::invalid_argument("loss '" + loss +
                                  "' needs a judgment-distribution sidecar (dataset.dists)");
    if (dataset.path.empty()) throw std::invalid_argument("dataset.path is required");
    if (dataset.folds.empty()) throw std::invalid_argument("dataset.folds must be non-empty");
    sampling_mode_from_string(training.sampling);
    gain_from_string(eval.gain);
    if (training.batch_lists < 1)
      throw std::invalid_argument("training.batch_lists must be >= 1");
  }

  parse_options parse_opts() const {
    parse_options o;
    o.num_grades = dataset.num_grades;
    o.labels_prenormalized = dataset.prenormalized;
    o.log_sign_features = dataset.log_sign_features;
    o.list_cap = dataset.list_cap;
    return o;
  }

  train_options train_opts() const {
    train_options o;
    o.loss = loss;
    o.loss_cfg = loss_cfg;
    o.opt = optimizer;
    o.max_epochs = training.max_epochs;
    o.patience = training.patience;
    o.batch_lists = training.batch_lists;
    o.seed = training.seed;
    o.sampling = sampling_mode_from_string(training.sampling);
    o.sampling_n = training.sampling_n;
    o.gain = gain_from_string(eval.gain);
    return o;
  }

  eval_options eval_opts(int num_grades) const {
    eval_options o;
    o.cutoffs = eval.cutoffs;
    o.gain = gain_from_string(eval.gain);
    o.rel_threshold = loss_cfg.rel_threshold;
    o.g_max = std::max(1, num_grades - 1);
    return o;
  }
};

// ------------------------------- JSON --------------------------------------

inline void to_json(nlohmann::json& j, const dataset_config& c) {
  j = {{"path", c.path},         {"folds", c.folds},
       {"num_grades", c.num_grades}, {"prenormalized", c.prenormalized},
       {"log_sign_features", c.log_sign_features}, {"list_cap", c.list_cap},
       {"dists", c.dists}};
}
inline void from_json(const nlohmann::json& j, dataset_config& c) {
  c.path = j.value("path", c.path);
  c.folds = j.value("folds", c.folds);
  c.num_grades = j.value("num_grades", c.num_grades);
  c.prenormalized = j.value("prenormalized", c.prenormalized);
  c.log_sign_features = j.value("log_sign_features", c.log_sign_features);
  c.list_cap = j.value("list_cap", c.list_cap);
  c.dists = j.value("dists", c.dists);
}

inline void to_json(nlohmann::json& j, const loss_config& c) {
  j = {{"n", c.n},       {"m", c.m},           {"sigma", c.sigma},
       {"alpha", c.alpha}, {"beta", c.beta},   {"rel_threshold", c.rel_threshold},
       {"eps", c.eps},   {"weights_per_batch", c.weights_per_batch}};
}
inline void from_json(const nlohmann::json& j, loss_config& c) {
  c.n = j.value("n", c.n);
  c.m = j.value("m", c.m);
  c.sigma = j.value("sigma", c.sigma);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.rel_threshold = j.value("rel_threshold", c.rel_threshold);
  c.eps = j.value("eps", c.eps);
  c.weights_per_batch = j.value("weights_per_batch", c.weights_per_batch);
}

inline void to_json(nlohmann::json& j, const model_config& c) {
  j = {{"heads", c.heads}, {"expansion", c.expansion}, {"hidden", c.hidden}};
}
inline void from_json(const nlohmann::json& j, model_config& c) {
  c.heads = j.value("heads", c.heads);
  c.expansion = j.value("expansion", c.expansion);
  c.hidden = j.value("hidden", c.hidden);
}

inline void to_json(nlohmann::json& j, const optimizer_options& c) {
  j = {{"kind", c.kind}, {"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}
inline void from_json(const nlohmann::json& j, optimizer_options& c) {
  c.kind = j.value("kind", c.kind);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
}

inline void to_json(nlohmann::json& j, const training_config& c) {
  j = {{"max_epochs", c.max_epochs}, {"patience", c.patience},
       {"batch_lists", c.batch_lists}, {"seed", c.seed},
       {"sampling", c.sampling},     {"sampling_n", c.sampling_n}};
}
inline void from_json(const nlohmann::json& j, training_config& c) {
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_lists = j.value("batch_lists", c.batch_lists);
  c.seed = j.value("seed", c.seed);
  c.sampling = j.value("sampling", c.sampling);
  c.sampling_n = j.value("sampling_n", c.sampling_n);
}

inline void to_json(nlohmann::json& j, const eval_config& c) {
  j = {{"cutoffs", c.cutoffs}, {"gain", c.gain}};
}
inline void from_json(const nlohmann::json& j, eval_config& c) {
  c.cutoffs = j.value("cutoffs", c.cutoffs);
  c.gain = j.value("gain", c.gain);
}

inline void to_json(nlohmann::json& j, const experiment_config& c) {
  j = {{"name", c.name},       {"dataset", c.dataset},   {"loss", c.loss},
       {"loss_config", c.loss_cfg}, {"model", c.model},  {"optimizer", c.optimizer},
       {"training", c.training},    {"eval", c.eval},    {"output_dir", c.output_dir}};
}
inline void from_json(const nlohmann::json& j, experiment_config& c) {
  c.name = j.value("name", c.name);
  if (j.contains("dataset")) j.at("dataset").get_to(c.dataset);
  c.loss = j.value("loss", c.loss);
  if (j.contains("loss_config")) j.at("loss_config").get_to(c.loss_cfg);
  if (j.contains("model")) j.at("model").get_to(c.model);
  if (j.contains("optimizer")) j.at("optimizer").get_to(c.optimizer);
  if (j.contains("training")) j.at("training").get_to(c.training);
  if (j.contains("eval")) j.at("eval").get_to(c.eval);
  c.output_dir = j.value("output_dir", c.output_dir);
}

inline experiment_config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  in >> j;
  return j.get<experiment_config>();
}

inline void save_config(const experiment_config& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << nlohmann::json(config).dump(2) << '\n';
}

/// Stable 64-bit FNV-1a hash of the canonical JSON dump, hex-printed; names
/// run directories.
inline std::string config_hash(const experiment_config& config) {
  const std::string dump = nlohmann::json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(h ^ (h >> 32)));
  return buf;
}

/// Collection presets mirroring the reported per-collection hyperparameters.
inline void apply_preset(experiment_config& config, const std::string& preset) {
  config.model.expansion = 3;
  config.dataset.list_cap = 150;
  if (preset == "mq2007" || preset == "mq2008") {
    config.model.heads = 2;
    config.model.hidden = 32;
    config.dataset.num_grades = 3;
  } else if (preset == "ohsumed") {
    config.model.heads = 3;
    config.model.hidden = 32;
    config.dataset.num_grades = 3;
    config.training.max_epochs = std::min<std::size_t>(config.training.max_epochs, 50);
  } else if (preset == "web30k") {
    config.model.heads = 4;
    config.model.hidden = 128;
    config.dataset.num_grades = 5;
    config.dataset.log_sign_features = true;
  } else if (preset == "mlia") {
    config.model.heads = 1;
    config.model.hidden = 8;
    config.dataset.num_grades = 3;
    config.training.max_epochs = std::min<std::size_t>(config.training.max_epochs, 50);
  } else {
    throw std::invalid_argument("unknown preset '" + preset +
                                "' (mq2007|mq2008|ohsumed|web30k|mlia)");
  }
}

}  // namespace distrank
