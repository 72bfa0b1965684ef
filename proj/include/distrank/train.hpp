#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "distrank/losses.hpp"
#include "distrank/metrics.hpp"
#include "distrank/model.hpp"
#include "distrank/sampling.hpp"

namespace distrank {

struct optimizer_options {
  std::string kind = "adam";  // adam | sgd
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam (default) or plain gradient descent over the model parameters.
/// step() consumes and clears the accumulated gradients.
class optimizer {
 public:
  optimizer(ranker_model& model, optimizer_options options)
      : model_(&model), options_(std::move(options)) {
    if (options_.kind != "adam" && options_.kind != "sgd")
      throw std::invalid_argument("optimizer: kind must be adam or sgd");
    if (options_.kind == "adam") {
      for (const auto& p : model_->parameters()) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
      }
    }
  }

  void step() {
    const auto& params = model_->parameters();
    if (options_.kind == "sgd") {
      for (const auto& p : params) {
        p->ensure_grad();
        for (std::size_t i = 0; i < p->value.size(); ++i)
          p->value[i] -= options_.lr * p->grad[i];
      }
    } else {
      ++t_;
      const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        p->ensure_grad();
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          const double g = p->grad[i];
          m_[pi][i] = options_.beta1 * m_[pi][i] + (1.0 - options_.beta1) * g;
          v_[pi][i] = options_.beta2 * v_[pi][i] + (1.0 - options_.beta2) * g * g;
          const double mhat = m_[pi][i] / bc1;
          const double vhat = v_[pi][i] / bc2;
          p->value[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
      }
    }
    model_->zero_grad();
  }

 private:
  ranker_model* model_;
  optimizer_options options_;
  std::vector<tensor> m_, v_;
  std::uint64_t t_ = 0;
};

struct train_options {
  std::string loss = "approx-ndcg";
  loss_config loss_cfg;
  optimizer_options opt;
  std::size_t max_epochs = 100;
  std::size_t patience = 20;
  std::size_t batch_lists = 1;
  std::uint64_t seed = 7;
  sampling_mode sampling = sampling_mode::none;
  int sampling_n = 32;
  gain_kind gain = gain_kind::exponential;  // validation nDCG@1 convention
};

struct epoch_record {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_ndcg1 = 0.0;
  bool best = false;
};

struct train_result {
  std::vector<epoch_record> history;
  std::size_t best_epoch = 0;
  double best_val_ndcg1 = 0.0;
};

/// Mean nDCG@1 of the model over a split, used for model selection.
inline double validation_ndcg1(const ranker_model& model, const std::vector<query_group>& split,
                               gain_kind gain) {
  double total = 0.0;
  for (const auto& group : split) {
    std::vector<int> grades(group.docs.size());
    for (std::size_t i = 0; i < group.docs.size(); ++i) grades[i] = group.docs[i].raw_label;
    total += ndcg_at_k(model.eval_scores(group), grades, 1, gain);
  }
  return total / static_cast<double>(split.size());
}

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  // Fisher-Yates spelled out so the permutation does not depend on the
  // standard library's std::shuffle implementation.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace detail

/// Trains in place: one pass over the training lists per epoch, validation
/// nDCG@1 tracked per epoch, early stopping with the configured patience,
/// and the best-validation parameter snapshot restored at the end.
inline train_result train_ranker(ranker_model& model, const std::vector<query_group>& train_split,
                                 const std::vector<query_group>& validation,
                                 const train_options& opts) {
  if (train_split.empty()) throw std::invalid_argument("train_ranker: empty training split");
  if (validation.empty()) throw std::invalid_argument("train_ranker: empty validation split");
  opts.loss_cfg.validate();
  const loss_spec& spec = loss_by_name(opts.loss);
  if ((spec.space == score_space::softmax) != (model.config().output == head_kind::softmax))
    throw std::invalid_argument("train_ranker: loss '" + opts.loss +
                                "' is incompatible with the model head");

  std::mt19937_64 train_rng(detail::splitmix64(opts.seed ^ 0x747261696e726e67ULL));
  optimizer opt(model, opts.opt);
  model.zero_grad();

  train_result result;
  std::vector<tensor> best_snapshot = model.snapshot();
  std::size_t epochs_since_best = 0;
  bool have_best = false;

  std::vector<std::size_t> order(train_split.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    std::vector<std::vector<double>> epoch_labels;
    if (opts.sampling != sampling_mode::none) {
      const std::uint64_t sample_epoch = opts.sampling == sampling_mode::per_epoch ? epoch : 0;
      epoch_labels = resample_labels(train_split, opts.sampling_n, opts.seed, sample_epoch);
    }

    detail::shuffle_indices(order, train_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_lists) {
      const std::size_t stop = std::min(start + opts.batch_lists, order.size());
      const double inv_batch = 1.0 / static_cast<double>(stop - start);

      std::vector<forward_pass> passes;
      passes.reserve(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& group = train_split[order[b]];
        auto pass = model.forward(group, spec.space);
        if (!epoch_labels.empty()) pass.list.labels = epoch_labels[order[b]];
        passes.push_back(std::move(pass));
      }

      // Optional batch-level class weights spanning every list in the batch.
      std::vector<std::vector<double>> batch_weights;
      if (opts.loss_cfg.weights_per_batch && passes.size() > 1) {
        std::vector<double> all_labels;
        for (const auto& pass : passes)
          all_labels.insert(all_labels.end(), pass.list.labels.begin(), pass.list.labels.end());
        const auto w = class_weights(all_labels, opts.loss_cfg.rel_threshold);
        std::size_t off = 0;
        for (const auto& pass : passes) {
          batch_weights.emplace_back(w.begin() + off, w.begin() + off + pass.list.size());
          off += pass.list.size();
        }
      }

      for (std::size_t b = 0; b < passes.size(); ++b) {
        const std::vector<double>* weights =
            batch_weights.empty() ? nullptr : &batch_weights[b];
        loss_value lv = evaluate_loss(opts.loss, passes[b].list, opts.loss_cfg,
                                      spec.stochastic ? &train_rng : nullptr, weights);
        loss_sum += lv.value;
        for (double& g : lv.score_grad) g *= inv_batch;
        for (auto& row : lv.class_prob_grad)
          for (double& g : row) g *= inv_batch;
        model.backward(passes[b], lv);
      }
      opt.step();
    }

    epoch_record record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_split.size());
    record.val_ndcg1 = validation_ndcg1(model, validation, opts.gain);

    if (!have_best || record.val_ndcg1 > result.best_val_ndcg1) {
      have_best = true;
      result.best_val_ndcg1 = record.val_ndcg1;
      result.best_epoch = epoch;
      best_snapshot = model.snapshot();
      epochs_since_best = 0;
      record.best = true;
    } else {
      ++epochs_since_best;
    }
    result.history.push_back(record);
    if (epochs_since_best > opts.patience) break;
  }

  model.restore(best_snapshot);
  return result;
}

}  // namespace distrank
