#pragma once

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "distrank/letor.hpp"
#include "distrank/losses.hpp"
#include "distrank/sampling.hpp"
#include "distrank/tensor.hpp"

namespace distrank {

enum class head_kind { scalar, softmax };

struct ranker_config {
  std::size_t feature_dim = 0;
  std::size_t heads = 2;
  std::size_t expansion = 3;  // width multiplier of the first FFN
  std::size_t hidden = 32;
  head_kind output = head_kind::scalar;
  std::size_t num_classes = 1;  // softmax head width
  double std_floor = 1e-6;

  /// Feature dim padded with zero columns up to a multiple of the head count.
  std::size_t padded_dim() const {
    return (feature_dim + heads - 1) / heads * heads;
  }
  std::size_t head_dim() const { return padded_dim() / heads; }

  void validate() const {
    if (feature_dim == 0) throw std::invalid_argument("ranker_config: feature_dim required");
    if (heads == 0) throw std::invalid_argument("ranker_config: heads must be >= 1");
    if (expansion == 0) throw std::invalid_argument("ranker_config: expansion must be >= 1");
    if (hidden == 0) throw std::invalid_argument("ranker_config: hidden must be >= 1");
    if (output == head_kind::softmax && num_classes < 2)
      throw std::invalid_argument("ranker_config: softmax head needs >= 2 classes");
  }
};

/// One forward evaluation; holds the graph so gradients can be pulled later.
struct forward_pass {
  var_ptr output;       // [N,1] scalar head (space-dependent) or [N,k] softmax
  scored_list list;     // detached values for the loss functions
  score_space space = score_space::sigmoid;
};

/// Self-attention ranker: multi-head attention over the documents of one
/// list, a normalize/expand/contract block with a residual connection, then
/// a hidden layer and a scalar or softmax scoring head.
class ranker_model {
 public:
  ranker_model() = default;

  static ranker_model init(const ranker_config& config, std::uint64_t seed) {
    config.validate();
    ranker_model model;
    model.config_ = config;
    std::mt19937_64 rng(detail::splitmix64(seed ^ 0x72616e6b65726d64ULL));
    const std::size_t f = config.padded_dim();
    const std::size_t m = config.head_dim();
    const std::size_t tf = config.expansion * f;
    const std::size_t h = config.hidden;
    const std::size_t o = config.output == head_kind::softmax ? config.num_classes : 1;

    for (std::size_t head = 0; head < config.heads; ++head) {
      model.add_param("wq" + std::to_string(head), f, m, rng);
      model.add_param("wk" + std::to_string(head), f, m, rng);
      model.add_param("wv" + std::to_string(head), f, m, rng);
    }
    model.add_param("wo", f, f, rng);
    model.add_param("ffn1_w", f, tf, rng);
    model.add_param("ffn1_b", 1, tf, rng, true);
    model.add_param("ffn2_w", tf, f, rng);
    model.add_param("ffn2_b", 1, f, rng, true);
    model.add_param("hidden_w", f, h, rng);
    model.add_param("hidden_b", 1, h, rng, true);
    model.add_param("out_w", h, o, rng);
    model.add_param("out_b", 1, o, rng, true);
    return model;
  }

  const ranker_config& config() const { return config_; }

  const std::vector<var_ptr>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }

  var_ptr param(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return params_[i];
    throw std::invalid_argument("no parameter '" + name + "'");
  }

  /// Scores one list. The score space selects the head activation: sigmoid
  /// or raw for the scalar head, one softmax row per document otherwise.
  forward_pass forward(const query_group& group, score_space space) const {
    if (group.docs.empty()) throw std::invalid_argument("forward: empty query group");
    if (group.docs[0].features.size() != config_.feature_dim)
      throw std::invalid_argument("forward: feature dimension mismatch");
    if ((space == score_space::softmax) != (config_.output == head_kind::softmax))
      throw std::invalid_argument("forward: score space incompatible with model head");

    const std::size_t n = group.docs.size();
    const std::size_t f = config_.padded_dim();
    tensor x({n, f});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < config_.feature_dim; ++j)
        x.at(i, j) = group.docs[i].features[j];
    var_ptr input = make_leaf(std::move(x));

    // Multi-head self-attention over the list axis.
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(config_.head_dim()));
    std::vector<var_ptr> heads;
    for (std::size_t head = 0; head < config_.heads; ++head) {
      const auto tag = std::to_string(head);
      auto q = matmul(input, param("wq" + tag));
      auto k = matmul(input, param("wk" + tag));
      auto v = matmul(input, param("wv" + tag));
      auto attn = softmax_rows(scale(matmul_nt(q, k), inv_sqrt_m));
      heads.push_back(matmul(attn, v));
    }
    auto sa = matmul(concat_cols(heads), param("wo"));

    // Regularization block: normalize, expand, normalize, contract, add the
    // normalized input back, normalize again.
    auto normed = feature_norm(sa, config_.std_floor);
    auto expanded = relu(add_rowvec(matmul(normed, param("ffn1_w")), param("ffn1_b")));
    auto contracted =
        add_rowvec(matmul(feature_norm(expanded, config_.std_floor), param("ffn2_w")),
                   param("ffn2_b"));
    auto out = feature_norm(add(contracted, normed), config_.std_floor);

    auto hidden = relu(add_rowvec(matmul(out, param("hidden_w")), param("hidden_b")));
    auto z = add_rowvec(matmul(hidden, param("out_w")), param("out_b"));

    forward_pass pass;
    pass.space = space;
    switch (space) {
      case score_space::sigmoid:
        pass.output = sigmoid(z);
        break;
      case score_space::raw:
        pass.output = z;
        break;
      case score_space::softmax:
        pass.output = softmax_rows(z);
        break;
    }

    pass.list.labels.resize(n);
    pass.list.dists.resize(n, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      pass.list.labels[i] = group.docs[i].label;
      if (group.docs[i].dist) pass.list.dists[i] = &*group.docs[i].dist;
    }
    if (space == score_space::softmax) {
      pass.list.class_probs.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        pass.list.class_probs[i].resize(config_.num_classes);
        for (std::size_t j = 0; j < config_.num_classes; ++j)
          pass.list.class_probs[i][j] = pass.output->value.at(i, j);
      }
    } else {
      pass.list.scores.resize(n);
      for (std::size_t i = 0; i < n; ++i) pass.list.scores[i] = pass.output->value.at(i, 0);
    }
    return pass;
  }

  /// Accumulates d(loss)/d(parameter) into every parameter's grad buffer for
  /// the upstream gradient of one forward pass.
  void backward(const forward_pass& pass, const loss_value& upstream) const {
    if (!pass.output) throw std::logic_error("backward: no forward pass to differentiate");
    tensor seed(pass.output->value.shape());
    const std::size_t n = pass.output->value.rows();
    if (pass.space == score_space::softmax) {
      if (upstream.class_prob_grad.size() != n)
        throw std::invalid_argument("backward: upstream class gradient size mismatch");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < pass.output->value.cols(); ++j)
          seed.at(i, j) = upstream.class_prob_grad[i][j];
    } else {
      if (upstream.score_grad.size() != n)
        throw std::invalid_argument("backward: upstream score gradient size mismatch");
      for (std::size_t i = 0; i < n; ++i) seed.at(i, 0) = upstream.score_grad[i];
    }
    distrank::backward(pass.output, seed);
  }

  void zero_grad() {
    for (auto& p : params_) {
      p->ensure_grad();
      p->zero_grad();
    }
  }

  /// Scalar ranking score per document for evaluation: the raw head output,
  /// or the aggregated class distribution for the softmax head.
  std::vector<double> eval_scores(const query_group& group) const {
    if (config_.output == head_kind::scalar) {
      return forward(group, score_space::raw).list.scores;
    }
    auto pass = forward(group, score_space::softmax);
    std::vector<double> scores(group.docs.size());
    for (std::size_t i = 0; i < group.docs.size(); ++i) {
      const auto& probs = pass.list.class_probs[i];
      if (probs.size() == 3) {
        grade_distribution d;
        d.counts = {1, 1, 1};  // unused by the weighting
        d.probs = probs;
        scores[i] = aggregate_mlia(d);
      } else {
        double expectation = 0.0;
        for (std::size_t g = 0; g < probs.size(); ++g)
          expectation += probs[g] * static_cast<double>(g) / static_cast<double>(probs.size() - 1);
        scores[i] = expectation;
      }
    }
    return scores;
  }

  std::vector<tensor> snapshot() const {
    std::vector<tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<tensor>& snap) {
    if (snap.size() != params_.size()) throw std::invalid_argument("restore: size mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!params_[i]->value.same_shape(snap[i]))
        throw std::invalid_argument("restore: shape mismatch");
      params_[i]->value = snap[i];
    }
  }

  // Checkpoint container: a small line-oriented text format (documented in
  // the README) holding the config and every parameter tensor verbatim.
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "distrank-checkpoint 1\n";
    out << "feature_dim " << config_.feature_dim << '\n';
    out << "heads " << config_.heads << '\n';
    out << "expansion " << config_.expansion << '\n';
    out << "hidden " << config_.hidden << '\n';
    out << "output " << (config_.output == head_kind::softmax ? "softmax" : "scalar") << '\n';
    out << "classes " << config_.num_classes << '\n';
    out << "params " << params_.size() << '\n';
    char buf[40];
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const tensor& t = params_[i]->value;
      out << names_[i] << ' ' << t.rows() << ' ' << t.cols() << '\n';
      for (std::size_t j = 0; j < t.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", t[j]);
        out << buf << (j + 1 == t.size() ? '\n' : ' ');
      }
    }
  }

  static ranker_model load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "distrank-checkpoint" || version != 1)
      throw std::runtime_error(path + ": not a distrank checkpoint (v1)");

    ranker_config config;
    std::string key, value;
    std::size_t count = 0;
    while (in >> key) {
      if (key == "params") {
        in >> count;
        break;
      }
      in >> value;
      if (key == "feature_dim") config.feature_dim = std::stoul(value);
      else if (key == "heads") config.heads = std::stoul(value);
      else if (key == "expansion") config.expansion = std::stoul(value);
      else if (key == "hidden") config.hidden = std::stoul(value);
      else if (key == "classes") config.num_classes = std::stoul(value);
      else if (key == "output") config.output = value == "softmax" ? head_kind::softmax : head_kind::scalar;
      else throw std::runtime_error(path + ": unknown checkpoint field '" + key + "'");
    }

    ranker_model model = init(config, 0);
    if (count != model.params_.size())
      throw std::runtime_error(path + ": unexpected parameter count");
    for (std::size_t i = 0; i < count; ++i) {
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(in >> name >> rows >> cols)) throw std::runtime_error(path + ": truncated checkpoint");
      auto p = model.param(name);
      if (p->value.rows() != rows || p->value.cols() != cols)
        throw std::runtime_error(path + ": shape mismatch for " + name);
      for (std::size_t j = 0; j < p->value.size(); ++j)
        if (!(in >> p->value[j])) throw std::runtime_error(path + ": truncated checkpoint");
    }
    return model;
  }

 private:
  void add_param(const std::string& name, std::size_t rows, std::size_t cols,
                 std::mt19937_64& rng, bool zero = false) {
    tensor t({rows, cols});
    if (!zero) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      std::uniform_real_distribution<double> uni(-bound, bound);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = uni(rng);
    }
    names_.push_back(name);
    params_.push_back(make_leaf(std::move(t), true));
  }

  ranker_config config_;
  std::vector<std::string> names_;
  std::vector<var_ptr> params_;
};

}  // namespace distrank
