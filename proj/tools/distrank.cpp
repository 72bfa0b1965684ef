#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distrank/commands.hpp"
#include "distrank/config.hpp"

namespace {

namespace fs = std::filesystem;

struct config_flags {
  std::string config_path;
  std::string preset;
};

// Config file first, preset second, explicit flags last.
void add_config_options(CLI::App* cmd, config_flags& flags, distrank::experiment_config& config) {
  cmd->add_option("--config", flags.config_path, "experiment config JSON")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", flags.preset,
                  "collection preset: mq2007|mq2008|ohsumed|web30k|mlia");

  cmd->add_option("--name", config.name, "run name");
  cmd->add_option("--dataset", config.dataset.path, "dataset root with Fold<i>/ directories");
  cmd->add_option("--folds", config.dataset.folds, "fold ids to use");
  cmd->add_option("--num-grades", config.dataset.num_grades, "relevance grade count");
  cmd->add_flag("--prenormalized", config.dataset.prenormalized,
                "labels are already real-valued in [0,1]");
  cmd->add_flag("--log-sign", config.dataset.log_sign_features,
                "apply the signed log transform to raw features");
  cmd->add_option("--list-cap", config.dataset.list_cap, "max documents kept per query (0: all)");
  cmd->add_option("--dists", config.dataset.dists, "judgment-distribution sidecar file");

  cmd->add_option("--loss", config.loss,
                  "pointwise-kl-bin|pointwise-kl-mul|pairwise-kl-bin|pairwise-kl-gauss|"
                  "listwise-kl-gauss|mse|hinge|approx-ndcg|approx-ndcg-st|listmle");
  cmd->add_option("--n", config.loss_cfg.n, "Binomial/Multinomial trial count");
  cmd->add_option("--m", config.loss_cfg.m, "pairwise slack");
  cmd->add_option("--sigma", config.loss_cfg.sigma, "Gaussian std");
  cmd->add_option("--alpha", config.loss_cfg.alpha, "rank-approximation steepness");
  cmd->add_option("--beta", config.loss_cfg.beta, "stochastic logistic noise scale");
  cmd->add_option("--rel-threshold", config.loss_cfg.rel_threshold, "relevance threshold");
  cmd->add_option("--eps", config.loss_cfg.eps, "probability clamp");
  cmd->add_flag("--weights-per-batch", config.loss_cfg.weights_per_batch,
                "class weights span the whole batch instead of one list");

  cmd->add_option("--heads", config.model.heads, "attention heads");
  cmd->add_option("--expansion", config.model.expansion, "FFN width multiplier");
  cmd->add_option("--hidden", config.model.hidden, "hidden layer size");

  cmd->add_option("--optimizer", config.optimizer.kind, "adam|sgd");
  cmd->add_option("--lr", config.optimizer.lr, "learning rate");

  cmd->add_option("--epochs", config.training.max_epochs, "max training epochs");
  cmd->add_option("--patience", config.training.patience, "early-stopping patience");
  cmd->add_option("--batch-lists", config.training.batch_lists, "lists per training step");
  cmd->add_option("--seed", config.training.seed, "random seed");
  cmd->add_option("--sampling", config.training.sampling, "label sampling: none|once|per-epoch");
  cmd->add_option("--sampling-n", config.training.sampling_n, "Binomial n for label sampling");

  cmd->add_option("--cutoffs", config.eval.cutoffs, "metric cutoffs");
  cmd->add_option("--gain", config.eval.gain, "nDCG gain: exp|linear");
  cmd->add_option("--output-dir", config.output_dir, "root for run directories");
}

distrank::experiment_config resolve_config(const CLI::App* cmd, const config_flags& flags,
                                           const distrank::experiment_config& cli_values) {
  distrank::experiment_config config;
  if (!flags.config_path.empty()) config = distrank::load_config(flags.config_path);
  if (!flags.preset.empty()) distrank::apply_preset(config, flags.preset);

  // Re-apply only the flags the user actually passed on top of file+preset.
  auto picked = [cmd](const std::string& name) { return cmd->count(name) > 0; };
  if (picked("--name")) config.name = cli_values.name;
  if (picked("--dataset")) config.dataset.path = cli_values.dataset.path;
  if (picked("--folds")) config.dataset.folds = cli_values.dataset.folds;
  if (picked("--num-grades")) config.dataset.num_grades = cli_values.dataset.num_grades;
  if (picked("--prenormalized")) config.dataset.prenormalized = cli_values.dataset.prenormalized;
  if (picked("--log-sign")) config.dataset.log_sign_features = cli_values.dataset.log_sign_features;
  if (picked("--list-cap")) config.dataset.list_cap = cli_values.dataset.list_cap;
  if (picked("--dists")) config.dataset.dists = cli_values.dataset.dists;
  if (picked("--loss")) config.loss = cli_values.loss;
  if (picked("--n")) config.loss_cfg.n = cli_values.loss_cfg.n;
  if (picked("--m")) config.loss_cfg.m = cli_values.loss_cfg.m;
  if (picked("--sigma")) config.loss_cfg.sigma = cli_values.loss_cfg.sigma;
  if (picked("--alpha")) config.loss_cfg.alpha = cli_values.loss_cfg.alpha;
  if (picked("--beta")) config.loss_cfg.beta = cli_values.loss_cfg.beta;
  if (picked("--rel-threshold")) config.loss_cfg.rel_threshold = cli_values.loss_cfg.rel_threshold;
  if (picked("--eps")) config.loss_cfg.eps = cli_values.loss_cfg.eps;
  if (picked("--weights-per-batch"))
    config.loss_cfg.weights_per_batch = cli_values.loss_cfg.weights_per_batch;
  if (picked("--heads")) config.model.heads = cli_values.model.heads;
  if (picked("--expansion")) config.model.expansion = cli_values.model.expansion;
  if (picked("--hidden")) config.model.hidden = cli_values.model.hidden;
  if (picked("--optimizer")) config.optimizer.kind = cli_values.optimizer.kind;
  if (picked("--lr")) config.optimizer.lr = cli_values.optimizer.lr;
  if (picked("--epochs")) config.training.max_epochs = cli_values.training.max_epochs;
  if (picked("--patience")) config.training.patience = cli_values.training.patience;
  if (picked("--batch-lists")) config.training.batch_lists = cli_values.training.batch_lists;
  if (picked("--seed")) config.training.seed = cli_values.training.seed;
  if (picked("--sampling")) config.training.sampling = cli_values.training.sampling;
  if (picked("--sampling-n")) config.training.sampling_n = cli_values.training.sampling_n;
  if (picked("--cutoffs")) config.eval.cutoffs = cli_values.eval.cutoffs;
  if (picked("--gain")) config.eval.gain = cli_values.eval.gain;
  if (picked("--output-dir")) config.output_dir = cli_values.output_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distrank: learning-to-rank with distribution-valued relevance judgments"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train one model per fold");
  config_flags train_flags;
  distrank::experiment_config train_values;
  add_config_options(train, train_flags, train_values);
  std::string train_out;
  train->add_option("--out", train_out, "exact run directory (default: generated)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a split with trained checkpoints");
  config_flags eval_flags;
  distrank::experiment_config eval_values;
  add_config_options(evaluate, eval_flags, eval_values);
  std::string eval_run, eval_split = "test", eval_out;
  std::vector<std::string> eval_ckpts;
  evaluate->add_option("--run", eval_run, "run directory produced by train");
  evaluate->add_option("--checkpoint", eval_ckpts, "checkpoint file, one per fold");
  evaluate->add_option("--split", eval_split, "train|vali|test");
  evaluate->add_option("--out", eval_out, "report directory (default: <run>/eval)");

  // compare
  auto* compare = app.add_subcommand("compare", "paired t-test between two runs' reports");
  std::string report_a, report_b;
  compare->add_option("baseline", report_a, "baseline report (.tsv)")->required();
  compare->add_option("candidate", report_b, "candidate report (.tsv)")->required();

  // sample-labels
  auto* sample = app.add_subcommand("sample-labels", "resample labels from Binomial(n, label)/n");
  std::string sample_in, sample_out;
  int sample_n = 32, sample_grades = 0;
  std::uint64_t sample_seed = 7;
  bool sample_prenorm = false;
  sample->add_option("--input", sample_in, "input LETOR file")->required()->check(CLI::ExistingFile);
  sample->add_option("--output", sample_out, "output LETOR file")->required();
  sample->add_option("--n", sample_n, "Binomial trial count");
  sample->add_option("--seed", sample_seed, "random seed");
  sample->add_option("--num-grades", sample_grades, "relevance grade count (0: infer)");
  sample->add_flag("--prenormalized", sample_prenorm, "labels already real-valued in [0,1]");

  // aggregate-dists
  auto* aggregate =
      app.add_subcommand("aggregate-dists", "replace labels by aggregated judgment distributions");
  std::string agg_in, agg_dists, agg_out;
  int agg_grades = 3;
  aggregate->add_option("--input", agg_in, "input LETOR file")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--dists", agg_dists, "distribution sidecar")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--output", agg_out, "output LETOR file")->required();
  aggregate->add_option("--num-grades", agg_grades, "relevance grade count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto config = resolve_config(train, train_flags, train_values);
      const auto outcome = distrank::cmd_train(config, train_out);
      std::cout << "run directory: " << outcome.run_dir.string() << '\n';
    } else if (evaluate->parsed()) {
      distrank::experiment_config config;
      if (!eval_run.empty()) {
        config = distrank::load_config((fs::path(eval_run) / "config.json").string());
        // Eval-time flags may still override the recorded run config.
        if (evaluate->count("--gain")) config.eval.gain = eval_values.eval.gain;
        if (evaluate->count("--cutoffs")) config.eval.cutoffs = eval_values.eval.cutoffs;
        if (evaluate->count("--dataset")) config.dataset.path = eval_values.dataset.path;
        if (eval_ckpts.empty())
          for (int fold : config.dataset.folds)
            eval_ckpts.push_back((fs::path(eval_run) / ("fold" + std::to_string(fold) + ".ckpt")).string());
        if (eval_out.empty()) eval_out = (fs::path(eval_run) / "eval").string();
      } else {
        config = resolve_config(evaluate, eval_flags, eval_values);
        if (eval_out.empty()) eval_out = "eval";
      }
      if (eval_ckpts.empty()) throw std::invalid_argument("evaluate needs --run or --checkpoint");
      distrank::cmd_evaluate(config, eval_ckpts, eval_split, eval_out);
    } else if (compare->parsed()) {
      const auto a = distrank::read_report_tsv(report_a);
      const auto b = distrank::read_report_tsv(report_b);
      distrank::cmd_compare(a, b);
    } else if (sample->parsed()) {
      distrank::parse_options options;
      options.num_grades = sample_grades;
      options.labels_prenormalized = sample_prenorm;
      distrank::cmd_sample_labels(sample_in, sample_out, sample_n, sample_seed, options);
    } else if (aggregate->parsed()) {
      distrank::parse_options options;
      options.num_grades = agg_grades;
      distrank::cmd_aggregate_dists(agg_in, agg_dists, agg_out, options);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
