#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "distrank/commands.hpp"

using namespace distrank;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_split(const fs::path& path, std::size_t lists, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.3, 0.3);
  std::ofstream out(path);
  for (std::size_t q = 0; q < lists; ++q) {
    for (int i = 0; i < 6; ++i) {
      const int grade = static_cast<int>(rng() % 3);
      out << grade << " qid:" << (seed * 100 + q) << " 1:" << (grade + noise(rng))
          << " 2:" << noise(rng) << " 3:" << noise(rng) << '\n';
    }
  }
}

// Fold tree with disjoint qids per split.
fs::path make_dataset(const std::string& tag, int folds = 1) {
  const fs::path root = fs::temp_directory_path() / ("distrank_ds_" + tag);
  fs::remove_all(root);
  for (int f = 1; f <= folds; ++f) {
    fs::create_directories(root / ("Fold" + std::to_string(f)));
    write_split(root / ("Fold" + std::to_string(f)) / "train.txt", 6, 10 * f + 1);
    write_split(root / ("Fold" + std::to_string(f)) / "vali.txt", 3, 10 * f + 2);
    write_split(root / ("Fold" + std::to_string(f)) / "test.txt", 3, 10 * f + 3);
  }
  return root;
}

experiment_config tiny_config(const fs::path& dataset, int folds = 1) {
  experiment_config config;
  config.name = "tiny";
  config.dataset.path = dataset.string();
  config.dataset.folds.clear();
  for (int f = 1; f <= folds; ++f) config.dataset.folds.push_back(f);
  config.dataset.list_cap = 0;
  config.loss = "listwise-kl-gauss";
  config.model.heads = 1;
  config.model.expansion = 2;
  config.model.hidden = 4;
  config.training.max_epochs = 3;
  config.training.patience = 3;
  config.training.seed = 5;
  return config;
}

}  // namespace

TEST_CASE("train writes a checkpoint, history and config per fold") {
  const auto ds = make_dataset("train1");
  auto config = tiny_config(ds);
  config.training.max_epochs = 1;
  config.training.patience = 0;
  std::ostringstream log;
  const auto out = fs::temp_directory_path() / "distrank_run_single";
  fs::remove_all(out);
  const auto outcome = cmd_train(config, out.string(), log);
  CHECK(outcome.checkpoints.size() == 1);
  CHECK(fs::exists(out / "fold1.ckpt"));
  CHECK(fs::exists(out / "fold1_history.tsv"));
  CHECK(fs::exists(out / "config.json"));
  CHECK(log.str().find("best validation nDCG@1") != std::string::npos);
}

TEST_CASE("train is byte-reproducible for a fixed seed and config") {
  const auto ds = make_dataset("train2");
  const auto config = tiny_config(ds);
  const auto out1 = fs::temp_directory_path() / "distrank_run_a";
  const auto out2 = fs::temp_directory_path() / "distrank_run_b";
  fs::remove_all(out1);
  fs::remove_all(out2);
  std::ostringstream sink;
  cmd_train(config, out1.string(), sink);
  cmd_train(config, out2.string(), sink);
  CHECK(slurp(out1 / "fold1_history.tsv") == slurp(out2 / "fold1_history.tsv"));
  CHECK(slurp(out1 / "fold1.ckpt") == slurp(out2 / "fold1.ckpt"));
}

TEST_CASE("the config written next to a run re-executes to identical results") {
  const auto ds = make_dataset("train3");
  const auto config = tiny_config(ds);
  const auto out1 = fs::temp_directory_path() / "distrank_run_c";
  const auto out2 = fs::temp_directory_path() / "distrank_run_d";
  fs::remove_all(out1);
  fs::remove_all(out2);
  std::ostringstream sink;
  cmd_train(config, out1.string(), sink);
  const auto reloaded = load_config((out1 / "config.json").string());
  cmd_train(reloaded, out2.string(), sink);
  CHECK(slurp(out1 / "fold1_history.tsv") == slurp(out2 / "fold1_history.tsv"));
  CHECK(slurp(out1 / "fold1.ckpt") == slurp(out2 / "fold1.ckpt"));
}

TEST_CASE("five folds produce five checkpoints and an averaged summary") {
  const auto ds = make_dataset("train5", 5);
  auto config = tiny_config(ds, 5);
  config.training.max_epochs = 1;
  config.training.patience = 0;
  std::ostringstream log;
  const auto out = fs::temp_directory_path() / "distrank_run_five";
  fs::remove_all(out);
  const auto outcome = cmd_train(config, out.string(), log);
  CHECK(outcome.checkpoints.size() == 5);
  CHECK(outcome.fold_val_ndcg1.size() == 5);
  CHECK(log.str().find("mean validation nDCG@1 over 5 fold(s)") != std::string::npos);
}

TEST_CASE("training on judgment distributions via the sidecar") {
  const auto ds = make_dataset("dists1");
  // sidecar rows for every document of every split (6 docs per list)
  const auto sidecar = ds / "dists.txt";
  {
    std::ofstream out(sidecar);
    std::mt19937_64 rng(77);
    for (std::uint64_t seed : {11, 12, 13}) {
      const std::size_t lists = seed == 11 ? 6 : 3;
      for (std::size_t q = 0; q < lists; ++q)
        for (int i = 0; i < 6; ++i) {
          const int grade = static_cast<int>(rng() % 3);
          out << "qid:" << (seed * 100 + q) << " doc:" << i << " counts:" << (grade == 0 ? 5 : 1)
              << ',' << (grade == 1 ? 5 : 1) << ',' << (grade == 2 ? 5 : 1) << '\n';
        }
    }
  }
  auto config = tiny_config(ds);
  config.loss = "pointwise-kl-mul";
  config.dataset.dists = sidecar.string();
  config.dataset.num_grades = 3;
  std::ostringstream log;
  const auto out = fs::temp_directory_path() / "distrank_run_dists";
  fs::remove_all(out);
  const auto outcome = cmd_train(config, out.string(), log);
  CHECK(fs::exists(outcome.checkpoints[0]));
  // the saved model carries the softmax head
  const auto model = ranker_model::load(outcome.checkpoints[0].string());
  CHECK(model.config().output == head_kind::softmax);
  CHECK(model.config().num_classes == 3);
}

TEST_CASE("incompatible loss and head fails before training starts") {
  const auto ds = make_dataset("badloss");
  auto config = tiny_config(ds);
  config.loss = "pointwise-kl-mul";  // no sidecar distributions configured
  std::ostringstream sink;
  CHECK_THROWS(cmd_train(config, (fs::temp_directory_path() / "distrank_never").string(), sink));
}

TEST_CASE("evaluate produces per-fold reports plus a summary table") {
  const auto ds = make_dataset("eval1");
  const auto config = tiny_config(ds);
  const auto run = fs::temp_directory_path() / "distrank_run_eval";
  fs::remove_all(run);
  std::ostringstream sink;
  const auto outcome = cmd_train(config, run.string(), sink);

  std::vector<std::string> ckpts;
  for (const auto& c : outcome.checkpoints) ckpts.push_back(c.string());
  const auto eval_dir = run / "eval";
  const auto result = cmd_evaluate(config, ckpts, "test", eval_dir.string(), sink);
  CHECK(fs::exists(eval_dir / "fold1_test_report.tsv"));
  CHECK(fs::exists(eval_dir / "fold1_test_report.json"));
  CHECK(fs::exists(eval_dir / "summary_test.tsv"));
  REQUIRE(result.fold_reports.size() == 1);
  CHECK(result.fold_reports[0].topics.size() == 3);
  CHECK(result.measures.size() == 8);

  // a missing checkpoint is a clear error
  CHECK_THROWS_WITH(cmd_evaluate(config, {"/missing.ckpt"}, "test", eval_dir.string(), sink),
                    Catch::Matchers::ContainsSubstring("checkpoint not found"));
  CHECK_THROWS(cmd_evaluate(config, ckpts, "weird", eval_dir.string(), sink));

  // a checkpoint trained on a different feature dimension is rejected
  ranker_config other;
  other.feature_dim = 7;
  other.heads = 1;
  other.expansion = 2;
  other.hidden = 4;
  const auto misfit = fs::temp_directory_path() / "distrank_misfit.ckpt";
  ranker_model::init(other, 1).save(misfit.string());
  CHECK_THROWS_WITH(cmd_evaluate(config, {misfit.string()}, "test", eval_dir.string(), sink),
                    Catch::Matchers::ContainsSubstring("does not match dataset dim"));
}

TEST_CASE("compare of a run against itself is all ties") {
  const auto report = evaluate_run(
      {[] {
         query_group g;
         g.qid = "1";
         for (int grade : {2, 1, 0}) {
           document d;
           d.features = {0.0};
           d.raw_label = grade;
           d.label = grade / 2.0;
           g.docs.push_back(d);
         }
         return g;
       }(),
       [] {
         query_group g;
         g.qid = "2";
         for (int grade : {0, 2}) {
           document d;
           d.features = {0.0};
           d.raw_label = grade;
           d.label = grade / 2.0;
           g.docs.push_back(d);
         }
         return g;
       }()},
      {{0.9, 0.5, 0.1}, {0.2, 0.8}});
  std::ostringstream log;
  const auto rows = cmd_compare(report, report, log);
  for (const auto& row : rows) {
    CHECK(row.test.p == 1.0);
    CHECK(row.marker == "—");
  }
}

TEST_CASE("compare flags a strictly better run and rejects disjoint topics") {
  metric_report a, b;
  a.measures = b.measures = {"AP"};
  for (int t = 0; t < 8; ++t) {
    a.topics.push_back("q" + std::to_string(t));
    b.topics.push_back("q" + std::to_string(t));
    const double noise = 0.01 * ((t * 7) % 5);
    a.values.push_back({0.4 + noise});
    b.values.push_back({0.5 + noise * 1.5});
  }
  std::ostringstream log;
  const auto rows = cmd_compare(a, b, log);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].marker == "↑");
  CHECK(rows[0].mean_b > rows[0].mean_a);

  auto c = b;
  c.topics[0] = "other";
  CHECK_THROWS(cmd_compare(a, c, log));
}

TEST_CASE("sample-labels rewrites only mid-grade labels, deterministically") {
  const auto dir = fs::temp_directory_path();
  const auto extremes = dir / "distrank_extreme.txt";
  {
    std::ofstream out(extremes);
    out << "2 qid:1 1:0.5\n0 qid:1 1:0.1\n2 qid:2 1:0.7\n";
  }
  const auto out1 = dir / "distrank_extreme_s1.txt";
  const auto out2 = dir / "distrank_extreme_s2.txt";
  cmd_sample_labels(extremes.string(), out1.string(), 32, 7);
  cmd_sample_labels(extremes.string(), out2.string(), 32, 7);
  CHECK(slurp(out1) == slurp(out2));
  // grades 0 and 2 normalize to the extremes, so labels survive exactly
  const auto sampled = parse_letor(out1.string(), [] {
    parse_options o;
    o.labels_prenormalized = true;
    o.num_grades = 3;
    return o;
  }());
  CHECK(sampled[0].docs[0].label == 1.0);
  CHECK(sampled[0].docs[1].label == 0.0);
  CHECK(sampled[1].docs[0].label == 1.0);

  // n = 1 on a mid-grade label gives a single Bernoulli draw
  const auto mids = dir / "distrank_mid.txt";
  {
    std::ofstream out(mids);
    for (int i = 0; i < 20; ++i) out << "1 qid:" << i << " 1:0.5\n";
  }
  const auto mid_out = dir / "distrank_mid_s.txt";
  parse_options in_opts;
  in_opts.num_grades = 3;  // grade 1 of {0,1,2} is the 0.5 mid-point
  cmd_sample_labels(mids.string(), mid_out.string(), 1, 3, in_opts);
  parse_options opts;
  opts.labels_prenormalized = true;
  opts.num_grades = 3;
  bool saw_zero = false, saw_one = false;
  for (const auto& g : parse_letor(mid_out.string(), opts))
    for (const auto& d : g.docs) {
      CHECK((d.label == 0.0 || d.label == 1.0));
      saw_zero = saw_zero || d.label == 0.0;
      saw_one = saw_one || d.label == 1.0;
    }
  CHECK(saw_zero);
  CHECK(saw_one);
}

TEST_CASE("aggregate-dists rewrites labels from the sidecar") {
  const auto dir = fs::temp_directory_path();
  const auto letor = dir / "distrank_agg.txt";
  const auto dists = dir / "distrank_agg_dists.txt";
  {
    std::ofstream out(letor);
    out << "2 qid:1 1:0.5\n1 qid:1 1:0.4\n0 qid:1 1:0.3\n";
    std::ofstream dout(dists);
    dout << "qid:1 doc:0 counts:0,0,4\n"
         << "qid:1 doc:1 counts:2,0,2\n"
         << "qid:1 doc:2 counts:4,0,0\n";
  }
  const auto out = dir / "distrank_agg_out.txt";
  cmd_aggregate_dists(letor.string(), dists.string(), out.string());
  parse_options opts;
  opts.labels_prenormalized = true;
  opts.num_grades = 3;
  const auto groups = parse_letor(out.string(), opts);
  CHECK(groups[0].docs[0].label == 1.0);
  CHECK(groups[0].docs[1].label == 0.5);
  CHECK(groups[0].docs[2].label == 0.0);
}

#ifdef DISTRANK_CLI
TEST_CASE("the command-line binary wires the subcommands") {
  const auto dir = fs::temp_directory_path();
  const auto input = dir / "distrank_cli_in.txt";
  {
    std::ofstream out(input);
    out << "2 qid:1 1:0.5\n0 qid:1 1:0.1\n";
  }
  const auto output = dir / "distrank_cli_out.txt";
  const std::string cli = DISTRANK_CLI;
  const std::string ok = cli + " sample-labels --input " + input.string() + " --output " +
                         output.string() + " --n 32 --seed 3";
  CHECK(std::system(ok.c_str()) == 0);
  CHECK(fs::exists(output));
  // bad invocations exit nonzero
  CHECK(std::system((cli + " sample-labels --input /does/not/exist --output " + output.string() +
                     " 2>/dev/null")
                        .c_str()) != 0);
  CHECK(std::system((cli + " compare /no/a.tsv /no/b.tsv 2>/dev/null").c_str()) != 0);
}
#endif
