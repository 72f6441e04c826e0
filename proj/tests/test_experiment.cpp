#include <cmath>
#include <random>
#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "casegraph/error.hpp"
#include "casegraph/experiment/config.hpp"
#include "casegraph/experiment/metrics.hpp"
#include "casegraph/experiment/pipeline.hpp"
#include "casegraph/experiment/synthetic.hpp"
#include "casegraph/model/params.hpp"
#include "support/fixtures.hpp"
#include "support/reference.hpp"

namespace {

using namespace casegraph;
using namespace casegraph::experiment;
using fixtures::thrown_kind;

TEST(OverallAccuracy, Examples) {
  const std::vector<std::size_t> labels{0, 1, 2, 1}, preds{0, 2, 2, 1};
  EXPECT_EQ(overall_accuracy(labels, preds), 0.75);
  EXPECT_EQ(overall_accuracy(labels, labels), 1.0);
  EXPECT_EQ(thrown_kind([] { overall_accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}); }),
            ErrorKind::Metric);
}

TEST(MacroAuc, Examples) {
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const std::vector<std::vector<double>> perfect{{0.9, 0.1}, {0.8, 0.2}, {0.3, 0.7}, {0.1, 0.9}};
  EXPECT_EQ(macro_auc(labels, perfect, 2).macro, 1.0);
  const std::vector<std::vector<double>> reversed{{0.1, 0.9}, {0.2, 0.8}, {0.7, 0.3}, {0.9, 0.1}};
  EXPECT_EQ(macro_auc(labels, reversed, 2).macro, 0.0);
  const std::vector<std::vector<double>> ties(4, std::vector<double>{0.5, 0.5});
  EXPECT_EQ(macro_auc(labels, ties, 2).macro, 0.5);
}

TEST(MacroAuc, DegenerateClassIsSkippedWithWarning) {
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const std::vector<std::vector<double>> s{{0.9, 0.1, 0.0}, {0.8, 0.2, 0.0}, {0.3, 0.7, 0.0}, {0.1, 0.9, 0.0}};
  const auto r = macro_auc(labels, s, 3);
  EXPECT_EQ(r.macro, 1.0);
  ASSERT_EQ(r.per_class.size(), 3u);
  EXPECT_FALSE(r.per_class[2].has_value());
  EXPECT_EQ(r.warnings.size(), 1u);
  const std::vector<std::size_t> one_class{0, 0};
  const std::vector<std::vector<double>> two{{0.5, 0.5}, {0.4, 0.6}};
  EXPECT_EQ(thrown_kind([&] { macro_auc(one_class, two, 2); }), ErrorKind::Metric);
}

TEST(MacroAuc, MatchesPairwiseOracle) {
  std::mt19937_64 rng(30);
  std::uniform_int_distribution<std::size_t> label(0, 2);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> labels(30);
    reference::Mat scores(30);
    for (std::size_t i = 0; i < 30; ++i) {
      labels[i] = label(rng);
      // Coarse scores on odd trials so ties occur.
      for (int c = 0; c < 3; ++c) {
        scores[i].push_back(trial % 2 ? coarse(rng) / 4.0 : fixtures::random_vector(rng, 1, 0.0, 1.0)[0]);
      }
    }
    const auto got = macro_auc(labels, scores, 3).macro;
    EXPECT_NEAR(got, reference::pairwise_macro_auc(labels, scores, 3), 1e-9) << "trial " << trial;
  }
}

TEST(ConfusionMatrix, CountsTrueByPredicted) {
  const std::vector<std::size_t> labels{0, 1, 2, 1, 1}, preds{0, 2, 2, 1, 0};
  const auto m = confusion_matrix(labels, preds, 3);
  const std::vector<std::vector<std::size_t>> want{{1, 0, 0}, {1, 1, 1}, {0, 0, 1}};
  EXPECT_EQ(m, want);
}

SyntheticConfig tiny_synthetic(std::uint64_t seed = 0) {
  SyntheticConfig s;
  s.per_class = 20;
  s.dim = 8;
  s.text_dim = 8;
  s.symptoms = 6;
  s.seed = seed;
  return s;
}

TEST(Synthetic, SplitCountsAndLayout) {
  const auto d = generate_synthetic(tiny_synthetic());
  EXPECT_EQ(d.manifest.classes.size(), 3u);
  EXPECT_EQ(d.manifest.images.size(), 60u);
  std::map<std::string, std::size_t> splits;
  for (const auto& img : d.manifest.images) ++splits[img.split];
  EXPECT_EQ(splits["train"], 36u);
  EXPECT_EQ(splits["val"], 12u);
  EXPECT_EQ(splits["test"], 12u);
  EXPECT_EQ(d.image_embeddings.rows(), 60u);
  EXPECT_EQ(d.image_embeddings.dim(), 8u);
  EXPECT_EQ(d.text_embeddings.rows(), 3u + 6u);
  EXPECT_NO_THROW(store::build_graph(d.manifest));
  for (double v : d.image_embeddings.values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(Synthetic, SeedDeterministic) {
  const auto a = generate_synthetic(tiny_synthetic(4));
  const auto b = generate_synthetic(tiny_synthetic(4));
  const auto c = generate_synthetic(tiny_synthetic(5));
  EXPECT_EQ(a.manifest, b.manifest);
  EXPECT_EQ(a.image_embeddings, b.image_embeddings);
  EXPECT_EQ(a.text_embeddings, b.text_embeddings);
  EXPECT_FALSE(a.image_embeddings == c.image_embeddings);
}

TEST(Synthetic, LargeSeparationIsNearestCentroidSeparable) {
  auto cfg = tiny_synthetic(1);
  cfg.separation = 10.0;
  cfg.noise = 0.5;
  const auto d = generate_synthetic(cfg);
  const std::size_t dim = cfg.dim;
  reference::Mat centroid(3, std::vector<double>(dim, 0.0));
  std::vector<double> count(3, 0.0);
  for (const auto& img : d.manifest.images) {
    if (img.split != "train") continue;
    const auto c = *d.manifest.class_index(img.class_name);
    for (std::size_t k = 0; k < dim; ++k) centroid[c][k] += d.image_embeddings.row(img.row)[k];
    count[c] += 1.0;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    for (double& x : centroid[c]) x /= count[c];
  }
  std::size_t correct = 0, total = 0;
  for (const auto& img : d.manifest.images) {
    if (img.split != "test") continue;
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < 3; ++c) {
      double dist = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dist += std::pow(d.image_embeddings.row(img.row)[k] - centroid[c][k], 2);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    correct += best == *d.manifest.class_index(img.class_name);
    ++total;
  }
  EXPECT_EQ(correct, total);
}

TEST(ExperimentConfig, ValidationRejectsOutOfRange) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.cdr.lambda = 1.5;
  EXPECT_EQ(thrown_kind([&] { c.validate(); }), ErrorKind::Config);
  c = {};
  c.kg_budget = 0;
  EXPECT_EQ(thrown_kind([&] { c.validate(); }), ErrorKind::Config);
  c = {};
  c.train.patience = 41;
  EXPECT_EQ(thrown_kind([&] { c.validate(); }), ErrorKind::Config);
  c = {};
  c.ablation.drop_fraction = 1.0;
  EXPECT_EQ(thrown_kind([&] { c.validate(); }), ErrorKind::Config);
  EXPECT_EQ(thrown_kind([] { ablation_from_string("partial"); }), ErrorKind::Config);
}

TEST(ExperimentConfig, Defaults) {
  const ExperimentConfig c;
  EXPECT_EQ(c.train.lr, 5e-5);
  EXPECT_EQ(c.train.weight_decay, 0.02);
  EXPECT_EQ(c.train.max_epochs, 40u);
  EXPECT_EQ(c.cdr.lambda, 0.2);
  EXPECT_EQ(c.retrieval.u_th, 0.3);
  EXPECT_EQ(c.model.hidden_dim, 768u);
}

TEST(EffectiveConfig, AblationModes) {
  ExperimentConfig c;
  c.cdr.lambda = 0.6;
  for (auto kind : {AblationKind::Full, AblationKind::NoCdr, AblationKind::NoKpiCdr, AblationKind::NoKgKpiCdr}) {
    c.ablation.kind = kind;
    const auto e = effective_config(c);
    EXPECT_EQ(e.cdr.lambda, kind == AblationKind::Full ? 0.6 : 0.0);
    EXPECT_EQ(e.model.knowledge_propagation, kind == AblationKind::Full || kind == AblationKind::NoCdr);
    EXPECT_EQ(ablation_from_string(to_string(kind)), kind);
  }
}

TEST(DropNodes, RemovesFractionAndKeepsEveryClass) {
  const auto d = generate_synthetic(tiny_synthetic());
  const auto out = drop_nodes(d.manifest, 0.25, 3);
  EXPECT_EQ(out.images.size(), 45u);
  EXPECT_EQ(out.symptoms.size(), 4u);  // round(1.5) = 2 dropped
  std::set<std::string> classes;
  for (const auto& img : out.images) classes.insert(img.class_name);
  EXPECT_EQ(classes.size(), 3u);
  EXPECT_NO_THROW(store::build_graph(out));
  EXPECT_EQ(drop_nodes(d.manifest, 0.25, 3), out);
  EXPECT_EQ(drop_nodes(d.manifest, 0.0, 3), d.manifest);
}

ExperimentConfig fast_config() {
  ExperimentConfig c;
  c.model.hidden_dim = 8;
  c.model.gat_heads = 2;
  c.model.xmodal_heads = 2;
  c.model.gat_layers = 1;
  c.model.xmodal_layers = 1;
  c.train.max_epochs = 6;
  c.train.patience = 6;
  c.train.lr = 3e-3;
  c.train.batch_size = 16;
  c.kg_budget = 8;
  return c;
}

struct Data {
  SyntheticDataset d = generate_synthetic(tiny_synthetic());
};

const Data& data() {
  static const Data instance;
  return instance;
}

std::unique_ptr<Workspace> workspace_for(const ExperimentConfig& c) {
  return build_workspace(data().d.manifest, data().d.image_embeddings, data().d.text_embeddings, c);
}

TEST(Training, LossDecreasesAndIsDeterministic) {
  const auto c = fast_config();
  const auto ws = workspace_for(c);
  const auto a = train(*ws, c);
  ASSERT_GE(a.history.size(), 5u);
  EXPECT_LT(a.history[4].train_loss, a.history[0].train_loss);
  const auto b = train(*ws, c);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(history_text(a.history), history_text(b.history));
  EXPECT_EQ(a.history.front().epoch, 1u);
}

TEST(Training, PatienceZeroStopsAfterOneFlatEpoch) {
  auto c = fast_config();
  c.train.patience = 0;
  c.train.lr = 0.0;  // val OA never improves after epoch 1
  const auto ws = workspace_for(c);
  const auto r = train(*ws, c);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(FirstPass, IndependentOfJobsAndBatch) {
  const auto c = fast_config();
  const auto ws = workspace_for(c);
  const model::ModelParams params(resolve_model_config(c.model, *ws), 1);
  const auto queries = ws->queries("test");
  const auto a = first_pass(params, *ws, queries, false, 5, 1);
  const auto b = first_pass(params, *ws, queries, false, 5, 3);
  ASSERT_EQ(a.size(), queries.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].logits, b[i].logits);
  const auto single = first_pass(params, *ws, queries, false, 1, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].logits.size(); ++k) EXPECT_NEAR(a[i].logits[k], single[i].logits[k], 1e-12);
  }
  EXPECT_EQ(thrown_kind([&] { ws->queries("holdout"); }), ErrorKind::Config);
}

TEST(Evaluate, LambdaZeroIsTheFirstPass) {
  auto c = fast_config();
  c.cdr.lambda = 0.0;
  const auto ws = workspace_for(c);
  const model::ModelParams params(resolve_model_config(c.model, *ws), 2);
  const auto report = evaluate(params, *ws, "test", c);
  ASSERT_EQ(report.predictions.size(), 12u);
  for (const auto& p : report.predictions) EXPECT_EQ(p.p_final, p.p_q);
  const auto again = evaluate(params, *ws, "test", c);
  EXPECT_EQ(eval_report_to_json(again).dump(), eval_report_to_json(report).dump());
}

TEST(Sweep, LambdaZeroMatchesNoCdrAblation) {
  auto c = fast_config();
  c.train.max_epochs = 3;
  c.train.patience = 3;
  const std::vector<double> zero{0.0};
  const auto rows = sweep(SweepParameter::Lambda, zero, data().d.manifest, data().d.image_embeddings,
                          data().d.text_embeddings, c);
  ASSERT_EQ(rows.size(), 1u);
  auto nc = c;
  nc.ablation.kind = AblationKind::NoCdr;
  const auto ab = run_ablation(data().d.manifest, data().d.image_embeddings, data().d.text_embeddings, nc);
  EXPECT_EQ(rows[0].report.oa, ab.report.oa);
  ASSERT_EQ(rows[0].report.predictions.size(), ab.report.predictions.size());
  for (std::size_t i = 0; i < ab.report.predictions.size(); ++i) {
    EXPECT_EQ(rows[0].report.predictions[i].p_final, ab.report.predictions[i].p_final);
  }
}

TEST(Sweep, OneRowPerGridValue) {
  auto c = fast_config();
  c.train.max_epochs = 2;
  c.train.patience = 2;
  const std::vector<double> grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const auto rows = sweep(SweepParameter::Lambda, grid, data().d.manifest, data().d.image_embeddings,
                          data().d.text_embeddings, c);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(rows[i].value, grid[i]);
  const auto csv = sweep_csv(SweepParameter::Lambda, rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.rfind("parameter,value,oa,macro_auc,seconds\n", 0), 0u);
  EXPECT_EQ(sweep_parameter_from_string("gat_layers"), SweepParameter::GatLayers);
}

}  // namespace
