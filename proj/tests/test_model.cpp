#include <cmath>
#include <random>
#include <set>
#include <utility>

#include <gtest/gtest.h>

#include "casegraph/error.hpp"
#include "casegraph/model/kpi.hpp"
#include "casegraph/model/params.hpp"
#include "casegraph/numerics/tape.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/reference.hpp"

namespace {

using namespace casegraph;
using namespace casegraph::model;
using numerics::Tape;
using numerics::Tensor;
using fixtures::thrown_kind;

ModelConfig small_config(std::size_t d = 4, std::size_t classes = 2, std::size_t in = 3) {
  ModelConfig c;
  c.hidden_dim = d;
  c.gat_heads = 2;
  c.xmodal_heads = 2;
  c.num_classes = classes;
  c.image_in_dim = in;
  c.text_in_dim = in;
  return c;
}

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

std::vector<double> row(const Tensor& t, std::size_t r) {
  return {t.data().begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
          t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols())};
}

TEST(Projection, IdentityWeightsReproduceTheEmbedding) {
  auto c = small_config(4, 2, 4);
  ModelParams params(c, 1);
  params.assign("proj.image.weight", identity(4));
  Tape tape;
  ParamBinding p(tape, std::as_const(params));
  const std::vector<double> e{0.25, -1.0, 3.5, 0.0};
  const std::vector<double> zero(4, 0.0);
  const std::span<const double> rows[] = {e, zero};
  const auto out = project_queries(p, rows).value();
  EXPECT_EQ(row(out, 0), e);
  EXPECT_EQ(row(out, 1), zero);
}

TEST(Projection, MatchesAffineOracle) {
  std::mt19937_64 rng(3);
  ModelParams params(small_config(4, 2, 5), 2);
  fixtures::randomize(params, rng, 0.7);
  Tape tape;
  ParamBinding p(tape, std::as_const(params));
  const auto e = fixtures::random_vector(rng, 5);
  const std::span<const double> rows[] = {e};
  const auto got = row(project_queries(p, rows).value(), 0);
  const auto want = reference::affine({e}, params.get("proj.image.weight"), params.get("proj.image.bias"))[0];
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
  const std::vector<double> wrong(4, 1.0);
  const std::span<const double> bad[] = {wrong};
  EXPECT_EQ(thrown_kind([&] { project_queries(p, bad); }), ErrorKind::Shape);
}

BatchGraph manual_graph(std::size_t nodes, std::vector<std::pair<std::size_t, std::size_t>> directed) {
  BatchGraph g;
  for (std::size_t i = 0; i < nodes; ++i) g.nodes.push_back({store::NodeKind::Image, i});
  g.node_offset = {0};
  std::sort(directed.begin(), directed.end());
  for (const auto& [t, s] : directed) {
    g.targets.push_back(t);
    g.sources.push_back(s);
  }
  return g;
}

TEST(GatLayer, SelfLoopOnlyGivesUnitAttention) {
  std::mt19937_64 rng(4);
  auto c = small_config();
  c.gat_layers = 1;
  ModelParams params(c, 3);
  fixtures::randomize(params, rng, 0.5);
  Tape tape;
  ParamBinding p(tape, std::as_const(params));
  const auto g = manual_graph(1, {{0, 0}});
  GatLayerTrace trace;
  gat_layer(p, 0, tape.constant(Tensor::matrix(1, 4, fixtures::random_vector(rng, 4))), g, {}, &trace);
  ASSERT_EQ(trace.alpha.size(), 2u);
  for (const auto& head : trace.alpha) EXPECT_EQ(head, std::vector<double>{1.0});
}

TEST(GatLayer, IdenticalNeighborsShareAttention) {
  std::mt19937_64 rng(5);
  auto c = small_config();
  c.gat_layers = 1;
  ModelParams params(c, 3);
  fixtures::randomize(params, rng, 0.5);
  Tape tape;
  ParamBinding p(tape, std::as_const(params));
  const auto g = manual_graph(2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  auto x = fixtures::random_vector(rng, 4);
  x.insert(x.end(), x.begin(), x.end());
  GatLayerTrace trace;
  gat_layer(p, 0, tape.constant(Tensor::matrix(2, 4, x)), g, {}, &trace);
  for (const auto& head : trace.alpha) {
    for (double a : head) EXPECT_NEAR(a, 0.5, 1e-15);
  }
}

TEST(GatLayer, MatchesDenseOracleOnRandomStars) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = small_config(trial % 2 ? 4 : 6, 2);
    c.gat_heads = trial % 2 ? 2 : 3;
    c.gat_layers = 1;
    c.xmodal_heads = 2;
    c.node_activation = trial % 3 == 0 ? numerics::ActivationKind::LeakyRelu : numerics::ActivationKind::Elu;
    ModelParams params(c, trial);
    fixtures::randomize(params, rng, 0.8);
    const auto w = fixtures::tiny_world(rng, 3, 3, 2, 4);
    const retrieval::CaseSubgraph* subs[] = {&w.sub};
    const auto g = build_batch_graph(subs);
    const std::size_t n = g.node_count();
    const auto h = fixtures::random_vector(rng, n * c.hidden_dim);

    Tape tape;
    ParamBinding p(tape, std::as_const(params));
    GatLayerTrace trace;
    const auto got = gat_layer(p, 0, tape.constant(Tensor::matrix(n, c.hidden_dim, h)), g, {}, &trace).value();

    reference::Mat hm(n);
    for (std::size_t i = 0; i < n; ++i) hm[i].assign(h.begin() + i * c.hidden_dim, h.begin() + (i + 1) * c.hidden_dim);
    reference::Mat ai, aj, alpha;
    for (std::size_t hd = 0; hd < c.gat_heads; ++hd) {
      ai.push_back(params.get("gat.0.head" + std::to_string(hd) + ".att_i").values());
      aj.push_back(params.get("gat.0.head" + std::to_string(hd) + ".att_j").values());
    }
    const auto want = reference::gat_layer(hm, reference::adjacency(w.sub), reference::from_tensor(params.get("gat.0.weight")),
                                           ai, aj, c.leaky_slope, c.node_activation, &alpha);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c.hidden_dim; ++j) EXPECT_NEAR(got.at(i, j), want[i][j], 1e-9);
    }
    for (std::size_t hd = 0; hd < c.gat_heads; ++hd) {
      std::vector<double> rowsum(n, 0.0);
      for (std::size_t e = 0; e < g.targets.size(); ++e) {
        EXPECT_NEAR(trace.alpha[hd][e], alpha[hd * n + g.targets[e]][g.sources[e]], 1e-12);
        rowsum[g.targets[e]] += trace.alpha[hd][e];
      }
      for (double s : rowsum) EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(BatchGraph, EdgesAreSymmetricWithSelfLoops) {
  std::mt19937_64 rng(7);
  const auto a = fixtures::tiny_world(rng, 3, 3, 2, 5);
  const auto b = fixtures::tiny_world(rng, 3, 3, 2, 5);
  const retrieval::CaseSubgraph* subs[] = {&a.sub, &b.sub};
  const auto g = build_batch_graph(subs);
  EXPECT_EQ(g.node_count(), a.sub.nodes.size() + b.sub.nodes.size());
  EXPECT_EQ(g.targets.size(), g.node_count() + 2 * (a.sub.edges.size() + b.sub.edges.size()));
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t e = 0; e < g.targets.size(); ++e) edges.emplace(g.targets[e], g.sources[e]);
  for (const auto& [t, s] : edges) EXPECT_TRUE(edges.count({s, t}));
  for (std::size_t i = 0; i < g.node_count(); ++i) EXPECT_TRUE(edges.count({i, i}));
  EXPECT_EQ(g.image_nodes.size(), a.sub.retained.size() + b.sub.retained.size());
}

TEST(KnowledgeWeights, Examples) {
  const std::vector<double> one{0.37};
  EXPECT_EQ(knowledge_weights(one), std::vector<double>{1.0});
  const std::vector<double> two{0.6, 0.2};
  const auto w = knowledge_weights(two);
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
  const std::vector<double> bad{0.5, 0.0};
  EXPECT_EQ(thrown_kind([&] { knowledge_weights(bad); }), ErrorKind::Domain);
}

TEST(KnowledgeWeights, InvariantUnderCommonScaling) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> sim(0.01, 1.0), scale(0.1, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + trial % 6);
    for (double& x : s) x = sim(rng);
    const double k = scale(rng);
    std::vector<double> scaled = s;
    for (double& x : scaled) x *= k;
    const auto a = knowledge_weights(s), b = knowledge_weights(scaled);
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_NEAR(a[i], b[i], 1e-12);
      total += a[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(CrossModal, SingleKeyAttentionIsOne) {
  std::mt19937_64 rng(9);
  auto c = small_config();
  ModelParams params(c, 4);
  fixtures::randomize(params, rng, 1.0);
  Tape tape;
  ParamBinding p(tape, std::as_const(params));
  const auto v = tape.constant(Tensor::matrix(3, 4, fixtures::random_vector(rng, 12)));
  const auto z = tape.constant(Tensor::matrix(3, 4, fixtures::random_vector(rng, 12)));
  CrossModalTrace trace;
  cross_modal_block(p, 0, v, z, {}, &trace);
  EXPECT_EQ(trace.kg_weights.size(), 6u);
  EXPECT_EQ(trace.img_weights.size(), 6u);
  for (double w : trace.kg_weights) EXPECT_EQ(w, 1.0);
  for (double w : trace.img_weights) EXPECT_EQ(w, 1.0);
}

TEST(CrossModal, IdentityAttentionAndZeroMlpReduceToLayerNormChain) {
  auto c = small_config();
  ModelParams params(c, 5);
  for (const auto& [name, t] : std::vector(params.entries())) {
    if (name.rfind("xmodal.0.", 0) != 0) continue;
    if (name.find(".mlp.") != std::string::npos) {
      params.assign(name, zeros_like(t));
    } else if (name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0) {
      params.assign(name, identity(4));
    }
  }
  const std::vector<double> v{0.5, -1.0, 2.0, 0.25}, z{1.0, 0.0, -0.5, 3.0};
  Tape tape;
  ParamBinding p(tape, std::as_const(params));
  const auto [v2, z2] = cross_modal_block(p, 0, tape.constant(Tensor::matrix(1, 4, v)),
                                          tape.constant(Tensor::matrix(1, 4, z)), {});
  // With identity projections each stream receives the other stream's input.
  const std::vector<double> gamma(4, 1.0), beta(4, 0.0);
  std::vector<double> zv(4), vv(4);
  for (std::size_t i = 0; i < 4; ++i) {
    zv[i] = z[i] + v[i];
    vv[i] = v[i] + v[i];
  }
  const auto want_z = reference::layer_norm(reference::layer_norm(zv, gamma, beta, c.layer_norm_eps), gamma, beta,
                                            c.layer_norm_eps);
  const auto want_v = reference::layer_norm(reference::layer_norm(vv, gamma, beta, c.layer_norm_eps), gamma, beta,
                                            c.layer_norm_eps);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(z2.value()[i], want_z[i], 1e-12);
    EXPECT_NEAR(v2.value()[i], want_v[i], 1e-12);
  }
}

TEST(ModelConfig, DefaultWidths) {
  ModelConfig c;
  c.num_classes = 3;
  c.image_in_dim = 32;
  c.text_in_dim = 32;
  EXPECT_EQ(c.hidden_dim, 768u);
  EXPECT_EQ(c.fused_dim(), 3072u);
  c.knowledge_propagation = false;
  EXPECT_EQ(c.fused_dim(), 1536u);
  const ModelParams params(small_config(8, 3, 5), 1);
  EXPECT_EQ(params.get("head.fc1.weight").shape(), (std::vector<std::size_t>{32, 8}));
  EXPECT_EQ(params.get("head.fc2.weight").shape(), (std::vector<std::size_t>{8, 3}));
  EXPECT_EQ(params.get("gat.1.weight").shape(), (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(params.get("gat.0.head1.att_j").shape(), (std::vector<std::size_t>{4, 1}));
}

TEST(ModelConfig, RejectsInvalid) {
  auto c = small_config();
  c.gat_heads = 3;
  EXPECT_EQ(thrown_kind([&] { c.validate(); }), ErrorKind::Config);
  c = small_config();
  c.num_classes = 1;
  EXPECT_EQ(thrown_kind([&] { c.validate(); }), ErrorKind::Config);
  c = small_config();
  c.mlp_dropout = 1.0;
  EXPECT_EQ(thrown_kind([&] { c.validate(); }), ErrorKind::Config);
  EXPECT_EQ(config_from_json(config_to_json(small_config())), small_config());
}

TEST(FuseFeatures, HandConcatenation) {
  const std::vector<double> v{1, 2}, z{3, 5};
  EXPECT_EQ(fuse_features(v, z), (std::vector<double>{1, 2, 3, 5, 2, 3, 3, 10}));
  EXPECT_EQ(fuse_features(v, v), (std::vector<double>{1, 2, 1, 2, 0, 0, 1, 4}));
  Tape tape;
  const auto fused = fuse_features(tape.constant(Tensor::row(v)), tape.constant(Tensor::row(z)));
  EXPECT_EQ(fused.value().values(), (std::vector<double>{1, 2, 3, 5, 2, 3, 3, 10}));
}

TEST(Classifier, ZeroWeightsReturnTheBias) {
  auto c = small_config();
  ModelParams params(c, 6);
  params.assign("head.fc1.weight", zeros_like(params.get("head.fc1.weight")));
  params.assign("head.fc2.weight", zeros_like(params.get("head.fc2.weight")));
  params.assign("head.fc2.bias", Tensor({2}, std::vector<double>{0.3, -0.7}));
  std::mt19937_64 rng(1);
  const auto w = fixtures::tiny_world(rng, 3, 3, 2, 5);
  const QueryInput q{w.query, &w.sub};
  const auto logits = infer_logits(params, std::span(&q, 1), {&w.graph, &w.image, &w.text}).front();
  EXPECT_EQ(logits, (std::vector<double>{0.3, -0.7}));
}

void expect_forward_matches_reference(const ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params(c, seed);
  fixtures::randomize(params, rng, 0.6);
  const auto w = fixtures::tiny_world(rng, c.image_in_dim, c.text_in_dim, c.num_classes, 4);
  const QueryInput q{w.query, &w.sub};
  ForwardTrace trace;
  const auto got = infer_logits(params, std::span(&q, 1), {&w.graph, &w.image, &w.text}, &trace).front();
  const auto want = reference::forward(params, w.query, w.sub, w.graph, w.image, w.text);
  ASSERT_EQ(got.size(), want.logits.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want.logits[i], 1e-9) << "seed " << seed;
  for (std::size_t i = 0; i < c.hidden_dim; ++i) {
    EXPECT_NEAR(trace.v_query[i], want.v_query[i], 1e-9);
    EXPECT_NEAR(trace.z_kg[i], want.z_kg[i], 1e-9);
  }
  double total = 0.0;
  for (double a : trace.aggregate_weights) total += a;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Forward, MatchesReferenceModel) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) expect_forward_matches_reference(small_config(4, 2), seed);
  for (std::uint64_t seed = 20; seed < 30; ++seed) expect_forward_matches_reference(small_config(6, 3), seed);
}

TEST(Forward, ZeroGatLayersMatchesReference) {
  auto c = small_config();
  c.gat_layers = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) expect_forward_matches_reference(c, seed);
}

TEST(Forward, WithoutPropagationMatchesReference) {
  auto c = small_config();
  c.knowledge_propagation = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) expect_forward_matches_reference(c, seed);
  const ModelParams params(c, 1);
  EXPECT_FALSE(params.contains("proj.text.weight"));
  EXPECT_FALSE(params.contains("gat.0.weight"));
}

TEST(Forward, EvalIsDeterministicAndBatchInvariant) {
  std::mt19937_64 rng(11);
  const auto c = small_config();
  ModelParams params(c, 2);
  fixtures::randomize(params, rng, 0.5);
  const auto w = fixtures::tiny_world(rng, 3, 3, 2, 5);
  auto other = w;
  other.query = fixtures::random_vector(rng, 3);
  const FeatureSource f{&w.graph, &w.image, &w.text};
  const QueryInput one[] = {{w.query, &w.sub}};
  const QueryInput both[] = {{w.query, &w.sub}, {other.query, &w.sub}};
  const auto a = infer_logits(params, one, f);
  EXPECT_EQ(infer_logits(params, one, f), a);
  const auto b = infer_logits(params, both, f);
  ASSERT_EQ(b.size(), 2u);
  for (std::size_t i = 0; i < a[0].size(); ++i) EXPECT_NEAR(b[0][i], a[0][i], 1e-12);
}

TEST(Forward, TrainModeNeedsRngAndDropsOut) {
  std::mt19937_64 rng(12);
  const auto c = small_config();
  ModelParams params(c, 2);
  fixtures::randomize(params, rng, 0.5);
  const auto w = fixtures::tiny_world(rng, 3, 3, 2, 5);
  const QueryInput q[] = {{w.query, &w.sub}};
  Tape tape;
  ParamBinding p(tape, params);
  EXPECT_EQ(thrown_kind([&] { forward(p, q, {&w.graph, &w.image, &w.text}, {Mode::Train, nullptr}); }),
            ErrorKind::Usage);
  numerics::Rng r1(1, "dropout"), r2(1, "dropout");
  Tape t1, t2;
  ParamBinding p1(t1, params), p2(t2, params);
  const auto a = forward(p1, q, {&w.graph, &w.image, &w.text}, {Mode::Train, &r1}).value();
  const auto b = forward(p2, q, {&w.graph, &w.image, &w.text}, {Mode::Train, &r2}).value();
  EXPECT_EQ(a, b);
}

TEST(Gradients, MatchCentralDifferences) {
  std::mt19937_64 rng(2025);
  for (int trial = 0; trial < 6; ++trial) {
    auto t = gradcheck::random_trial(rng);
    ModelParams params(t.config, trial);
    fixtures::randomize(params, rng, 0.5);
    const auto errors = gradcheck::relative_errors(params, t.world, t.label);
    EXPECT_EQ(errors.size(), 7u);
    for (const auto& [group, err] : errors) EXPECT_LT(err, 1e-4) << "trial " << trial << " group " << group;
  }
}

TEST(Checkpoint, RoundTripsExactly) {
  std::mt19937_64 rng(13);
  ModelParams params(small_config(4, 3), 77);
  fixtures::randomize(params, rng, 2.0);
  const auto bytes = encode_checkpoint(params, "{\"k\":1}");
  const auto ck = decode_checkpoint(bytes);
  EXPECT_EQ(ck.params, params);
  EXPECT_EQ(ck.params.seed(), 77u);
  EXPECT_EQ(ck.params.config(), params.config());
  EXPECT_EQ(ck.run_echo, "{\"k\":1}");
  EXPECT_EQ(encode_checkpoint(ck.params, ck.run_echo), bytes);
  auto broken = bytes;
  broken[1] = 'Z';
  EXPECT_EQ(thrown_kind([&] { decode_checkpoint(broken); }), ErrorKind::Format);
  broken = bytes;
  broken.resize(bytes.size() - 3);
  EXPECT_EQ(thrown_kind([&] { decode_checkpoint(broken); }), ErrorKind::Format);
}

TEST(ModelParams, SeededInitialization) {
  const auto c = small_config();
  EXPECT_EQ(ModelParams(c, 5), ModelParams(c, 5));
  EXPECT_FALSE(ModelParams(c, 5) == ModelParams(c, 6));
  const ModelParams p(c, 5);
  EXPECT_EQ(p.get("xmodal.1.img.norm2.gamma").values(), std::vector<double>(4, 1.0));
  EXPECT_EQ(p.get("head.fc1.bias").values(), std::vector<double>(4, 0.0));
  EXPECT_EQ(thrown_kind([&] { p.get("nope"); }), ErrorKind::Lookup);
}

}  // namespace
