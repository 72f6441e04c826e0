// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 only when
// every selected criterion passes. Pass criterion numbers as arguments to run a
// subset.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "casegraph/cdr/cdr.hpp"
#include "casegraph/cdr/report.hpp"
#include "casegraph/cli/commands.hpp"
#include "casegraph/error.hpp"
#include "casegraph/experiment/metrics.hpp"
#include "casegraph/experiment/pipeline.hpp"
#include "casegraph/experiment/synthetic.hpp"
#include "casegraph/model/kpi.hpp"
#include "casegraph/numerics/tape.hpp"
#include "casegraph/retrieval/retrieval.hpp"
#include "casegraph/schema.hpp"
#include "casegraph/store/embeddings.hpp"
#include "casegraph/store/graph_io.hpp"
#include "casegraph/store/manifest.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/reference.hpp"

namespace {

namespace fs = std::filesystem;
using namespace casegraph;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;

  // Records a failed check; the first few messages are kept.
  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (pass || std::count(detail.begin(), detail.end(), ';') < 4) detail += (detail.empty() ? "" : "; ") + what;
    pass = false;
  }
};

std::string num(double v, const char* spec = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch_root() { return fs::temp_directory_path() / ("casegraph_acceptance_" + std::to_string(::getpid())); }

fs::path scratch(const std::string& name) {
  const fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  if (code != 0) throw std::runtime_error("casegraph " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
}

model::ModelConfig small_model(std::size_t d, std::size_t heads, std::size_t in) {
  model::ModelConfig c;
  c.hidden_dim = d;
  c.gat_heads = heads;
  c.xmodal_heads = 2;
  c.gat_layers = 1;
  c.num_classes = 2;
  c.image_in_dim = in;
  c.text_in_dim = in;
  return c;
}

// ---------------------------------------------------------------------------

Verdict gradient_oracle() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20);
  constexpr int kTrials = 24;
  double worst = 0.0;
  std::set<std::string> groups;
  for (int trial = 0; trial < kTrials; ++trial) {
    auto t = gradcheck::random_trial(rng);
    model::ModelParams params(t.config, 1000 + trial);
    fixtures::randomize(params, rng, 0.5);
    for (const auto& [group, err] : gradcheck::relative_errors(params, t.world, t.label)) {
      groups.insert(group);
      worst = std::max(worst, err);
      v.check(err < 1e-4, "trial " + std::to_string(trial) + " " + group + " rel err " + num(err));
    }
  }
  const double secs = seconds_since(t0);
  v.check(groups.size() == 7, "only " + std::to_string(groups.size()) + " parameter groups covered");
  v.check(secs < 60.0, "took " + num(secs) + " s");
  if (v.pass) {
    v.detail = std::to_string(kTrials) + " configs, " + std::to_string(groups.size()) + " groups, max rel err " +
               num(worst) + ", " + num(secs, "%.1f") + " s";
  }
  return v;
}

Verdict formula_oracles() {
  Verdict v;
  std::mt19937_64 rng(21);

  double gat_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto c = small_model(trial % 2 ? 4 : 6, 1 + trial % 2, 3);
    c.node_activation = trial % 3 ? numerics::ActivationKind::Elu : numerics::ActivationKind::LeakyRelu;
    model::ModelParams params(c, trial);
    fixtures::randomize(params, rng, 0.8);
    const auto w = fixtures::tiny_world(rng, 3, 3, 2, 4);
    const retrieval::CaseSubgraph* subs[] = {&w.sub};
    const auto g = model::build_batch_graph(subs);
    const std::size_t n = g.node_count(), d = c.hidden_dim;
    const auto h = fixtures::random_vector(rng, n * d);
    numerics::Tape tape;
    model::ParamBinding p(tape, std::as_const(params));
    const auto got = model::gat_layer(p, 0, tape.constant(numerics::Tensor::matrix(n, d, h)), g, {}).value();
    reference::Mat hm(n), ai, aj;
    for (std::size_t i = 0; i < n; ++i) hm[i].assign(h.begin() + i * d, h.begin() + (i + 1) * d);
    for (std::size_t hd = 0; hd < c.gat_heads; ++hd) {
      ai.push_back(params.get("gat.0.head" + std::to_string(hd) + ".att_i").values());
      aj.push_back(params.get("gat.0.head" + std::to_string(hd) + ".att_j").values());
    }
    const auto want = reference::gat_layer(hm, reference::adjacency(w.sub), reference::from_tensor(params.get("gat.0.weight")),
                                           ai, aj, c.leaky_slope, c.node_activation);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) gat_worst = std::max(gat_worst, std::abs(got.at(i, j) - want[i][j]));
    }
  }
  v.check(gat_worst <= 1e-9, "GAT deviates by " + num(gat_worst));

  std::size_t trunc_mismatch = 0;
  std::uniform_int_distribution<std::size_t> length(1, 12), keep(1, 4);
  std::uniform_real_distribution<double> sim(-0.2, 1.0), th(0.01, 1.5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> sims(length(rng));
    for (auto& s : sims) s = sim(rng);
    std::sort(sims.rbegin(), sims.rend());
    retrieval::RetrievalResult ranked;
    for (std::size_t i = 0; i < sims.size(); ++i) ranked.items.push_back({i, sims[i]});
    retrieval::RetrievalConfig cfg;
    cfg.k = 12;
    cfg.u_th = th(rng);
    cfg.min_keep = keep(rng);
    const auto got = retrieval::adaptive_truncate(ranked, cfg);
    trunc_mismatch += got.size() != reference::truncation_count(sims, cfg.u_th, cfg.min_keep, cfg.sim_floor);
  }
  v.check(trunc_mismatch == 0, std::to_string(trunc_mismatch) + " of 1000 truncations differ");

  double auc_worst = 0.0;
  std::uniform_int_distribution<std::size_t> label(0, 2);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> labels(30);
    reference::Mat scores(30);
    for (std::size_t i = 0; i < 30; ++i) {
      labels[i] = label(rng);
      for (int c = 0; c < 3; ++c) {
        scores[i].push_back(trial % 2 ? coarse(rng) / 4.0 : fixtures::random_vector(rng, 1, 0.0, 1.0)[0]);
      }
    }
    const double got = experiment::macro_auc(labels, scores, 3).macro;
    auc_worst = std::max(auc_worst, std::abs(got - reference::pairwise_macro_auc(labels, scores, 3)));
  }
  v.check(auc_worst <= 1e-9, "macro-AUC deviates by " + num(auc_worst));

  bool fuse_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 8;
    const auto a = fixtures::random_vector(rng, d), b = fixtures::random_vector(rng, d);
    std::vector<double> want = a;
    want.insert(want.end(), b.begin(), b.end());
    for (std::size_t i = 0; i < d; ++i) want.push_back(std::abs(a[i] - b[i]));
    for (std::size_t i = 0; i < d; ++i) want.push_back(a[i] * b[i]);
    fuse_ok = fuse_ok && model::fuse_features(a, b) == want;
  }
  v.check(fuse_ok, "fuse_features differs from hand concatenation");
  if (v.pass) {
    v.detail = "GAT max dev " + num(gat_worst) + " over 100 stars, 1000/1000 truncations, AUC max dev " +
               num(auc_worst) + ", fuse exact";
  }
  return v;
}

Verdict cdr_identities() {
  Verdict v;
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  std::size_t endpoint_failures = 0;
  double sum_worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const auto pq = fixtures::random_distribution(rng, n), ps = fixtures::random_distribution(rng, n);
    endpoint_failures += cdr::refine(pq, ps, 0.0).p_final != pq;
    endpoint_failures += cdr::refine(pq, ps, 1.0).p_final != ps;
    double total = 0.0;
    for (double x : cdr::refine(pq, ps, lam(rng)).p_final) total += x;
    sum_worst = std::max(sum_worst, std::abs(total - 1.0));
  }
  v.check(endpoint_failures == 0, std::to_string(endpoint_failures) + " endpoint identities not bitwise");
  v.check(sum_worst <= 1e-9, "P_final sum deviates by " + num(sum_worst));

  const std::vector<double> pq{0.6, 0.4}, ps{0.2, 0.8};
  const auto r = cdr::refine(pq, ps, 0.5);
  const std::vector<double> want{0.4, 0.6};
  v.check(r.p_final == want, "worked example gives [" + num(r.p_final[0], "%.17g") + ", " +
                                 num(r.p_final[1], "%.17g") + "], not exactly [0.4, 0.6]");
  if (v.pass) v.detail = "endpoints bitwise over 10^4 bundles, max sum dev " + num(sum_worst) + ", worked example exact";
  return v;
}

Verdict normalization_invariants() {
  Verdict v;
  std::mt19937_64 rng(23);
  double row_worst = 0.0, weight_worst = 0.0, scale_worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto c = small_model(4, std::size_t{1} << (trial % 3), 3);
    c.gat_layers = 1 + trial % 2;
    c.xmodal_heads = 1 + trial % 2;
    model::ModelParams params(c, trial);
    fixtures::randomize(params, rng, 0.8);
    auto w = fixtures::tiny_world(rng, 3, 3, 2, 6);
    const model::QueryInput q{w.query, &w.sub};
    model::ForwardTrace trace;
    model::infer_logits(params, std::span(&q, 1), {&w.graph, &w.image, &w.text}, &trace);
    const std::size_t n = w.sub.nodes.size();
    for (const auto& layer : trace.gat) {
      for (const auto& head : layer.alpha) {
        std::vector<double> rows(n, 0.0);
        for (std::size_t e = 0; e < head.size(); ++e) rows[trace.edge_targets[e]] += head[e];
        for (double s : rows) row_worst = std::max(row_worst, std::abs(s - 1.0));
      }
    }
    for (const auto& block : trace.cross_modal) {
      // One key per query, so each head's row is a single entry.
      for (double x : block.kg_weights) row_worst = std::max(row_worst, std::abs(x - 1.0));
      for (double x : block.img_weights) row_worst = std::max(row_worst, std::abs(x - 1.0));
    }
    double total = 0.0;
    for (double x : trace.aggregate_weights) total += x;
    weight_worst = std::max(weight_worst, std::abs(total - 1.0));

    // Scaling every retained similarity by one positive factor leaves z_kg unchanged.
    const double k = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    for (auto& item : w.sub.retained) item.similarity *= k;
    model::ForwardTrace scaled;
    const model::QueryInput qs{w.query, &w.sub};
    model::infer_logits(params, std::span(&qs, 1), {&w.graph, &w.image, &w.text}, &scaled);
    const auto& a = trace.z_kg.values();
    const auto& b = scaled.z_kg.values();
    for (std::size_t i = 0; i < a.size(); ++i) scale_worst = std::max(scale_worst, std::abs(a[i] - b[i]));
  }
  for (int trial = 0; trial < 1000; ++trial) {
    auto sims = fixtures::random_vector(rng, 1 + trial % 8, 0.01, 1.0);
    const auto base = model::knowledge_weights(sims);
    const double k = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    for (double& s : sims) s *= k;
    const auto scaled = model::knowledge_weights(sims);
    double total = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
      total += base[i];
      scale_worst = std::max(scale_worst, std::abs(base[i] - scaled[i]));
    }
    weight_worst = std::max(weight_worst, std::abs(total - 1.0));
  }
  v.check(row_worst <= 1e-9, "attention row sum deviates by " + num(row_worst));
  v.check(weight_worst <= 1e-9, "knowledge weights sum deviates by " + num(weight_worst));
  v.check(scale_worst <= 1e-9, "scaling changes the aggregate by " + num(scale_worst));
  if (v.pass) {
    v.detail = "max row dev " + num(row_worst) + ", weight sum dev " + num(weight_worst) + ", scaling dev " +
               num(scale_worst);
  }
  return v;
}

Verdict end_to_end() {
  Verdict v;
  const auto run = [](std::uint64_t seed, experiment::AblationKind kind, double* secs) {
    const auto t0 = Clock::now();
    experiment::SyntheticConfig sc;
    sc.seed = seed;
    const auto ds = experiment::generate_synthetic(sc);
    experiment::ExperimentConfig c;
    c.seed = seed;
    c.ablation.kind = kind;
    const double oa = experiment::run_ablation(ds.manifest, ds.image_embeddings, ds.text_embeddings, c).report.oa;
    if (secs != nullptr) *secs = seconds_since(t0);
    return oa;
  };
  double secs = 0.0;
  const double oa0 = run(0, experiment::AblationKind::Full, &secs);
  v.check(oa0 >= 0.95, "seed 0 test OA " + num(oa0, "%.4f") + " < 0.95");
  v.check(secs <= 300.0, "seed 0 run took " + num(secs, "%.1f") + " s");

  std::vector<double> full{oa0}, plain;
  for (std::uint64_t seed = 1; seed < 5; ++seed) full.push_back(run(seed, experiment::AblationKind::Full, nullptr));
  for (std::uint64_t seed = 0; seed < 5; ++seed) plain.push_back(run(seed, experiment::AblationKind::NoKpiCdr, nullptr));
  const auto mean = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double y : x) s += y;
    return s / static_cast<double>(x.size());
  };
  const double mf = mean(full), mp = mean(plain);
  v.check(mf >= mp, "mean OA full " + num(mf, "%.4f") + " < no_kpi_cdr " + num(mp, "%.4f"));
  std::string list;
  for (std::size_t i = 0; i < full.size(); ++i) list += (i ? "/" : "") + num(full[i], "%.3f");
  std::string plain_list;
  for (std::size_t i = 0; i < plain.size(); ++i) plain_list += (i ? "/" : "") + num(plain[i], "%.3f");
  const std::string summary = "seed 0 OA " + num(oa0, "%.4f") + " in " + num(secs, "%.1f") + " s; mean OA full " +
                              num(mf, "%.4f") + " (" + list + ") vs no_kpi_cdr " + num(mp, "%.4f") + " (" +
                              plain_list + ")";
  v.detail = v.pass ? summary : v.detail + "; " + summary;
  return v;
}

// A synthetic dataset written to disk and one model trained on it at the
// default architecture, shared by the determinism and report criteria.
struct Trained {
  fs::path data;
  fs::path run_a;
  fs::path run_b;
  std::vector<std::string> train_flags;

  fs::path manifest() const { return data / "manifest.json"; }
};

const Trained& trained() {
  static const Trained t = [] {
    Trained t;
    t.data = scratch("data");
    t.run_a = scratch("train_a");
    t.run_b = scratch("train_b");
    cli({"synth", "--output-dir", t.data.string()});
    t.train_flags = {"--manifest", t.manifest().string(), "--max-epochs", "3", "--patience", "1"};
    auto a = t.train_flags, b = t.train_flags;
    a.insert(a.begin(), "train");
    b.insert(b.begin(), "train");
    a.insert(a.end(), {"--output-dir", t.run_a.string()});
    b.insert(b.end(), {"--output-dir", t.run_b.string()});
    cli(a);
    cli(b);
    return t;
  }();
  return t;
}

std::vector<std::string> test_queries(const Trained& t) {
  std::vector<std::string> ids;
  for (const auto& r : store::filter_split(store::load_manifest(t.manifest()), "test").images) ids.push_back(r.id);
  return ids;
}

Verdict determinism() {
  Verdict v;
  const auto& t = trained();
  const std::string ckpt_a = read_bytes(t.run_a / "checkpoint.bin");
  v.check(!ckpt_a.empty() && ckpt_a == read_bytes(t.run_b / "checkpoint.bin"), "checkpoints differ");
  v.check(read_bytes(t.run_a / "train_summary.json") == read_bytes(t.run_b / "train_summary.json"),
          "train summaries differ");

  std::vector<fs::path> evals, reports;
  for (const auto& run : {t.run_a, t.run_b}) {
    const fs::path e = scratch("eval_" + run.filename().string());
    cli({"evaluate", "--manifest", t.manifest().string(), "--checkpoint", (run / "checkpoint.bin").string(),
         "--output-dir", e.string()});
    evals.push_back(e / "eval_report.json");
    const fs::path x = scratch("explain_" + run.filename().string());
    cli({"explain", "--manifest", t.manifest().string(), "--checkpoint", (run / "checkpoint.bin").string(), "--query",
         test_queries(t).front(), "--output-dir", x.string()});
    reports.push_back(x / "evidence_report.json");
  }
  v.check(read_bytes(evals[0]) == read_bytes(evals[1]), "eval reports differ");
  v.check(read_bytes(reports[0]) == read_bytes(reports[1]), "evidence reports differ");
  if (v.pass) {
    v.detail = "two training runs: checkpoints (" + std::to_string(ckpt_a.size()) +
               " bytes), eval reports and evidence reports byte-identical";
  }
  return v;
}

Verdict store_validation() {
  Verdict v;
  const auto six = store::build_graph(fixtures::six_entity_manifest());
  v.check(six.entity_count() == 6 && six.edge_count() == 6,
          "worked manifest gives " + std::to_string(six.entity_count()) + "/" + std::to_string(six.edge_count()));

  auto m = fixtures::sixty_entity_manifest();
  m.declared_entities = 60;
  m.declared_edges = 271;
  v.check(!fixtures::thrown_kind([&] { store::build_graph(m); }), "matching declared counts rejected");
  for (auto [entities, edges] : {std::pair<std::size_t, std::size_t>{60, 272}, {61, 271}, {59, 270}}) {
    m.declared_entities = entities;
    m.declared_edges = edges;
    v.check(fixtures::thrown_kind([&] { store::build_graph(m); }) == ErrorKind::Validation,
            "declared " + std::to_string(entities) + "/" + std::to_string(edges) + " accepted");
  }

  const fs::path dir = scratch("store");
  std::mt19937_64 rng(27);
  std::size_t graph_fail = 0, emb_fail = 0;
  std::uniform_int_distribution<std::size_t> extent(1, 9);
  std::normal_distribution<float> value(0.0f, 2.0f);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = store::build_graph(fixtures::random_manifest(rng));
    store::save_graph(g, dir / "kg.json");
    graph_fail += !(store::load_graph(dir / "kg.json") == g);
    const std::size_t r = extent(rng), d = extent(rng);
    std::vector<double> values(r * d);
    for (auto& x : values) x = static_cast<double>(value(rng));
    const store::EmbeddingMatrix e(r, d, values);
    store::save_embeddings(e, dir / "e.bin");
    emb_fail += !(store::load_embeddings(dir / "e.bin") == e);
  }
  v.check(graph_fail == 0, std::to_string(graph_fail) + " KG files did not round-trip");
  v.check(emb_fail == 0, std::to_string(emb_fail) + " embedding files did not round-trip");
  if (v.pass) v.detail = "6/6 worked manifest, 60/271 accepted iff matching, 100+100 file round trips lossless";
  return v;
}

Verdict evidence_reports() {
  Verdict v;
  const auto& t = trained();
  const auto ids = test_queries(t);
  double weight_worst = 0.0, recompute_worst = 0.0;
  for (const auto& id : ids) {
    const fs::path out = scratch("report");
    cli({"explain", "--manifest", t.manifest().string(), "--checkpoint", (t.run_a / "checkpoint.bin").string(),
         "--query", id, "--output-dir", out.string()});
    std::ifstream in(out / "evidence_report.json");
    const json doc = json::parse(in);
    const auto violations = schema_violations(doc, shipped_schema("evidence_report"));
    v.check(violations.empty(), id + ": " + (violations.empty() ? "" : violations.front()));
    std::ifstream pin(out / "prediction.json");
    v.check(schema_violations(json::parse(pin), shipped_schema("prediction")).empty(), id + ": prediction invalid");
    double total = 0.0;
    for (const auto& c : doc.at("cases")) total += c.at("weight").get<double>();
    weight_worst = std::max(weight_worst, std::abs(total - 1.0));
    const auto stored = doc.at("prediction").at("p_final").get<std::vector<double>>();
    const auto again = cdr::recompute_final(doc);
    v.check(again.size() == stored.size(), id + ": recomputed length differs");
    for (std::size_t k = 0; k < std::min(again.size(), stored.size()); ++k) {
      recompute_worst = std::max(recompute_worst, std::abs(again[k] - stored[k]));
    }
  }
  v.check(weight_worst <= 1e-9, "weights sum deviates by " + num(weight_worst));
  v.check(recompute_worst <= 1e-12, "recomputed P_final deviates by " + num(recompute_worst));
  if (v.pass) {
    v.detail = std::to_string(ids.size()) + " explain outputs valid, weight sum dev " + num(weight_worst) +
               ", recompute dev " + num(recompute_worst);
  }
  return v;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient oracle", gradient_oracle},
      {2, "formula oracles", formula_oracles},
      {3, "refinement identities", cdr_identities},
      {4, "normalization invariants", normalization_invariants},
      {5, "end-to-end synthetic", end_to_end},
      {6, "determinism", determinism},
      {7, "store validation", store_validation},
      {8, "evidence reports", evidence_reports},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail << " ("
              << num(seconds_since(t0), "%.1f") << " s)" << std::endl;
  }
  fs::remove_all(scratch_root());
  return failures == 0 ? 0 : 1;
}
