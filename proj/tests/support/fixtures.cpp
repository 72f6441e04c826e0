#include "fixtures.hpp"

#include <algorithm>
#include <string>

namespace fixtures {

namespace store = casegraph::store;
namespace retrieval = casegraph::retrieval;

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(n);
  for (double& x : out) x = u(rng);
  return out;
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
  auto v = random_vector(rng, n, 0.01, 1.0);
  double total = 0.0;
  for (double x : v) total += x;
  for (double& x : v) x /= total;
  return v;
}

TinyWorld tiny_world(std::mt19937_64& rng, std::size_t image_dim, std::size_t text_dim, std::size_t classes,
                     std::size_t max_nodes) {
  std::vector<store::DiseaseNode> diseases;
  for (std::size_t c = 0; c < classes; ++c) diseases.push_back({"d" + std::to_string(c), c});
  std::vector<store::ImageNode> images{{"i0", 0}, {"i1", 1}, {"i2", 2}};
  std::vector<store::SymptomNode> symptoms{{"s0", "s0", classes}, {"s1", "s1", classes + 1}};
  std::vector<store::Edge> id{{0, 0}, {1, 0}, {2, classes > 1 ? 1 : 0}};
  std::vector<store::Edge> is{{0, 0}, {0, 1}, {1, 1}};
  TinyWorld w;
  w.graph = store::KnowledgeGraph(diseases, images, symptoms, id, is);
  w.image = store::EmbeddingMatrix(3, image_dim, random_vector(rng, 3 * image_dim));
  w.text = store::EmbeddingMatrix(classes + 2, text_dim, random_vector(rng, (classes + 2) * text_dim));
  std::uniform_real_distribution<double> sim(0.2, 1.0);
  // Candidate retained sets, each within four nodes:
  //   {i0}: i0, d0, s0, s1        {i1}: i1, d0, s1
  //   {i1, i0} needs 5 nodes      {i2}: i2, d
  //   {i1, i2} (one class): i1, i2, d0, s1
  std::vector<std::vector<std::size_t>> options{{0}, {1}, {2}};
  if (classes == 1) options.push_back({1, 2});
  if (max_nodes >= 5) options.push_back({1, 0});
  std::vector<std::size_t> pick;
  do {
    pick = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    retrieval::RetrievalResult r;
    std::vector<double> s;
    for (std::size_t k = 0; k < pick.size(); ++k) s.push_back(sim(rng));
    std::sort(s.rbegin(), s.rend());
    for (std::size_t k = 0; k < pick.size(); ++k) r.items.push_back({pick[k], s[k]});
    w.sub = retrieval::extract_subgraph(w.graph, r, "q");
  } while (w.sub.nodes.size() > max_nodes);
  w.query = random_vector(rng, image_dim);
  return w;
}

void randomize(casegraph::model::ModelParams& params, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (const auto& [name, tensor] : params.entries()) {
    auto value = tensor;
    const bool gain = name.size() > 6 && name.compare(name.size() - 6, 6, ".gamma") == 0;
    for (double& x : value.values()) x = (gain ? 1.0 : 0.0) + u(rng);
    params.assign(name, value);
  }
}

store::DatasetManifest six_entity_manifest() {
  store::DatasetManifest m;
  m.classes = {{"benign", 0}};
  m.symptoms = {{"s-a", "irregular margin", 1}, {"s-b", "calcification", 2}, {"s-c", "shadowing", 3}};
  m.images = {{"img-1", "benign", {"s-a", "s-b"}, 0, "train"}, {"img-2", "benign", {"s-b", "s-c"}, 1, "train"}};
  return m;
}

// 2 classes, 40 images, 18 symptoms; 31 images carry 6 symptoms and 9 carry 5.
// That is 60 entities and 40 + 31*6 + 9*5 = 271 edges.
store::DatasetManifest sixty_entity_manifest() {
  store::DatasetManifest m;
  m.classes = {{"a", 0}, {"b", 1}};
  for (std::size_t s = 0; s < 18; ++s) m.symptoms.push_back({"s" + std::to_string(s), "", 2 + s});
  for (std::size_t i = 0; i < 40; ++i) {
    store::ImageRecord r;
    r.id = "img" + std::to_string(i);
    r.class_name = i % 2 ? "b" : "a";
    r.row = i;
    const std::size_t count = i < 31 ? 6 : 5;
    for (std::size_t k = 0; k < count; ++k) r.symptoms.push_back("s" + std::to_string((i + k) % 18));
    m.images.push_back(r);
  }
  return m;
}

store::DatasetManifest random_manifest(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> classes(1, 4), lexicon(0, 6), images(1, 12);
  store::DatasetManifest m;
  const std::size_t c = classes(rng), v = lexicon(rng), n = images(rng);
  for (std::size_t i = 0; i < c; ++i) {
    m.classes.push_back({"class" + std::to_string(i), rng() % 2 ? std::optional<std::size_t>(i) : std::nullopt});
  }
  for (std::size_t s = 0; s < v; ++s) m.symptoms.push_back({"sym" + std::to_string(s), "text " + std::to_string(s), s});
  for (std::size_t i = 0; i < n; ++i) {
    store::ImageRecord r;
    r.id = "case-" + std::to_string(i);
    r.class_name = m.classes[rng() % c].name;
    r.row = i;
    for (std::size_t s = 0; s < v; ++s) {
      if (rng() % 3 == 0) r.symptoms.push_back(m.symptoms[s].id);
    }
    m.images.push_back(r);
  }
  return m;
}

}  // namespace fixtures
