#include "casegraph/experiment/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "casegraph/error.hpp"
#include "casegraph/numerics/random.hpp"

namespace casegraph::experiment {

void SyntheticConfig::validate() const {
  if (classes < 2) fail(ErrorKind::Config, "synthetic data needs at least two classes");
  if (per_class == 0 || dim == 0 || text_dim == 0 || symptoms == 0) {
    fail(ErrorKind::Config, "synthetic counts and dims must be positive");
  }
  if (!(separation >= 0.0) || !(noise >= 0.0)) fail(ErrorKind::Config, "synthetic separation and noise must be nonnegative");
  if (!(symptom_on >= 0.0 && symptom_on <= 1.0) || !(symptom_off >= 0.0 && symptom_off <= 1.0)) {
    fail(ErrorKind::Config, "synthetic symptom probabilities must lie in [0, 1]");
  }
}

namespace {

std::vector<double> gaussian(numerics::Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, scale);
  return v;
}

std::vector<double> unit(std::vector<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) {
    v.assign(v.size(), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

void append_float_rounded(std::vector<double>& out, const std::vector<double>& row) {
  for (double x : row) out.push_back(static_cast<double>(static_cast<float>(x)));
}

std::string padded(std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return buf;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& c) {
  c.validate();
  numerics::Rng rng(c.seed, "synth");
  const double img_scale = c.noise / std::sqrt(static_cast<double>(c.dim));
  const double txt_scale = 0.5 / std::sqrt(static_cast<double>(c.text_dim));

  std::vector<std::vector<double>> centers, text_centers;
  for (std::size_t k = 0; k < c.classes; ++k) {
    auto center = unit(gaussian(rng, c.dim, 1.0));
    for (double& x : center) x *= c.separation;
    centers.push_back(std::move(center));
    text_centers.push_back(unit(gaussian(rng, c.text_dim, 1.0)));
  }

  store::DatasetManifest m;
  std::vector<double> text_values;
  for (std::size_t k = 0; k < c.classes; ++k) {
    auto t = text_centers[k];
    const auto jitter = gaussian(rng, c.text_dim, txt_scale);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] += jitter[j];
    append_float_rounded(text_values, unit(std::move(t)));
    m.classes.push_back({"class-" + std::to_string(k), k});
  }
  std::vector<std::size_t> owner(c.symptoms);
  for (std::size_t s = 0; s < c.symptoms; ++s) {
    owner[s] = s % c.classes;
    auto t = text_centers[owner[s]];
    const auto jitter = gaussian(rng, c.text_dim, 2.0 * txt_scale);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] += jitter[j];
    append_float_rounded(text_values, unit(std::move(t)));
    m.symptoms.push_back({"sym-" + padded(s, 2), "finding " + std::to_string(s) + " typical of class-" +
                                                     std::to_string(owner[s]),
                          c.classes + s});
  }

  std::vector<double> image_values;
  const std::size_t n_train = (c.per_class * 6) / 10;
  const std::size_t n_val = (c.per_class * 2) / 10;
  for (std::size_t k = 0; k < c.classes; ++k) {
    for (std::size_t i = 0; i < c.per_class; ++i) {
      auto v = centers[k];
      const auto noise = gaussian(rng, c.dim, img_scale);
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += noise[j];
      append_float_rounded(image_values, unit(std::move(v)));
      store::ImageRecord rec;
      rec.id = "img-" + std::to_string(k) + "-" + padded(i, 4);
      rec.class_name = m.classes[k].name;
      rec.row = m.images.size();
      for (std::size_t s = 0; s < c.symptoms; ++s) {
        if (rng.bernoulli(owner[s] == k ? c.symptom_on : c.symptom_off)) rec.symptoms.push_back(m.symptoms[s].id);
      }
      rec.split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
      m.images.push_back(std::move(rec));
    }
  }
  m.image_dim = c.dim;
  m.text_dim = c.text_dim;
  m.image_embeddings = "image_embeddings.bin";
  m.text_embeddings = "text_embeddings.bin";
  validate_manifest(m);

  SyntheticDataset out;
  const std::size_t text_rows = c.classes + c.symptoms;
  out.image_embeddings = store::EmbeddingMatrix(m.images.size(), c.dim, std::move(image_values), true);
  out.text_embeddings = store::EmbeddingMatrix(text_rows, c.text_dim, std::move(text_values), true);
  out.manifest = std::move(m);
  return out;
}

void write_synthetic(const SyntheticDataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  store::save_manifest(dataset.manifest, dir / "manifest.json");
  store::save_embeddings(dataset.image_embeddings, dir / dataset.manifest.image_embeddings);
  store::save_embeddings(dataset.text_embeddings, dir / dataset.manifest.text_embeddings);
}

}  // namespace casegraph::experiment
