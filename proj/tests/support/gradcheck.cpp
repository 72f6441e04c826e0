#include "support/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "casegraph/model/kpi.hpp"
#include "casegraph/numerics/tape.hpp"

namespace gradcheck {

namespace model = casegraph::model;
namespace ops = casegraph::numerics::ops;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Cross-entropy from plain logits, independent of the tape op.
double loss_of(const model::ModelParams& params, const fixtures::TinyWorld& w, std::size_t label) {
  const model::QueryInput q{w.query, &w.sub};
  const model::FeatureSource f{&w.graph, &w.image, &w.text};
  const auto logits = model::infer_logits(params, std::span(&q, 1), f).front();
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return m + std::log(z) - logits[label];
}

}  // namespace

std::string group_of(const std::string& name) {
  if (name.rfind("proj.", 0) == 0) return "proj";
  if (name.rfind("head.", 0) == 0) return "head";
  if (name.rfind("gat.", 0) == 0) return ends_with(name, ".weight") ? "gat.weight" : "gat.attention";
  if (ends_with(name, ".gamma") || ends_with(name, ".beta")) return "layer_norm";
  if (name.find(".mlp.") != std::string::npos) return "mlp";
  return "xmodal.attention";
}

std::map<std::string, double> relative_errors(model::ModelParams& params, const fixtures::TinyWorld& w,
                                              std::size_t label, double h) {
  params.zero_grad();
  {
    casegraph::numerics::Tape tape;
    model::ParamBinding binding(tape, params);
    const model::QueryInput q{w.query, &w.sub};
    const model::FeatureSource f{&w.graph, &w.image, &w.text};
    const auto logits = model::forward(binding, std::span(&q, 1), f, model::ForwardContext{});
    tape.backward(ops::cross_entropy(logits, label));
  }
  struct Acc {
    double diff = 0.0, analytic = 0.0, numeric = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& [name, tensor] : params.entries()) {
    const std::vector<double> analytic = tensor.grad ? *tensor.grad : std::vector<double>(tensor.size(), 0.0);
    auto& a = acc[group_of(name)];
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      auto& x = params.get(name)[i];
      const double saved = x;
      x = saved + h;
      const double up = loss_of(params, w, label);
      x = saved - h;
      const double down = loss_of(params, w, label);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      a.diff = std::max(a.diff, std::abs(analytic[i] - numeric));
      a.analytic = std::max(a.analytic, std::abs(analytic[i]));
      a.numeric = std::max(a.numeric, std::abs(numeric));
    }
  }
  std::map<std::string, double> out;
  for (const auto& [group, a] : acc) out[group] = a.diff / std::max({a.analytic, a.numeric, 1e-8});
  return out;
}

Trial random_trial(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> coin(0, 1), classes(2, 3), layers(1, 2), dim(2, 5);
  Trial t;
  const std::size_t heads = 1 + coin(rng);
  t.config.gat_heads = heads;
  t.config.xmodal_heads = 1 + coin(rng);
  // d = 2 is excluded: LayerNorm over two features is constant up to sign,
  // leaving upstream gradients at rounding level.
  t.config.hidden_dim = 4 * (1 + coin(rng));
  t.config.gat_layers = layers(rng);
  t.config.xmodal_layers = layers(rng);
  t.config.num_classes = classes(rng);
  t.config.image_in_dim = dim(rng);
  t.config.text_in_dim = dim(rng);
  t.config.node_activation = coin(rng) ? casegraph::numerics::ActivationKind::Elu
                                       : casegraph::numerics::ActivationKind::LeakyRelu;
  t.world = fixtures::tiny_world(rng, t.config.image_in_dim, t.config.text_in_dim, t.config.num_classes, 4);
  t.label = std::uniform_int_distribution<std::size_t>(0, t.config.num_classes - 1)(rng);
  return t;
}

}  // namespace gradcheck
