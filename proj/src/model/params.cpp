#include "casegraph/model/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "casegraph/error.hpp"
#include "casegraph/numerics/random.hpp"

namespace casegraph::model {

using nlohmann::json;
using numerics::Tensor;

void ModelConfig::validate() const {
  if (hidden_dim == 0) fail(ErrorKind::Config, "hidden_dim must be positive");
  if (gat_heads == 0 || hidden_dim % gat_heads != 0) {
    fail(ErrorKind::Config, "hidden_dim must be divisible by gat_heads");
  }
  if (xmodal_heads == 0 || hidden_dim % xmodal_heads != 0) {
    fail(ErrorKind::Config, "hidden_dim must be divisible by xmodal_heads");
  }
  if (num_classes < 2) fail(ErrorKind::Config, "num_classes must be at least 2");
  if (image_in_dim == 0) fail(ErrorKind::Config, "image_in_dim must be positive");
  if (text_in_dim == 0) fail(ErrorKind::Config, "text_in_dim must be positive");
  if (!(attn_dropout >= 0.0 && attn_dropout < 1.0)) fail(ErrorKind::Config, "attn_dropout must lie in [0, 1)");
  if (!(mlp_dropout >= 0.0 && mlp_dropout < 1.0)) fail(ErrorKind::Config, "mlp_dropout must lie in [0, 1)");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) fail(ErrorKind::Config, "leaky_slope must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) fail(ErrorKind::Config, "layer_norm_eps must be positive");
}

std::string activation_name(numerics::ActivationKind kind) {
  switch (kind) {
    case numerics::ActivationKind::Elu: return "elu";
    case numerics::ActivationKind::Relu: return "relu";
    case numerics::ActivationKind::LeakyRelu: return "leaky_relu";
  }
  return "elu";
}

numerics::ActivationKind activation_from_name(const std::string& name) {
  if (name == "elu") return numerics::ActivationKind::Elu;
  if (name == "relu") return numerics::ActivationKind::Relu;
  if (name == "leaky_relu") return numerics::ActivationKind::LeakyRelu;
  fail(ErrorKind::Config, "unknown activation '" + name + "'");
}

json config_to_json(const ModelConfig& c) {
  return json{{"hidden_dim", c.hidden_dim},
              {"gat_layers", c.gat_layers},
              {"gat_heads", c.gat_heads},
              {"xmodal_layers", c.xmodal_layers},
              {"xmodal_heads", c.xmodal_heads},
              {"num_classes", c.num_classes},
              {"image_in_dim", c.image_in_dim},
              {"text_in_dim", c.text_in_dim},
              {"attn_dropout", c.attn_dropout},
              {"mlp_dropout", c.mlp_dropout},
              {"leaky_slope", c.leaky_slope},
              {"layer_norm_eps", c.layer_norm_eps},
              {"node_activation", activation_name(c.node_activation)},
              {"knowledge_propagation", c.knowledge_propagation}};
}

ModelConfig config_from_json(const json& doc) {
  ModelConfig c;
  try {
    c.hidden_dim = doc.at("hidden_dim").get<std::size_t>();
    c.gat_layers = doc.at("gat_layers").get<std::size_t>();
    c.gat_heads = doc.at("gat_heads").get<std::size_t>();
    c.xmodal_layers = doc.at("xmodal_layers").get<std::size_t>();
    c.xmodal_heads = doc.at("xmodal_heads").get<std::size_t>();
    c.num_classes = doc.at("num_classes").get<std::size_t>();
    c.image_in_dim = doc.at("image_in_dim").get<std::size_t>();
    c.text_in_dim = doc.at("text_in_dim").get<std::size_t>();
    c.attn_dropout = doc.at("attn_dropout").get<double>();
    c.mlp_dropout = doc.at("mlp_dropout").get<double>();
    c.leaky_slope = doc.at("leaky_slope").get<double>();
    c.layer_norm_eps = doc.at("layer_norm_eps").get<double>();
    c.node_activation = activation_from_name(doc.at("node_activation").get<std::string>());
    c.knowledge_propagation = doc.at("knowledge_propagation").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed model config: ") + e.what());
  }
  return c;
}

namespace {

Tensor glorot(numerics::Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  t.requires_grad = true;
  return t;
}

Tensor filled(std::size_t n, double value) {
  Tensor t({n}, value);
  t.requires_grad = true;
  return t;
}

}  // namespace

void ModelParams::add(std::string name, Tensor tensor) {
  index_[name] = tensors_.size();
  tensors_.emplace_back(std::move(name), std::move(tensor));
}

ModelParams::ModelParams(const ModelConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  numerics::Rng rng(seed, "init");
  const std::size_t d = config_.hidden_dim;

  auto linear = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    add(prefix + ".weight", glorot(rng, in, out));
    add(prefix + ".bias", filled(out, 0.0));
  };
  auto norm = [&](const std::string& prefix) {
    add(prefix + ".gamma", filled(d, 1.0));
    add(prefix + ".beta", filled(d, 0.0));
  };

  linear("proj.image", config_.image_in_dim, d);
  if (config_.knowledge_propagation) {
    linear("proj.text", config_.text_in_dim, d);
    const std::size_t dh = d / config_.gat_heads;
    for (std::size_t l = 0; l < config_.gat_layers; ++l) {
      const std::string p = "gat." + std::to_string(l);
      add(p + ".weight", glorot(rng, d, d));
      for (std::size_t h = 0; h < config_.gat_heads; ++h) {
        // a = [a_i ; a_j] (target half, neighbor half), drawn as one 2*dh vector
        const std::string ph = p + ".head" + std::to_string(h);
        Tensor a = glorot(rng, 2 * dh, 1);
        Tensor src({dh, 1}, std::vector<double>(a.values().begin(), a.values().begin() + static_cast<std::ptrdiff_t>(dh)));
        Tensor dst({dh, 1}, std::vector<double>(a.values().begin() + static_cast<std::ptrdiff_t>(dh), a.values().end()));
        src.requires_grad = dst.requires_grad = true;
        add(ph + ".att_i", std::move(src));
        add(ph + ".att_j", std::move(dst));
      }
    }
    for (std::size_t b = 0; b < config_.xmodal_layers; ++b) {
      for (const char* stream : {"kg", "img"}) {
        const std::string p = "xmodal." + std::to_string(b) + "." + stream;
        linear(p + ".query", d, d);
        linear(p + ".key", d, d);
        linear(p + ".value", d, d);
        linear(p + ".out", d, d);
        norm(p + ".norm1");
        linear(p + ".mlp.fc1", d, d);
        linear(p + ".mlp.fc2", d, d);
        norm(p + ".norm2");
      }
    }
  }
  linear("head.fc1", config_.fused_dim(), d);
  linear("head.fc2", d, config_.num_classes);
}

Tensor& ModelParams::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::Lookup, "unknown parameter '" + name + "'");
  return tensors_[it->second].second;
}

const Tensor& ModelParams::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::Lookup, "unknown parameter '" + name + "'");
  return tensors_[it->second].second;
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  out.reserve(tensors_.size());
  for (auto& [name, t] : tensors_) out.push_back(&t);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (!(config_ == other.config_) || tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].first != other.tensors_[i].first) return false;
    if (!(tensors_[i].second == other.tensors_[i].second)) return false;
  }
  return true;
}

void ModelParams::assign(const std::string& name, Tensor value) {
  Tensor& target = get(name);
  if (!target.same_shape(value)) fail(ErrorKind::Shape, "checkpoint tensor '" + name + "' has wrong shape");
  value.requires_grad = target.requires_grad;
  value.grad.reset();
  target = std::move(value);
}

namespace {

constexpr char kMagic[4] = {'M', 'K', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint64_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string str() {
    const std::size_t n = u(4);
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      fail(ErrorKind::Format, "checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const std::string& run_echo) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u64(out, params.seed());
  const json echo{{"model", config_to_json(params.config())}, {"run", run_echo}};
  put_string(out, echo.dump());
  put_u32(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& [name, t] : params.entries()) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t extent : t.shape()) put_u64(out, extent);
    for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::Format, "bad checkpoint magic");
  }
  Reader r(bytes);
  r.u(4);
  const auto version = r.u(4);
  if (version != kVersion) fail(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t seed = r.u(8);
  json echo;
  try {
    echo = json::parse(r.str());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, std::string("checkpoint config echo is not JSON: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.params = ModelParams(config_from_json(echo.at("model")), seed);
  ckpt.run_echo = echo.value("run", std::string{});
  const std::size_t count = r.u(4);
  if (count != ckpt.params.entries().size()) {
    fail(ErrorKind::Format, "checkpoint holds " + std::to_string(count) + " tensors, layout expects " +
                                std::to_string(ckpt.params.entries().size()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::size_t rank = r.u(4);
    std::vector<std::size_t> shape(rank);
    for (auto& extent : shape) extent = r.u(8);
    std::vector<double> values(numerics::element_count(shape));
    for (double& v : values) v = std::bit_cast<double>(r.u(8));
    ckpt.params.assign(name, Tensor(shape, std::move(values)));
  }
  if (!r.done()) fail(ErrorKind::Format, "trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const ModelParams& params, const std::string& run_echo,
                     const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params, run_echo);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace casegraph::model
