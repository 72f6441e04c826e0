#include "casegraph/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "casegraph/error.hpp"

namespace casegraph::numerics {

const Tensor& Var::value() const {
  if (tape == nullptr) fail(ErrorKind::Usage, "variable is not attached to a tape");
  return tape->value(*this);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Tensor& param) {
  Node node;
  node.param = &param;
  node.needs_grad = param.requires_grad;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::view(const Tensor& tensor) {
  Node node;
  node.view = &tensor;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    check_owned(in);
    node.needs_grad = node.needs_grad || nodes_[in.id].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    fail(ErrorKind::Usage, "variable was not recorded on this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  const Node& node = nodes_[v.id];
  if (node.param != nullptr) return *node.param;
  return node.view != nullptr ? *node.view : node.value;
}

bool Tape::needs_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id].needs_grad;
}

std::span<double> Tape::grad(Var v) {
  check_owned(v);
  Node& node = nodes_[v.id];
  if (node.grad.empty()) node.grad.assign(value(v).size(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (value(loss).size() != 1) {
    fail(ErrorKind::Shape, "backward requires a scalar loss, got " +
                               std::to_string(value(loss).size()) + " elements");
  }
  for (Node& node : nodes_) {
    if (node.param == nullptr) node.grad.clear();
  }
  grad(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.param != nullptr) {
      auto& target = node.param->ensure_grad();
      for (std::size_t j = 0; j < target.size(); ++j) target[j] += node.grad[j];
      node.grad.clear();
    } else if (node.backward) {
      // the callback may allocate input buffers; keep our own grad alive
      const std::vector<double> out_grad = std::move(node.grad);
      node.backward(*this, out_grad);
    }
  }
  for (Node& node : nodes_) {
    if (node.param != nullptr && node.param->requires_grad) node.param->ensure_grad();
  }
}

namespace ops {

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) fail(ErrorKind::Usage, "variable is not attached to a tape");
  return *a.tape;
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) fail(ErrorKind::Usage, "operands live on different tapes");
}

void require_same_extent(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::Shape, std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                               "x" + std::to_string(a.cols()) + " vs " +
                               std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

Tensor make(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}, 0.0); }

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    fail(ErrorKind::Shape, "matmul inner dimension mismatch: " + std::to_string(m) + "x" +
                               std::to_string(k) + " * " + std::to_string(bv.rows()) + "x" +
                               std::to_string(n));
  }
  Tensor out = make(m, n);
  gemm_accumulate(av.data(), bv.data(), out.data(), m, k, n, false, false);
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [a, b, m, k, n](Tape& tp, std::span<const double> g) {
    if (tp.needs_grad(a)) {
      gemm_accumulate(g, tp.value(b).data(), tp.grad(a), m, n, k, false, true);
    }
    if (tp.needs_grad(b)) {
      gemm_accumulate(tp.value(a).data(), g, tp.grad(b), k, m, n, true, false);
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = make(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, r, c](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_extent(av, bv, "add");
  Tensor out = make(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [a, b](Tape& tp, std::span<const double> g) {
    for (Var v : {a, b}) {
      if (!tp.needs_grad(v)) continue;
      auto gv = tp.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_extent(av, bv, "sub");
  Tensor out = make(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [a, b](Tape& tp, std::span<const double> g) {
    if (tp.needs_grad(a)) {
      auto ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      auto gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_extent(av, bv, "mul");
  Tensor out = make(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [a, b](Tape& tp, std::span<const double> g) {
    const Tensor& av = tp.value(a);
    const Tensor& bv = tp.value(b);
    if (tp.needs_grad(a)) {
      auto ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.needs_grad(b)) {
      auto gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var a, Var bias) {
  require_same_tape(a, bias);
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (bv.size() != c) {
    fail(ErrorKind::Shape, "add_row bias length " + std::to_string(bv.size()) +
                               " does not match width " + std::to_string(c));
  }
  Tensor out = make(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] + bv[j];
  const Var in[] = {a, bias};
  return t.record(std::move(out), in, [a, bias, r, c](Tape& tp, std::span<const double> g) {
    if (tp.needs_grad(a)) {
      auto ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(bias)) {
      auto gb = tp.grad(bias);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = make(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, factor](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var abs(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = make(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(av[i]);
  const Var in[] = {a};
  return t.record(std::move(out), in, [a](Tape& tp, std::span<const double> g) {
    const Tensor& av = tp.value(a);
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double sign = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
      ga[i] += g[i] * sign;
    }
  });
}

Var activate(Var a, Activation act) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = make(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = act.apply(av[i]);
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, act](Tape& tp, std::span<const double> g) {
    const Tensor& av = tp.value(a);
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * act.derivative(av[i]);
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = make(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = softmax(av.data().subspan(i * c, c));
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  const std::size_t self = t.size();
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, self, r, c](Tape& tp, std::span<const double> g) {
    const Tensor& y = tp.value(Var{&tp, self});
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < r; ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < c; ++j) inner += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (g[i * c + j] - inner);
    }
  });
}

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
  require_same_tape(a, gamma);
  require_same_tape(a, beta);
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  if (gv.size() != c || bv.size() != c) {
    fail(ErrorKind::Shape, "layer_norm affine length does not match width " + std::to_string(c));
  }
  Tensor out = make(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = layer_norm(av.data().subspan(i * c, c), gv.data(), bv.data(), eps);
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  const Var in[] = {a, gamma, beta};
  return t.record(std::move(out), in,
                  [a, gamma, beta, eps, r, c](Tape& tp, std::span<const double> g) {
    const Tensor& av = tp.value(a);
    const Tensor& gv = tp.value(gamma);
    const double n = static_cast<double>(c);
    std::vector<double> xhat(c), dxhat(c);
    for (std::size_t i = 0; i < r; ++i) {
      const double* x = av.data().data() + i * c;
      const double* gi = g.data() + i * c;
      double mean = 0.0;
      for (std::size_t j = 0; j < c; ++j) mean += x[j];
      mean /= n;
      double var = 0.0;
      for (std::size_t j = 0; j < c; ++j) var += (x[j] - mean) * (x[j] - mean);
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::size_t j = 0; j < c; ++j) xhat[j] = (x[j] - mean) * inv;
      if (tp.needs_grad(gamma)) {
        auto gg = tp.grad(gamma);
        for (std::size_t j = 0; j < c; ++j) gg[j] += gi[j] * xhat[j];
      }
      if (tp.needs_grad(beta)) {
        auto gb = tp.grad(beta);
        for (std::size_t j = 0; j < c; ++j) gb[j] += gi[j];
      }
      if (tp.needs_grad(a)) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dxhat[j] = gi[j] * gv[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat[j];
        }
        mean_d /= n;
        mean_dx /= n;
        auto ga = tp.grad(a);
        for (std::size_t j = 0; j < c; ++j) {
          ga[i * c + j] += inv * (dxhat[j] - mean_d - xhat[j] * mean_dx);
        }
      }
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::Usage, "concat_cols of nothing");
  Tape& t = tape_of(parts[0]);
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    if (p.rows() != r) fail(ErrorKind::Shape, "concat_cols row count mismatch");
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out = make(r, total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[p]; ++j) out[i * total + offset + j] = v[i * widths[p] + j];
    offset += widths[p];
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.record(std::move(out), parts,
                  [saved, widths, r, total](Tape& tp, std::span<const double> g) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < saved.size(); ++p) {
      if (tp.needs_grad(saved[p])) {
        auto gp = tp.grad(saved[p]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[p]; ++j)
            gp[i * widths[p] + j] += g[i * total + offset + j];
      }
      offset += widths[p];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::Usage, "concat_rows of nothing");
  Tape& t = tape_of(parts[0]);
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    if (p.cols() != c) fail(ErrorKind::Shape, "concat_rows column count mismatch");
    total += p.rows();
  }
  Tensor out = make(total, c);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.size();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [saved](Tape& tp, std::span<const double> g) {
    std::size_t offset = 0;
    for (const Var& p : saved) {
      const std::size_t n = tp.value(p).size();
      if (tp.needs_grad(p)) {
        auto gp = tp.grad(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (begin > end || end > c) fail(ErrorKind::Shape, "slice_cols range out of bounds");
  const std::size_t w = end - begin;
  Tensor out = make(r, w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, begin, r, c, w](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = make(index.size(), c);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= r) fail(ErrorKind::Shape, "gather_rows index out of range");
    std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(index[k] * c), c,
                out.data().begin() + static_cast<std::ptrdiff_t>(k * c));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, idx, c](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(a);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < c; ++j) ga[idx[k] * c + j] += g[k * c + j];
  });
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t rows) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t c = av.cols();
  if (index.size() != av.rows()) fail(ErrorKind::Shape, "scatter_add_rows index length mismatch");
  Tensor out = make(rows, c);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= rows) fail(ErrorKind::Shape, "scatter_add_rows index out of range");
    for (std::size_t j = 0; j < c; ++j) out[index[k] * c + j] += av[k * c + j];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, idx, c](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(a);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < c; ++j) ga[k * c + j] += g[idx[k] * c + j];
  });
}

Var segment_softmax(Var scores, std::span<const std::size_t> segment, std::size_t segments) {
  Tape& t = tape_of(scores);
  const Tensor& sv = scores.value();
  if (sv.cols() != 1 || sv.rows() != segment.size()) {
    fail(ErrorKind::Shape, "segment_softmax expects a column vector aligned with segment ids");
  }
  const std::size_t e = segment.size();
  std::vector<double> peak(segments, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < e; ++k) {
    if (segment[k] >= segments) fail(ErrorKind::Shape, "segment id out of range");
    if (!std::isfinite(sv[k])) fail(ErrorKind::Domain, "segment_softmax input is not finite");
    peak[segment[k]] = std::max(peak[segment[k]], sv[k]);
  }
  std::vector<double> total(segments, 0.0);
  Tensor out = make(e, 1);
  for (std::size_t k = 0; k < e; ++k) {
    out[k] = std::exp(sv[k] - peak[segment[k]]);
    total[segment[k]] += out[k];
  }
  for (std::size_t k = 0; k < e; ++k) out[k] /= total[segment[k]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  const std::size_t self = t.size();
  const Var in[] = {scores};
  return t.record(std::move(out), in,
                  [scores, seg, segments, self](Tape& tp, std::span<const double> g) {
    const Tensor& y = tp.value(Var{&tp, self});
    std::vector<double> inner(segments, 0.0);
    for (std::size_t k = 0; k < seg.size(); ++k) inner[seg[k]] += g[k] * y[k];
    auto gs = tp.grad(scores);
    for (std::size_t k = 0; k < seg.size(); ++k) gs[k] += y[k] * (g[k] - inner[seg[k]]);
  });
}

Var scale_rows(Var a, Var w) {
  require_same_tape(a, w);
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& wv = w.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (wv.size() != r) fail(ErrorKind::Shape, "scale_rows weight length mismatch");
  Tensor out = make(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] * wv[i];
  const Var in[] = {a, w};
  return t.record(std::move(out), in, [a, w, r, c](Tape& tp, std::span<const double> g) {
    const Tensor& av = tp.value(a);
    const Tensor& wv = tp.value(w);
    if (tp.needs_grad(a)) {
      auto ga = tp.grad(a);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] * wv[i];
    }
    if (tp.needs_grad(w)) {
      auto gw = tp.grad(w);
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += g[i * c + j] * av[i * c + j];
        gw[i] += s;
      }
    }
  });
}

Var mask(Var a, std::vector<double> mask) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (mask.size() != av.size()) fail(ErrorKind::Shape, "mask length mismatch");
  Tensor out = make(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, m = std::move(mask)](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * m[i];
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const Var in[] = {a};
  return t.record(Tensor::scalar(s), in, [a](Tape& tp, std::span<const double> g) {
    auto ga = tp.grad(a);
    for (double& v : ga) v += g[0];
  });
}

Var cross_entropy(Var logits, std::size_t label) {
  Tape& t = tape_of(logits);
  const Tensor& lv = logits.value();
  if (lv.rows() != 1) fail(ErrorKind::Shape, "cross_entropy expects a single row of logits");
  if (label >= lv.cols()) fail(ErrorKind::Shape, "cross_entropy label out of range");
  const auto p = softmax(lv.data());
  double peak = lv[0];
  for (double v : lv.data()) peak = std::max(peak, v);
  double total = 0.0;
  for (double v : lv.data()) total += std::exp(v - peak);
  const double loss = peak + std::log(total) - lv[label];
  const Var in[] = {logits};
  return t.record(Tensor::scalar(loss), in, [logits, label, p](Tape& tp, std::span<const double> g) {
    auto gl = tp.grad(logits);
    for (std::size_t j = 0; j < p.size(); ++j) {
      gl[j] += g[0] * (p[j] - (j == label ? 1.0 : 0.0));
    }
  });
}

}  // namespace ops

}  // namespace casegraph::numerics
