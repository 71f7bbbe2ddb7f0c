#include "ilse/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "ilse/errors.hpp"

namespace ilse {

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::add(std::string name, Tensor init) {
  if (contains(name)) throw InvalidArgument("ParamStore: duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  Entry e;
  e.name = std::move(name);
  e.grad = Tensor(init.shape());
  e.first_moment = Tensor(init.shape());
  e.second_moment = Tensor(init.shape());
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  return entries_.back().value;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::size_t ParamStore::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.name.starts_with(prefix)) n += e.value.size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) {
    throw InvalidArgument("ParamStore::copy_values_from: parameter sets differ");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        !entries_[i].value.same_shape(other.entries_[i].value)) {
      throw InvalidArgument("ParamStore::copy_values_from: mismatch at '" + entries_[i].name + "'");
    }
    entries_[i].value = other.entries_[i].value;
  }
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericFailure("constant: non-finite input");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(ParamStore& store, const std::string& name) {
  auto& entry = store.entries()[store.index_of(name)];
  Node n;
  n.value = entry.value;
  n.param_grad = &entry.grad;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericFailure(std::string("non-finite value produced by op '") + op + "'");
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) {
    if (in.tape != this) throw InvalidArgument(std::string(op) + ": input recorded on another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw InvalidArgument("backward: loss recorded on another tape");
  if (nodes_[loss.id].value.size() != 1) throw InvalidArgument("backward: loss must be a scalar");
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id).fill(1.0);
  for (std::int64_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() != n.value.size()) continue;
    if (!n.grad.all_finite()) throw NumericFailure("non-finite gradient during backward");
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(id));
    if (n.param_grad != nullptr) {
      auto dst = n.param_grad->data();
      auto src = n.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

// ---------------------------------------------------------------------------
// ops

namespace ops {
namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) throw InvalidArgument(std::string(op) + ": operands on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

void accumulate(Tensor& dst, const Tensor& src, double factor = 1.0) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
}

template <typename Fn>
Var unary(const char* op, Var x, Fn&& fn, Tape::BackwardFn backward) {
  const Tensor& xv = x.tape->value(x);
  Tensor out(xv.shape());
  auto o = out.data();
  auto in = xv.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(in[i]);
  return x.tape->record(op, std::move(out), {x}, std::move(backward));
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw InvalidArgument("matmul: inner dimensions differ " + av.shape_string() + " * " + bv.shape_string());
  }
  Tensor out = Tensor::matrix(m, n);
  kernels::matmul(av.raw(), bv.raw(), out.raw(), m, k, n);
  return t.record("matmul", std::move(out), {a, b}, [a = a.id, b = b.id, m, k, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    if (tp.node_requires_grad(a)) {
      kernels::matmul_nt_acc(g.raw(), tp.node_value(b).raw(), tp.grad_buffer(a).raw(), m, k, n);
    }
    if (tp.node_requires_grad(b)) {
      kernels::matmul_tn_acc(tp.node_value(a).raw(), g.raw(), tp.grad_buffer(b).raw(), m, k, n);
    }
  });
}

Var add_bias(Var x, Var bias) {
  require_same_tape(x, bias, "add_bias");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (bv.size() != n) {
    throw InvalidArgument("add_bias: bias " + bv.shape_string() + " does not match " + xv.shape_string());
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bv[c];
  }
  return t.record("add_bias", std::move(out), {x, bias}, [x = x.id, b = bias.id, m, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    if (tp.node_requires_grad(x)) accumulate(tp.grad_buffer(x), g);
    if (tp.node_requires_grad(b)) {
      Tensor& gb = tp.grad_buffer(b);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
      }
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  Tape& t = *a.tape;
  require_same_shape(t.value(a), t.value(b), "add");
  Tensor out = t.value(a);
  accumulate(out, t.value(b));
  return t.record("add", std::move(out), {a, b}, [a = a.id, b = b.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    if (tp.node_requires_grad(a)) accumulate(tp.grad_buffer(a), g);
    if (tp.node_requires_grad(b)) accumulate(tp.grad_buffer(b), g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  Tape& t = *a.tape;
  require_same_shape(t.value(a), t.value(b), "sub");
  Tensor out = t.value(a);
  accumulate(out, t.value(b), -1.0);
  return t.record("sub", std::move(out), {a, b}, [a = a.id, b = b.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    if (tp.node_requires_grad(a)) accumulate(tp.grad_buffer(a), g);
    if (tp.node_requires_grad(b)) accumulate(tp.grad_buffer(b), g, -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return t.record("mul", std::move(out), {a, b}, [a = a.id, b = b.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    if (tp.node_requires_grad(a)) {
      Tensor& ga = tp.grad_buffer(a);
      const Tensor& bv = tp.node_value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.node_requires_grad(b)) {
      Tensor& gb = tp.grad_buffer(b);
      const Tensor& av = tp.node_value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var x, double factor) { return affine(x, factor, 0.0); }

Var affine(Var x, double factor, double offset) {
  return unary("affine", x, [=](double v) { return factor * v + offset; },
               [x = x.id, factor](Tape& tp, std::uint32_t self) {
                 accumulate(tp.grad_buffer(x), tp.node_grad(self), factor);
               });
}

Var square(Var x) {
  return unary("square", x, [](double v) { return v * v; }, [x = x.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& xv = tp.node_value(x);
    Tensor& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 2.0 * xv[i] * g[i];
  });
}

// relu'(0) = 0.
Var relu(Var x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [x = x.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& xv = tp.node_value(x);
    Tensor& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var log(Var x) {
  return unary("log", x, [](double v) { return std::log(v); }, [x = x.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& xv = tp.node_value(x);
    Tensor& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
  });
}

Var dropout(Var x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout: rate must be in [0, 1)");
  Tape& t = *x.tape;
  if (!t.training() || rate == 0.0) return x;
  const Tensor& xv = t.value(x);
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(xv.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  return mul(x, t.constant(std::move(mask)));
}

Var transpose(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[c * m + r] = xv[r * n + c];
  }
  return t.record("transpose", std::move(out), {x}, [x = x.id, m, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    Tensor& gx = tp.grad_buffer(x);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += g[c * m + r];
    }
  });
}

Var sum(Var x) {
  Tape& t = *x.tape;
  double s = 0.0;
  for (double v : t.value(x).data()) s += v;
  return t.record("sum", Tensor::scalar(s), {x}, [x = x.id](Tape& tp, std::uint32_t self) {
    const double g = tp.node_grad(self)[0];
    for (double& v : tp.grad_buffer(x).data()) v += g;
  });
}

Var mean(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  if (xv.size() == 0) throw InvalidArgument("mean: empty tensor");
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return t.record("mean", Tensor::scalar(s * inv), {x}, [x = x.id, inv](Tape& tp, std::uint32_t self) {
    const double g = tp.node_grad(self)[0] * inv;
    for (double& v : tp.grad_buffer(x).data()) v += g;
  });
}

Var softmax(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = xv.raw() + r * n;
    double* o = out.raw() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < n; ++c) o[c] /= z;
  }
  return t.record("softmax", std::move(out), {x}, [x = x.id, m, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& y = tp.node_value(self);
    Tensor& gx = tp.grad_buffer(x);
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += y[r * n + c] * (g[r * n + c] - dot);
    }
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  if (axis != 0 && axis != 1) throw InvalidArgument("concat: axis must be 0 or 1");
  Tape& t = *parts.front().tape;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> extents;
  const std::size_t fixed = axis == 0 ? t.value(parts[0]).cols() : t.value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (p.tape != &t) throw InvalidArgument("concat: operands on different tapes");
    const Tensor& v = t.value(p);
    const std::size_t f = axis == 0 ? v.cols() : v.rows();
    if (f != fixed) throw InvalidArgument("concat: incompatible shape " + v.shape_string());
    const std::size_t e = axis == 0 ? v.rows() : v.cols();
    ids.push_back(p.id);
    extents.push_back(e);
    total += e;
  }
  const std::size_t rows = axis == 0 ? total : fixed;
  const std::size_t cols = axis == 0 ? fixed : total;
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor& v = t.node_value(ids[i]);
    for (std::size_t r = 0; r < v.rows(); ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == 0) {
          out(offset + r, c) = v[r * v.cols() + c];
        } else {
          out(r, offset + c) = v[r * v.cols() + c];
        }
      }
    }
    offset += extents[i];
  }
  // record() takes an initializer_list, so requires_grad is wired through a
  // representative input and the backward closure covers the rest.
  Var representative = parts.front();
  for (Var p : parts) {
    if (t.requires_grad(p)) representative = p;
  }
  return t.record("concat", std::move(out), {representative},
                  [ids, extents, axis, cols](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    std::size_t offset = 0;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      if (tp.node_requires_grad(ids[i])) {
                        Tensor& gx = tp.grad_buffer(ids[i]);
                        const std::size_t vr = tp.node_value(ids[i]).rows();
                        const std::size_t vc = tp.node_value(ids[i]).cols();
                        for (std::size_t r = 0; r < vr; ++r) {
                          for (std::size_t c = 0; c < vc; ++c) {
                            gx[r * vc + c] += axis == 0 ? g[(offset + r) * cols + c] : g[r * cols + offset + c];
                          }
                        }
                      }
                      offset += extents[i];
                    }
                  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  if (begin > end || end > xv.rows()) throw InvalidArgument("slice_rows: range out of bounds");
  const std::size_t n = xv.cols();
  Tensor out = Tensor::matrix(end - begin, n);
  std::copy(xv.raw() + begin * n, xv.raw() + end * n, out.raw());
  return t.record("slice_rows", std::move(out), {x}, [x = x.id, begin, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    Tensor& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
  });
}

Var mix_rows(Var x, const RowMix& mix) { return mix_rows(x, std::make_shared<const RowMix>(mix)); }

Var mix_rows(Var x, std::shared_ptr<const RowMix> shared_mix) {
  if (!shared_mix) throw InvalidArgument("mix_rows: null mix");
  const RowMix& mix = *shared_mix;
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  if (xv.rows() != mix.input_rows) {
    throw InvalidArgument("mix_rows: expected " + std::to_string(mix.input_rows) + " input rows, got " +
                          std::to_string(xv.rows()));
  }
  const std::size_t n = xv.cols();
  Tensor out = Tensor::matrix(mix.rows.size(), n);
  std::vector<double> terms;
  for (std::size_t r = 0; r < mix.rows.size(); ++r) {
    const auto& row = mix.rows[r];
    for (const auto& term : row) {
      if (term.source >= mix.input_rows) throw InvalidArgument("mix_rows: source row out of range");
    }
    terms.resize(row.size());
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t k = 0; k < row.size(); ++k) terms[k] = row[k].weight * xv[row[k].source * n + c];
      std::sort(terms.begin(), terms.end());
      double s = 0.0;
      for (double v : terms) s += v;
      out[r * n + c] = s + 0.0;  // folds -0.0 into +0.0
    }
  }
  return t.record("mix_rows", std::move(out), {x}, [x = x.id, shared_mix, n](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    Tensor& gx = tp.grad_buffer(x);
    for (std::size_t r = 0; r < shared_mix->rows.size(); ++r) {
      for (const auto& term : shared_mix->rows[r]) {
        double* dst = gx.raw() + term.source * n;
        const double* src = g.raw() + r * n;
        for (std::size_t c = 0; c < n; ++c) dst[c] += term.weight * src[c];
      }
    }
  });
}

Var cosine(Var a, Var b) {
  require_same_tape(a, b, "cosine");
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_same_shape(av, bv, "cosine");
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out = Tensor::vector(m);
  std::vector<double> na(m), nb(m);
  for (std::size_t r = 0; r < m; ++r) {
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double x = av[r * n + c], y = bv[r * n + c];
      dot += x * y;
      aa += x * x;
      bb += y * y;
    }
    if (aa == 0.0 || bb == 0.0) throw NumericFailure("cosine: zero-norm input");
    na[r] = std::sqrt(aa);
    nb[r] = std::sqrt(bb);
    out[r] = dot / (na[r] * nb[r]);
  }
  return t.record("cosine", std::move(out), {a, b},
                  [a = a.id, b = b.id, m, n, na = std::move(na), nb = std::move(nb)](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    const Tensor& cs = tp.node_value(self);
                    const Tensor& av = tp.node_value(a);
                    const Tensor& bv = tp.node_value(b);
                    const bool ga_on = tp.node_requires_grad(a), gb_on = tp.node_requires_grad(b);
                    for (std::size_t r = 0; r < m; ++r) {
                      const double inv = 1.0 / (na[r] * nb[r]);
                      for (std::size_t c = 0; c < n; ++c) {
                        const double x = av[r * n + c], y = bv[r * n + c];
                        if (ga_on) tp.grad_buffer(a)[r * n + c] += g[r] * (y * inv - cs[r] * x / (na[r] * na[r]));
                        if (gb_on) tp.grad_buffer(b)[r * n + c] += g[r] * (x * inv - cs[r] * y / (nb[r] * nb[r]));
                      }
                    }
                  });
}

Var attend(Var alpha, Var values, std::size_t group) {
  require_same_tape(alpha, values, "attend");
  Tape& t = *alpha.tape;
  const Tensor& al = t.value(alpha);
  const Tensor& vv = t.value(values);
  if (group == 0 || vv.rows() % group != 0) throw InvalidArgument("attend: value rows not a multiple of group");
  const std::size_t batch = vv.rows() / group;
  const std::size_t w = vv.cols();
  if (al.cols() != group || (al.rows() != 1 && al.rows() != batch)) {
    throw InvalidArgument("attend: weights " + al.shape_string() + " incompatible with values " + vv.shape_string());
  }
  const bool shared = al.rows() == 1;
  Tensor out = Tensor::matrix(batch, w);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* a = al.raw() + (shared ? 0 : b) * group;
    for (std::size_t j = 0; j < group; ++j) {
      const double* v = vv.raw() + (b * group + j) * w;
      for (std::size_t c = 0; c < w; ++c) out[b * w + c] += a[j] * v[c];
    }
  }
  return t.record("attend", std::move(out), {alpha, values},
                  [al_id = alpha.id, v_id = values.id, group, batch, w, shared](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    const Tensor& al = tp.node_value(al_id);
                    const Tensor& vv = tp.node_value(v_id);
                    const bool ga_on = tp.node_requires_grad(al_id), gv_on = tp.node_requires_grad(v_id);
                    for (std::size_t b = 0; b < batch; ++b) {
                      const std::size_t arow = (shared ? 0 : b) * group;
                      for (std::size_t j = 0; j < group; ++j) {
                        const std::size_t vrow = (b * group + j) * w;
                        if (ga_on) {
                          double dot = 0.0;
                          for (std::size_t c = 0; c < w; ++c) dot += g[b * w + c] * vv[vrow + c];
                          tp.grad_buffer(al_id)[arow + j] += dot;
                        }
                        if (gv_on) {
                          Tensor& gv = tp.grad_buffer(v_id);
                          for (std::size_t c = 0; c < w; ++c) gv[vrow + c] += al[arow + j] * g[b * w + c];
                        }
                      }
                    }
                  });
}

Var cross_entropy(Var logits, std::span<const std::uint32_t> labels) {
  Tape& t = *logits.tape;
  const Tensor& lv = t.value(logits);
  const std::size_t m = lv.rows(), k = lv.cols();
  if (k < 2) throw InvalidArgument("cross_entropy: need at least two classes");
  if (labels.size() != m) throw InvalidArgument("cross_entropy: one label per row required");
  Tensor probs = Tensor::matrix(m, k);
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (labels[r] >= k) {
      throw InvalidArgument("cross_entropy: label " + std::to_string(labels[r]) + " >= class count " +
                            std::to_string(k));
    }
    const double* x = lv.raw() + r * k;
    const double mx = *std::max_element(x, x + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += (probs[r * k + c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < k; ++c) probs[r * k + c] /= z;
    total += std::log(z) - (x[labels[r]] - mx);
  }
  const double inv = 1.0 / static_cast<double>(m);
  std::vector<std::uint32_t> lab(labels.begin(), labels.end());
  return t.record("cross_entropy", Tensor::scalar(total * inv), {logits},
                  [x = logits.id, probs = std::move(probs), lab = std::move(lab), inv, m, k](Tape& tp, std::uint32_t self) {
                    const double g = tp.node_grad(self)[0] * inv;
                    Tensor& gx = tp.grad_buffer(x);
                    for (std::size_t r = 0; r < m; ++r) {
                      for (std::size_t c = 0; c < k; ++c) {
                        gx[r * k + c] += g * (probs[r * k + c] - (c == lab[r] ? 1.0 : 0.0));
                      }
                    }
                  });
}

Var cosine_mse(Var u, Var v, std::span<const double> gold) {
  Tape& t = *u.tape;
  Var cs = cosine(u, v);
  if (gold.size() != t.value(cs).size()) throw InvalidArgument("cosine_mse: one gold score per row required");
  Var predicted = affine(cs, 0.5, 0.5);
  Var target = t.constant(Tensor({gold.size()}, std::vector<double>(gold.begin(), gold.end())));
  return mean(square(sub(predicted, target)));
}

}  // namespace ops
}  // namespace ilse
