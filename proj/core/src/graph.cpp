#include "gatecap/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gatecap {

namespace {

Graph& same_graph(Var a, Var b) {
  if (a.g == nullptr || a.g != b.g) {
    throw std::invalid_argument("operands belong to different graphs");
  }
  return *a.g;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + " shape mismatch: " + a.shape_str() + " vs " +
                              b.shape_str());
}

}  // namespace

Var Graph::leaf(const Tensor& value) {
  return add_node(value, value.requires_grad, nullptr);
}

Var Graph::constant(Tensor value) {
  value.requires_grad = false;
  return add_node(std::move(value), false, nullptr);
}

Var Graph::add_node(Tensor value, bool requires_grad, PullFn pull) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.pull = requires_grad ? std::move(pull) : nullptr;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

double* Graph::grad_buf(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return n.grad.data();
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.has_grad) return n.grad;
  return Tensor::zeros_like(n.value);
}

void Graph::backward(Var loss) {
  if (loss.g != this) throw std::invalid_argument("loss belongs to a different graph");
  if (backward_done_) {
    throw std::logic_error("backward already ran on this graph; call reset_grads() first");
  }
  Node& ln = nodes_[loss.id];
  if (ln.value.numel() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " + ln.value.shape_str());
  }
  backward_done_ = true;
  if (!ln.requires_grad) return;
  grad_buf(loss.id)[0] = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.pull) n.pull(*this, n.grad);
  }
}

void Graph::reset_grads() {
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  backward_done_ = false;
}

void Graph::clear() {
  nodes_.clear();
  backward_done_ = false;
}

// --- ops --------------------------------------------------------------

Var matmul(Var av, Var bv) {
  Graph& g = same_graph(av, bv);
  const Tensor& a = g.value(av);
  const Tensor& b = g.value(bv);
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  if (a.rank() > 2 || b.rank() > 2 || a.rank() == 0 || b.rank() == 0) {
    shape_error("matmul", a, b);
  }
  const std::size_t m = a_vec ? 1 : a.dim(0);
  const std::size_t k = a_vec ? a.dim(0) : a.dim(1);
  const std::size_t k2 = b_vec ? b.dim(0) : b.dim(0);
  const std::size_t n = b_vec ? 1 : b.dim(1);
  if (k != k2) shape_error("matmul", a, b);

  std::vector<std::size_t> out_shape;
  if (!a_vec && !b_vec) {
    out_shape = {m, n};
  } else if (a_vec && !b_vec) {
    out_shape = {n};
  } else if (!a_vec && b_vec) {
    out_shape = {m};
  } else {
    out_shape = {};  // scalar dot product
  }

  Tensor out(std::move(out_shape));
  {
    const double* A = a.data();
    const double* B = b.data();
    double* C = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t l = 0; l < k; ++l) {
        const double x = A[i * k + l];
        const double* brow = B + l * n;
        double* crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += x * brow[j];
      }
    }
  }

  const std::uint32_t aid = av.id, bid = bv.id;
  bool req = g.requires(av) || g.requires(bv);
  return g.add_node(std::move(out), req,
                    [aid, bid, m, k, n](Graph& gr, const Tensor& up) {
                      const double* U = up.data();
                      if (gr.requires(Var{&gr, aid})) {
                        const double* B = gr.value(Var{&gr, bid}).data();
                        double* dA = gr.grad_buf(aid);
                        for (std::size_t i = 0; i < m; ++i) {
                          for (std::size_t l = 0; l < k; ++l) {
                            const double* urow = U + i * n;
                            const double* brow = B + l * n;
                            double acc = 0.0;
                            for (std::size_t j = 0; j < n; ++j) acc += urow[j] * brow[j];
                            dA[i * k + l] += acc;
                          }
                        }
                      }
                      if (gr.requires(Var{&gr, bid})) {
                        const double* A = gr.value(Var{&gr, aid}).data();
                        double* dB = gr.grad_buf(bid);
                        for (std::size_t i = 0; i < m; ++i) {
                          for (std::size_t l = 0; l < k; ++l) {
                            const double x = A[i * k + l];
                            const double* urow = U + i * n;
                            double* brow = dB + l * n;
                            for (std::size_t j = 0; j < n; ++j) brow[j] += x * urow[j];
                          }
                        }
                      }
                    });
}

namespace {

enum class BinOp { kAdd, kSub, kMul };

Var binary_ew(const char* name, BinOp op, Var av, Var bv) {
  Graph& g = same_graph(av, bv);
  const Tensor& a = g.value(av);
  const Tensor& b = g.value(bv);
  const bool b_scalar = b.numel() == 1 && !a.same_shape(b);
  const bool a_scalar = a.numel() == 1 && !a.same_shape(b) && !b_scalar;
  if (!a.same_shape(b) && !a_scalar && !b_scalar) shape_error(name, a, b);

  const std::size_t n = a_scalar ? b.numel() : a.numel();
  Tensor out(a_scalar ? b.shape() : a.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a_scalar ? a[0] : a[i];
    const double y = b_scalar ? b[0] : b[i];
    out[i] = op == BinOp::kAdd ? x + y : (op == BinOp::kSub ? x - y : x * y);
  }

  const std::uint32_t aid = av.id, bid = bv.id;
  bool req = g.requires(av) || g.requires(bv);
  return g.add_node(std::move(out), req,
                    [op, aid, bid, a_scalar, b_scalar, n](Graph& gr, const Tensor& up) {
                      const double* U = up.data();
                      const Tensor& a = gr.value(Var{&gr, aid});
                      const Tensor& b = gr.value(Var{&gr, bid});
                      if (gr.requires(Var{&gr, aid})) {
                        double* dA = gr.grad_buf(aid);
                        for (std::size_t i = 0; i < n; ++i) {
                          double u = U[i];
                          if (op == BinOp::kMul) u *= b_scalar ? b[0] : b[i];
                          dA[a_scalar ? 0 : i] += u;
                        }
                      }
                      if (gr.requires(Var{&gr, bid})) {
                        double* dB = gr.grad_buf(bid);
                        for (std::size_t i = 0; i < n; ++i) {
                          double u = U[i];
                          if (op == BinOp::kSub) u = -u;
                          if (op == BinOp::kMul) u = U[i] * (a_scalar ? a[0] : a[i]);
                          dB[b_scalar ? 0 : i] += u;
                        }
                      }
                    });
}

}  // namespace

Var add(Var a, Var b) { return binary_ew("add", BinOp::kAdd, a, b); }
Var sub(Var a, Var b) { return binary_ew("sub", BinOp::kSub, a, b); }
Var mul(Var a, Var b) { return binary_ew("mul", BinOp::kMul, a, b); }

namespace {

// Unary elementwise helper: fwd(x) and dfdx given (x, fwd(x)).
template <class F, class DF>
Var unary_ew(Var av, F f, DF df) {
  Graph& g = *av.g;
  const Tensor& a = g.value(av);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);

  const std::uint32_t aid = av.id;
  const std::uint32_t oid = static_cast<std::uint32_t>(g.size());  // this node's id
  return g.add_node(std::move(out), g.requires(av),
                    [aid, oid, df](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, aid})) return;
                      const Tensor& x = gr.value(Var{&gr, aid});
                      const Tensor& y = gr.value(Var{&gr, oid});
                      double* dA = gr.grad_buf(aid);
                      for (std::size_t i = 0; i < x.numel(); ++i) {
                        dA[i] += up[i] * df(x[i], y[i]);
                      }
                    });
}

}  // namespace

Var add_scalar(Var a, double c) {
  return unary_ew(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var mul_scalar(Var a, double c) {
  return unary_ew(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Var sigmoid(Var a) {
  return unary_ew(a, [](double x) { return stable_sigmoid(x); },
                  [](double, double s) { return s * (1.0 - s); });
}

Var tanh(Var a) {
  return unary_ew(a, [](double x) { return std::tanh(x); },
                  [](double, double t) { return 1.0 - t * t; });
}

Var abs(Var a) {
  return unary_ew(a, [](double x) { return std::fabs(x); },
                  [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var softmax(Var av) {
  Graph& g = *av.g;
  const Tensor& a = g.value(av);
  if (a.rank() == 0 || a.rank() > 2) {
    throw std::invalid_argument("softmax expects rank 1 or 2, got " + a.shape_str());
  }
  const std::size_t rows = a.rank() == 2 ? a.dim(0) : 1;
  const std::size_t cols = a.rank() == 2 ? a.dim(1) : a.dim(0);

  Tensor out(a.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = x[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }

  const std::uint32_t aid = av.id;
  const std::uint32_t oid = static_cast<std::uint32_t>(g.size());
  return g.add_node(std::move(out), g.requires(av),
                    [aid, oid, rows, cols](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, aid})) return;
                      const Tensor& s = gr.value(Var{&gr, oid});
                      double* dA = gr.grad_buf(aid);
                      for (std::size_t r = 0; r < rows; ++r) {
                        const double* srow = s.data() + r * cols;
                        const double* urow = up.data() + r * cols;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < cols; ++j) dot += urow[j] * srow[j];
                        for (std::size_t j = 0; j < cols; ++j) {
                          dA[r * cols + j] += srow[j] * (urow[j] - dot);
                        }
                      }
                    });
}

Var lookup(Var tablev, std::size_t index) {
  Graph& g = *tablev.g;
  const Tensor& t = g.value(tablev);
  if (t.rank() != 2) {
    throw std::invalid_argument("lookup expects a rank-2 table, got " + t.shape_str());
  }
  if (index >= t.dim(0)) {
    throw std::out_of_range("lookup index " + std::to_string(index) +
                            " out of range for table with " + std::to_string(t.dim(0)) + " rows");
  }
  const std::size_t q = t.dim(1);
  Tensor out({q});
  for (std::size_t j = 0; j < q; ++j) out[j] = t.at(index, j);

  const std::uint32_t tid = tablev.id;
  return g.add_node(std::move(out), g.requires(tablev),
                    [tid, index, q](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, tid})) return;
                      double* dT = gr.grad_buf(tid);
                      for (std::size_t j = 0; j < q; ++j) dT[index * q + j] += up[j];
                    });
}

Var cross_entropy(Var logitsv, std::size_t target) {
  Graph& g = *logitsv.g;
  const Tensor& x = g.value(logitsv);
  if (x.rank() != 1) {
    throw std::invalid_argument("cross_entropy expects a rank-1 score vector, got " + x.shape_str());
  }
  const std::size_t n = x.dim(0);
  if (target >= n) {
    throw std::out_of_range("cross_entropy target " + std::to_string(target) +
                            " out of range for " + std::to_string(n) + " classes");
  }
  double mx = x[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - mx);
  const double loss = mx + std::log(z) - x[target];

  const std::uint32_t xid = logitsv.id;
  return g.add_node(Tensor::scalar(loss), g.requires(logitsv),
                    [xid, target, n, mx, z](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, xid})) return;
                      const Tensor& x = gr.value(Var{&gr, xid});
                      double* dX = gr.grad_buf(xid);
                      const double u = up[0];
                      for (std::size_t j = 0; j < n; ++j) {
                        double p = std::exp(x[j] - mx) / z;
                        dX[j] += u * (p - (j == target ? 1.0 : 0.0));
                      }
                    });
}

Var dropout(Var xv, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return xv;  // identity

  Graph& g = *xv.g;
  const Tensor& x = g.value(xv);
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    mask[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * mask[i];

  const std::uint32_t xid = xv.id;
  return g.add_node(std::move(out), g.requires(xv),
                    [xid, mask = std::move(mask)](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, xid})) return;
                      double* dX = gr.grad_buf(xid);
                      for (std::size_t i = 0; i < mask.numel(); ++i) dX[i] += up[i] * mask[i];
                    });
}

Var concat(Var av, Var bv) {
  Graph& g = same_graph(av, bv);
  const Tensor& a = g.value(av);
  const Tensor& b = g.value(bv);
  if (a.rank() != 1 || b.rank() != 1) shape_error("concat", a, b);
  const std::size_t la = a.dim(0), lb = b.dim(0);
  Tensor out({la + lb});
  for (std::size_t i = 0; i < la; ++i) out[i] = a[i];
  for (std::size_t i = 0; i < lb; ++i) out[la + i] = b[i];

  const std::uint32_t aid = av.id, bid = bv.id;
  bool req = g.requires(av) || g.requires(bv);
  return g.add_node(std::move(out), req,
                    [aid, bid, la, lb](Graph& gr, const Tensor& up) {
                      if (gr.requires(Var{&gr, aid})) {
                        double* dA = gr.grad_buf(aid);
                        for (std::size_t i = 0; i < la; ++i) dA[i] += up[i];
                      }
                      if (gr.requires(Var{&gr, bid})) {
                        double* dB = gr.grad_buf(bid);
                        for (std::size_t i = 0; i < lb; ++i) dB[i] += up[la + i];
                      }
                    });
}

Var slice(Var vv, std::size_t start, std::size_t len) {
  Graph& g = *vv.g;
  const Tensor& v = g.value(vv);
  if (v.rank() != 1 || start + len > v.dim(0)) {
    throw std::invalid_argument("slice [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of range for " + v.shape_str());
  }
  Tensor out({len});
  for (std::size_t i = 0; i < len; ++i) out[i] = v[start + i];

  const std::uint32_t vid = vv.id;
  return g.add_node(std::move(out), g.requires(vv),
                    [vid, start, len](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, vid})) return;
                      double* dV = gr.grad_buf(vid);
                      for (std::size_t i = 0; i < len; ++i) dV[start + i] += up[i];
                    });
}

Var slice_cols(Var mv, std::size_t start, std::size_t len) {
  Graph& g = *mv.g;
  const Tensor& m = g.value(mv);
  if (m.rank() != 2 || start + len > m.dim(1)) {
    throw std::invalid_argument("slice_cols [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of range for " + m.shape_str());
  }
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out({rows, len});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < len; ++j) out.at(r, j) = m.at(r, start + j);
  }

  const std::uint32_t mid = mv.id;
  return g.add_node(std::move(out), g.requires(mv),
                    [mid, start, len, rows, cols](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, mid})) return;
                      double* dM = gr.grad_buf(mid);
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t j = 0; j < len; ++j) {
                          dM[r * cols + start + j] += up[r * len + j];
                        }
                      }
                    });
}

Var add_rowvec(Var mv, Var vv) {
  Graph& g = same_graph(mv, vv);
  const Tensor& m = g.value(mv);
  const Tensor& v = g.value(vv);
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0)) shape_error("add_rowvec", m, v);
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out(m.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out.at(r, j) = m.at(r, j) + v[j];
  }

  const std::uint32_t mid = mv.id, vid = vv.id;
  bool req = g.requires(mv) || g.requires(vv);
  return g.add_node(std::move(out), req,
                    [mid, vid, rows, cols](Graph& gr, const Tensor& up) {
                      if (gr.requires(Var{&gr, mid})) {
                        double* dM = gr.grad_buf(mid);
                        for (std::size_t i = 0; i < rows * cols; ++i) dM[i] += up[i];
                      }
                      if (gr.requires(Var{&gr, vid})) {
                        double* dV = gr.grad_buf(vid);
                        for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t j = 0; j < cols; ++j) dV[j] += up[r * cols + j];
                        }
                      }
                    });
}

Var mean_rows(Var mv) {
  Graph& g = *mv.g;
  const Tensor& m = g.value(mv);
  if (m.rank() != 2) {
    throw std::invalid_argument("mean_rows expects rank 2, got " + m.shape_str());
  }
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out({cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += m.at(r, j);
  }
  for (std::size_t j = 0; j < cols; ++j) out[j] /= static_cast<double>(rows);

  const std::uint32_t mid = mv.id;
  return g.add_node(std::move(out), g.requires(mv),
                    [mid, rows, cols](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, mid})) return;
                      double* dM = gr.grad_buf(mid);
                      const double inv = 1.0 / static_cast<double>(rows);
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t j = 0; j < cols; ++j) dM[r * cols + j] += up[j] * inv;
                      }
                    });
}

Var sum(Var av) {
  Graph& g = *av.g;
  const Tensor& a = g.value(av);
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];

  const std::uint32_t aid = av.id;
  return g.add_node(Tensor::scalar(s), g.requires(av),
                    [aid](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, aid})) return;
                      const std::size_t n = gr.value(Var{&gr, aid}).numel();
                      double* dA = gr.grad_buf(aid);
                      for (std::size_t i = 0; i < n; ++i) dA[i] += up[0];
                    });
}

Var sum_squares(Var av) {
  Graph& g = *av.g;
  const Tensor& a = g.value(av);
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * a[i];

  const std::uint32_t aid = av.id;
  return g.add_node(Tensor::scalar(s), g.requires(av),
                    [aid](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, aid})) return;
                      const Tensor& x = gr.value(Var{&gr, aid});
                      double* dA = gr.grad_buf(aid);
                      for (std::size_t i = 0; i < x.numel(); ++i) dA[i] += up[0] * 2.0 * x[i];
                    });
}

Var add_n(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_n requires at least one operand");
  Var acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

Var reshape(Var av, std::vector<std::size_t> shape) {
  Graph& g = *av.g;
  const Tensor& a = g.value(av);
  Tensor out(std::move(shape), a.vec());
  const std::uint32_t aid = av.id;
  return g.add_node(std::move(out), g.requires(av),
                    [aid](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, aid})) return;
                      double* dA = gr.grad_buf(aid);
                      for (std::size_t i = 0; i < up.numel(); ++i) dA[i] += up[i];
                    });
}

namespace {

Var ste_impl(const char* name, Var src, Tensor mask) {
  Graph& g = *src.g;
  const Tensor& s = g.value(src);
  if (!s.same_shape(mask)) shape_error(name, s, mask);

  const std::uint32_t sid = src.id;
  return g.add_node(std::move(mask), g.requires(src),
                    [sid](Graph& gr, const Tensor& up) {
                      if (!gr.requires(Var{&gr, sid})) return;
                      double* dS = gr.grad_buf(sid);
                      for (std::size_t i = 0; i < up.numel(); ++i) dS[i] += up[i];
                    });
}

}  // namespace

Var ste_mask(Var probs, Tensor mask) { return ste_impl("ste_mask", probs, std::move(mask)); }

Var ste_mask_logit(Var logits, Tensor mask) {
  return ste_impl("ste_mask_logit", logits, std::move(mask));
}

}  // namespace gatecap
