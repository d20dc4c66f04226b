#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gatecap/rng.hpp"
#include "gatecap/tensor.hpp"

namespace gatecap {

class Graph;

// Lightweight handle to a node on the tape.
struct Var {
  Graph* g = nullptr;
  std::uint32_t id = 0;
  bool valid() const { return g != nullptr; }
};

// Dynamic reverse-mode tape. Operations append nodes in execution order, so
// the record is topologically sorted by construction; backward() walks it
// once in reverse. Rebuilt from scratch every training step.
class Graph {
 public:
  Var leaf(const Tensor& value);          // requires_grad taken from the tensor
  Var constant(Tensor value);             // never receives gradient

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Accumulated gradient; zeros if the node never received one.
  Tensor grad(Var v) const;
  bool has_grad(Var v) const { return nodes_[v.id].has_grad; }

  // Reverse pass from a scalar loss. Each requires_grad node reachable from
  // the loss accumulates its gradient. Running backward twice on the same
  // tape without reset_grads() is an error.
  void backward(Var loss);
  void reset_grads();
  void clear();

  std::size_t size() const { return nodes_.size(); }

  // --- internals used by the op implementations ---
  using PullFn = std::function<void(Graph&, const Tensor& upstream)>;
  Var add_node(Tensor value, bool requires_grad, PullFn pull);
  bool requires(Var v) const { return nodes_[v.id].requires_grad; }
  // Accumulation buffer for a node's gradient (allocated zeroed on demand).
  double* grad_buf(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    PullFn pull;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// --- primitive operations -------------------------------------------------

// Matrix product. Accepts [m,k]x[k,n] -> [m,n], and the vector forms
// [k]x[k,n] -> [n] and [m,k]x[k] -> [m]. Shape mismatches throw with both
// shapes in the message.
Var matmul(Var a, Var b);

Var add(Var a, Var b);   // same shape
Var sub(Var a, Var b);   // same shape
Var mul(Var a, Var b);   // same shape, elementwise
Var add_scalar(Var a, double c);
Var mul_scalar(Var a, double c);
Var sigmoid(Var a);
Var tanh(Var a);
Var abs(Var a);          // subgradient at 0 is 0

// Softmax along the last axis (vector, or each row of a matrix).
// Max-subtraction keeps it finite for any input.
Var softmax(Var a);

// Row lookup: table [v,q], 0 <= index < v -> [q]. Backward scatters into the
// selected row only.
Var lookup(Var table, std::size_t index);

// Cross-entropy against a target id. Takes unnormalised scores and applies a
// stable log-softmax internally: loss = logsumexp(x) - x[target].
Var cross_entropy(Var logits, std::size_t target);

// Inverted dropout: in training mode survivors are scaled by 1/(1-rate);
// in eval mode the input passes through unchanged. rate must be in [0,1).
Var dropout(Var x, double rate, bool training, Rng& rng);

Var concat(Var a, Var b);                       // 1-D
Var slice(Var v, std::size_t start, std::size_t len);           // 1-D
Var slice_cols(Var m, std::size_t start, std::size_t len);      // 2-D column block
Var add_rowvec(Var m, Var v);                   // add v to every row of m
Var mean_rows(Var m);                           // column means: [r,c] -> [c]
Var sum(Var a);                                 // scalar
Var sum_squares(Var a);                         // scalar, sum of x^2
Var add_n(const std::vector<Var>& xs);
Var reshape(Var a, std::vector<std::size_t> shape);

// Straight-through binarisation. Forward emits the given binary mask;
// backward passes the upstream gradient to `probs` unchanged, so the
// composition sample(sigmoid(G)) differentiates as sigmoid'(G).
Var ste_mask(Var probs, Tensor mask);

// Straight-through all the way to the logits: forward emits the mask,
// backward passes the gradient to `logits` unchanged (no sigmoid factor).
Var ste_mask_logit(Var logits, Tensor mask);

}  // namespace gatecap
