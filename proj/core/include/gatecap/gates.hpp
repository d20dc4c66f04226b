#pragma once

#include <string>
#include <vector>

#include "gatecap/graph.hpp"
#include "gatecap/rng.hpp"
#include "gatecap/tensor.hpp"

namespace gatecap {

// A prunable weight matrix paired with its gate-logit matrix. The sigmoid of
// each logit is the keep-probability of the corresponding weight. Gates are
// initialised to a shared constant (gate_init) and frozen during fine-tuning.
struct GatedParameter {
  std::string name;
  Tensor W;
  Tensor G;
  bool frozen = false;

  GatedParameter() = default;
  GatedParameter(std::string layer_name, Tensor weights, double gate_init)
      : name(std::move(layer_name)),
        W(std::move(weights)),
        G(Tensor::full(W.shape(), gate_init)) {}
};

struct SparsityConfig {
  double s_target = 0.9;
  double lambda_s = 5.0;
  double gate_init = 5.0;  // m
  std::size_t n_max = 1;
  double gate_lr = 100.0;
};

// lambda_s = max(5, 0.5/(1 - s_target)). s_target must be < 1.
double lambda_heuristic(double s_target);

// alpha = 0.5 * (1 + cos(n*pi/n_max)); steps past n_max clamp to 0.
double cosine_anneal(std::size_t n, std::size_t n_max);

// Unbiased draw: each entry is 1 with probability sigmoid(g).
Tensor bernoulli_mask(const Tensor& gate_logits, Rng& rng);

// Maximum-likelihood draw: 1 iff sigmoid(g) > 0.5, i.e. iff g > 0.
// The g == 0 tie rounds to 0 (pruned).
Tensor ml_mask(const Tensor& gate_logits);

// Fraction of pruned entries under the ML draw, over all listed layers.
double gate_sparsity(const std::vector<const GatedParameter*>& layers);

// (1 - alpha(n, n_max)) * |s_target - ml_sparsity|, as a plain value.
double sparsity_loss_value(const std::vector<const GatedParameter*>& layers, double s_target,
                           std::size_t n, std::size_t n_max);

// L = L_c + lambda_s * L_s.
inline double total_loss(double caption_loss, double sparsity_loss, double lambda_s) {
  return caption_loss + lambda_s * sparsity_loss;
}

// Final export, Eq-style W ⊙ round(sigmoid(G)). Idempotent: re-exporting an
// exported matrix with the same gates returns the identical tensor.
Tensor export_final(const GatedParameter& p);

// How the sparsity-loss binarisation routes its straight-through gradient to
// the gate logits. kThroughSigmoid keeps the sigmoid derivative (gradient
// sigmoid'(g)/p_total per gate); kToLogit treats round(sigmoid(.)) as
// identity, giving each gate a constant-magnitude 1/p_total push. The
// effective-weight path always keeps the sigmoid derivative.
enum class SteRoute { kThroughSigmoid, kToLogit };

// Graph builder for the annealed sparsity loss. gate_leaves are the in-graph
// gate logit leaves, aligned with `layers`. Uses ML masks internally.
Var sparsity_loss_graph(Graph& g, const std::vector<Var>& gate_leaves,
                        const std::vector<const GatedParameter*>& layers, double s_target,
                        double alpha, SteRoute route);

}  // namespace gatecap
