#include "gatecap/gates.hpp"

#include <cmath>
#include <stdexcept>

namespace gatecap {

double lambda_heuristic(double s_target) {
  if (s_target >= 1.0) {
    throw std::invalid_argument("lambda_heuristic requires s_target < 1, got " +
                                std::to_string(s_target));
  }
  return std::max(5.0, 0.5 / (1.0 - s_target));
}

double cosine_anneal(std::size_t n, std::size_t n_max) {
  if (n_max == 0) throw std::invalid_argument("cosine_anneal requires n_max >= 1");
  if (n >= n_max) return 0.0;
  if (n == 0) return 1.0;
  double ratio = static_cast<double>(n) / static_cast<double>(n_max);
  return 0.5 * (1.0 + std::cos(ratio * 3.14159265358979323846));
}

Tensor bernoulli_mask(const Tensor& gate_logits, Rng& rng) {
  Tensor mask(gate_logits.shape());
  for (std::size_t i = 0; i < gate_logits.numel(); ++i) {
    double g = gate_logits[i];
    double p = g >= 0.0 ? 1.0 / (1.0 + std::exp(-g)) : std::exp(g) / (1.0 + std::exp(g));
    mask[i] = rng.bernoulli(p) ? 1.0 : 0.0;
  }
  return mask;
}

Tensor ml_mask(const Tensor& gate_logits) {
  Tensor mask(gate_logits.shape());
  for (std::size_t i = 0; i < gate_logits.numel(); ++i) {
    mask[i] = gate_logits[i] > 0.0 ? 1.0 : 0.0;
  }
  return mask;
}

double gate_sparsity(const std::vector<const GatedParameter*>& layers) {
  if (layers.empty()) throw std::invalid_argument("gate_sparsity requires at least one layer");
  std::size_t total = 0, nnz = 0;
  for (const GatedParameter* p : layers) {
    total += p->G.numel();
    for (std::size_t i = 0; i < p->G.numel(); ++i) {
      if (p->G[i] > 0.0) ++nnz;
    }
  }
  return 1.0 - static_cast<double>(nnz) / static_cast<double>(total);
}

double sparsity_loss_value(const std::vector<const GatedParameter*>& layers, double s_target,
                           std::size_t n, std::size_t n_max) {
  double alpha = cosine_anneal(n, n_max);
  return (1.0 - alpha) * std::fabs(s_target - gate_sparsity(layers));
}

Tensor export_final(const GatedParameter& p) {
  Tensor mask = ml_mask(p.G);
  Tensor out(p.W.shape());
  for (std::size_t i = 0; i < p.W.numel(); ++i) out[i] = p.W[i] * mask[i];
  return out;
}

Var sparsity_loss_graph(Graph& g, const std::vector<Var>& gate_leaves,
                        const std::vector<const GatedParameter*>& layers, double s_target,
                        double alpha, SteRoute route) {
  if (gate_leaves.empty() || gate_leaves.size() != layers.size()) {
    throw std::invalid_argument("sparsity_loss_graph: gate leaves and layers must align");
  }
  std::size_t p_total = 0;
  std::vector<Var> nnz_terms;
  nnz_terms.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    p_total += layers[i]->G.numel();
    Tensor mask = ml_mask(layers[i]->G);
    Var bin = route == SteRoute::kThroughSigmoid
                  ? ste_mask(sigmoid(gate_leaves[i]), std::move(mask))
                  : ste_mask_logit(gate_leaves[i], std::move(mask));
    nnz_terms.push_back(sum(bin));
  }
  Var p_nnz = add_n(nnz_terms);
  // sparsity = 1 - p_nnz / p_total; residual = s_target - sparsity
  Var sparsity = add_scalar(mul_scalar(p_nnz, -1.0 / static_cast<double>(p_total)), 1.0);
  Var residual = add_scalar(mul_scalar(sparsity, -1.0), s_target);
  return mul_scalar(abs(residual), 1.0 - alpha);
}

}  // namespace gatecap
