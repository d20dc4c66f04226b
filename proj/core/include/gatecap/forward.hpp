#pragma once

#include <array>
#include <optional>
#include <vector>

#include "gatecap/graph.hpp"
#include "gatecap/model.hpp"

namespace gatecap {

// Per-layer binary masks, aligned with kLayerNames order. Used both for the
// magnitude-pruning baselines and for materialising gated models.
using LayerMasks = std::array<Tensor, kLayerCount>;

enum class MaskMode {
  kNone,       // dense forward, raw weights
  kBernoulli,  // unbiased gate draw (training with live gates)
  kMl,         // deterministic gate draw (eval / frozen gates)
  kFixed       // externally supplied masks (baseline pruners)
};

struct BindOptions {
  bool training = false;       // enables dropout
  bool train_weights = true;   // leaves for W and biases require grad
  bool train_gates = false;
  bool train_encoder = false;
  MaskMode mask_mode = MaskMode::kNone;
  const LayerMasks* fixed_masks = nullptr;
  Rng* rng = nullptr;          // mask sampling (kBernoulli) and dropout
  double drop_rnn = 0.0;
  double drop_attn = 0.0;
};

// One tape-bound view of the model: leaves for every parameter plus the
// effective (possibly masked) weight of each layer. A binding is built once
// per training step and shared by every example in the batch, so the same
// sampled masks apply across the batch.
struct ModelBinding {
  Graph* g = nullptr;
  const DecoderModel* model = nullptr;
  BindOptions opt;
  std::array<Var, kLayerCount> raw;   // weight leaves
  std::array<Var, kLayerCount> gate;  // gate logit leaves (gated runs only)
  std::array<Var, kLayerCount> eff;   // effective weights used by the forward pass
  Var rnn_bias, attn_bias, logits_bias, encoder;
  bool has_gates = false;
};

ModelBinding bind_model(Graph& g, const DecoderModel& model, const BindOptions& opt);

// Per-example precomputed pieces: encoded feature map and the attention
// key/value projections (the feature map is constant across time steps).
struct ExampleCtx {
  Var f;        // feat_positions x feat_dim
  Var keys;     // feat_positions x attn_size
  Var values;   // feat_positions x attn_size
  Var i_embed;  // feat_dim (mean-pooled feature map)
};

ExampleCtx make_example(const ModelBinding& b, const Tensor& raw_features);

struct DecoderStateVars {
  Var h;
  Var m;  // LSTM memory; unused for GRU
  bool has_m = false;
};

// h(-1) = I_embed * W_init, m(-1) = 0 (LSTM only).
DecoderStateVars init_state(const ModelBinding& b, const ExampleCtx& ex);

// Additive attention over the feature positions, conditioned on the previous
// hidden state. Returns (context vector, attention weights).
std::pair<Var, Var> soft_attention(const ModelBinding& b, const ExampleCtx& ex, Var h_prev);

struct StepOut {
  Var logits;        // unnormalised vocabulary scores
  Var probs;         // softmax(logits)
  Var attn_weights;  // feat_positions
  DecoderStateVars state;
};

StepOut decoder_step(const ModelBinding& b, const ExampleCtx& ex, const DecoderStateVars& state,
                     std::size_t prev_token);

// Teacher-forced sum of per-token cross-entropies for one example. `targets`
// is the sequence the decoder must emit (content tokens plus the end marker);
// inputs are the start marker followed by targets[0..T-2].
Var caption_tokens_loss(const ModelBinding& b, const ExampleCtx& ex,
                        const std::vector<int>& targets, int start_token);

// lambda_d * ||theta||^2 over decoder weights and biases (gates excluded).
Var weight_decay_term(const ModelBinding& b, double lambda_d);

}  // namespace gatecap
