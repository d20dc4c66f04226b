#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "gatecap/gates.hpp"
#include "gatecap/rng.hpp"
#include "gatecap/tensor.hpp"

namespace gatecap {

enum class CellKind { kLstm, kGru };

const char* cell_name(CellKind c);
CellKind cell_from_name(const std::string& s);

// Prunable decoder layers, in fixed order. This is the complete layer name
// set used by reports and checkpoints.
enum LayerId : std::size_t {
  kWInit = 0,     // rnn_initial_state
  kRnnKernel,     // concatenated cell gate kernels
  kAttnKey,
  kAttnValue,
  kAttnQuery,
  kAttnMlp,       // second layer of the 2-layer attention MLP
  kWordEmb,
  kLogits,
  kLayerCount
};

inline constexpr std::array<const char*, kLayerCount> kLayerNames = {
    "rnn_initial_state", "rnn_kernel", "attn_key", "attn_value",
    "attn_query",        "attn_mlp",   "word_embedding", "logits"};

struct DecoderDims {
  std::size_t rnn_units = 64;       // r
  std::size_t word_size = 32;       // q
  std::size_t attn_size = 64;       // a
  std::size_t vocab = 0;            // v, from the dataset
  std::size_t feat_positions = 16;  // attention positions
  std::size_t feat_dim = 32;        // per-position feature size == image embed size
  std::size_t raw_dim = 32;         // synthetic scene feature size (encoder input)
};

// The attention-equipped single-layer recurrent caption decoder plus the toy
// feature-projection encoder. Every weight matrix carries gate logits; they
// are only consulted when gates_active is set. Biases are never pruned. The
// encoder stands in for the CNN: it is excluded from pruning and from all
// size accounting, frozen in stage 1 and trained in stage 2.
struct DecoderModel {
  CellKind cell = CellKind::kLstm;
  DecoderDims dims;
  std::array<GatedParameter, kLayerCount> layers;
  Tensor rnn_bias;     // gate_blocks * r; LSTM forget block initialised to 1
  Tensor attn_bias;    // a, hidden-layer bias of the attention MLP
  Tensor logits_bias;  // v
  Tensor encoder;      // raw_dim x feat_dim
  bool gates_active = false;

  std::size_t gate_blocks() const { return cell == CellKind::kLstm ? 4 : 3; }

  GatedParameter& layer(LayerId id) { return layers[id]; }
  const GatedParameter& layer(LayerId id) const { return layers[id]; }

  std::vector<const GatedParameter*> gated_layers() const;

  // Xavier-uniform weights, zero biases (LSTM forget-gate bias 1.0), gates at
  // gate_init everywhere.
  static DecoderModel init(CellKind cell, DecoderDims dims, double gate_init, bool gated,
                           Rng& rng);
};

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace gatecap
