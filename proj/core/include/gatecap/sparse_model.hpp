#pragma once

#include <string>
#include <vector>

#include "gatecap/csr.hpp"
#include "gatecap/forward.hpp"
#include "gatecap/runtime.hpp"

namespace gatecap {

// Post-export model: every decoder weight matrix in compressed-row form,
// stored transposed (output-dim rows) so one spmv per layer drives the
// recurrent step. Biases and the toy encoder stay dense. Carries the
// vocabulary and the resolved run config so evaluation is self-contained.
struct SparseModel {
  CellKind cell = CellKind::kLstm;
  DecoderDims dims;
  std::array<SparseMatrix, kLayerCount> layers;  // W^T per layer
  Tensor rnn_bias, attn_bias, logits_bias, encoder;
  std::vector<std::string> vocab_tokens;
  std::string config_echo;
};

// CSR of the transpose of a dense matrix.
SparseMatrix to_sparse_transposed(const Tensor& dense);
// Dense effective weight back in model orientation (in x out).
Tensor dense_from_transposed(const SparseMatrix& m);

// Applies the final masks (ML draw for gated models, fixed masks for the
// baselines, all-keep for dense) and compresses. Idempotent.
SparseModel export_sparse(const DecoderModel& model, const LayerMasks* fixed_masks,
                          std::vector<std::string> vocab_tokens, std::string config_echo);

void save_gspm(const std::string& path, const SparseModel& m);
SparseModel load_gspm(const std::string& path);

class SparseRuntime final : public CaptionRuntime {
 public:
  explicit SparseRuntime(SparseModel m) : m_(std::move(m)) {}

  std::size_t vocab() const override { return m_.dims.vocab; }
  std::size_t max_positions() const override { return m_.dims.feat_positions; }
  DecodeState begin(const Tensor& raw_features) const override;
  std::vector<double> step(DecodeState& state, int prev_token) const override;

  const SparseModel& model() const { return m_; }

 private:
  SparseModel m_;
};

}  // namespace gatecap
