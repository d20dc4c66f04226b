#pragma once

#include <memory>
#include <vector>

#include "gatecap/forward.hpp"
#include "gatecap/model.hpp"

namespace gatecap {

// Inference-side decoder state. Copyable so beam search can branch
// hypotheses. Keys/values are fixed per image and shared between copies.
struct DecodeState {
  std::vector<double> h;
  std::vector<double> m;  // empty for GRU
  std::shared_ptr<const Tensor> keys;    // n_pos x a
  std::shared_ptr<const Tensor> values;  // n_pos x a
};

// Minimal decode interface shared by the masked-dense model and the exported
// sparse model, so beam search and evaluation run identically over both.
class CaptionRuntime {
 public:
  virtual ~CaptionRuntime() = default;
  virtual std::size_t vocab() const = 0;
  virtual std::size_t max_positions() const = 0;
  virtual DecodeState begin(const Tensor& raw_features) const = 0;
  // Advances the state through one decoder step; returns p_t.
  virtual std::vector<double> step(DecodeState& state, int prev_token) const = 0;
};

// Effective dense weights with any masking already applied. No dropout, no
// gradients: plain loops, deterministic.
struct RuntimeWeights {
  CellKind cell = CellKind::kLstm;
  DecoderDims dims;
  std::array<Tensor, kLayerCount> layer;
  Tensor rnn_bias, attn_bias, logits_bias, encoder;
};

// Materialise inference weights from a model: gated models use the ML draw,
// baseline-pruned models use their fixed masks, dense models pass through.
RuntimeWeights materialize(const DecoderModel& model, const LayerMasks* fixed_masks);

class DenseRuntime final : public CaptionRuntime {
 public:
  explicit DenseRuntime(RuntimeWeights w) : w_(std::move(w)) {}

  std::size_t vocab() const override { return w_.dims.vocab; }
  std::size_t max_positions() const override { return w_.dims.feat_positions; }
  DecodeState begin(const Tensor& raw_features) const override;
  std::vector<double> step(DecodeState& state, int prev_token) const override;

  const RuntimeWeights& weights() const { return w_; }

 private:
  RuntimeWeights w_;
};

// Shared helpers for both runtimes.
namespace rtmath {
// y = x . W for a dense row-major matrix; y is resized to W.cols.
void vecmat(const std::vector<double>& x, const Tensor& w, std::vector<double>& y);
void softmax_inplace(std::vector<double>& x);
// Applies one recurrent cell update given the concatenated pre-activations
// (4r for LSTM). h and m are updated in place.
void lstm_update(const std::vector<double>& pre, const Tensor& bias, std::vector<double>& h,
                 std::vector<double>& m);
}  // namespace rtmath

}  // namespace gatecap
