#pragma once

#include <cstddef>

#include "gatecap/forward.hpp"
#include "gatecap/model.hpp"

namespace gatecap {

// Ramped in-training magnitude pruning (every layer pruned to the same
// ratio). Masks are monotone: once an entry is pruned it stays pruned.
struct GradualSchedule {
  double s_final = 0.9;
  std::size_t t_start = 0;
  std::size_t t_end = 1;
  std::size_t freq = 1;  // steps between mask updates

  bool valid() const { return t_start < t_end && freq >= 1; }
};

// Cubic sparsity ramp: 0 before t_start, s_final from t_end, in between
// s_final * (1 - (1 - (t - t_start)/(t_end - t_start))^3). Monotone
// nondecreasing in t.
double gradual_target(std::size_t t, const GradualSchedule& sched);

LayerMasks all_ones_masks(const DecoderModel& model);

// Per layer, prunes the smallest-magnitude surviving weights until the layer
// sparsity reaches gradual_target(t). Previously pruned entries stay pruned;
// magnitude ties break by lowest flat index.
void gradual_update(const DecoderModel& model, LayerMasks& masks, std::size_t t,
                    const GradualSchedule& sched);

enum class HardPruneScheme { kClassBlind, kClassUniform, kClassDistribution };

HardPruneScheme hard_scheme_from_name(const std::string& s);
const char* hard_scheme_name(HardPruneScheme s);

// One-shot magnitude pruning of a trained dense model:
//  - class_blind: one global magnitude threshold over all weights;
//  - class_uniform: each layer pruned to s_final independently;
//  - class_distribution: per-layer threshold proportional to the layer's
//    weight standard deviation, the global factor found by bisection so the
//    overall sparsity hits s_final (exact up to within-threshold ties, which
//    break by lowest (layer, index)).
LayerMasks hard_prune(const DecoderModel& model, double s_final, HardPruneScheme scheme);

std::size_t mask_nnz(const LayerMasks& masks);
std::size_t mask_total(const LayerMasks& masks);

}  // namespace gatecap
