#include "gatecap/pruners.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gatecap {

double gradual_target(std::size_t t, const GradualSchedule& sched) {
  if (!sched.valid()) throw std::invalid_argument("invalid gradual schedule");
  if (t < sched.t_start) return 0.0;
  if (t >= sched.t_end) return sched.s_final;
  double span = static_cast<double>(sched.t_end - sched.t_start);
  double u = 1.0 - static_cast<double>(t - sched.t_start) / span;
  return sched.s_final * (1.0 - u * u * u);
}

LayerMasks all_ones_masks(const DecoderModel& model) {
  LayerMasks masks;
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    masks[i] = Tensor::full(model.layers[i].W.shape(), 1.0);
  }
  return masks;
}

void gradual_update(const DecoderModel& model, LayerMasks& masks, std::size_t t,
                    const GradualSchedule& sched) {
  const double target = gradual_target(t, sched);
  for (std::size_t li = 0; li < kLayerCount; ++li) {
    const Tensor& w = model.layers[li].W;
    Tensor& mask = masks[li];
    const std::size_t n = w.numel();
    const std::size_t want = static_cast<std::size_t>(target * static_cast<double>(n));

    std::size_t pruned = 0;
    for (std::size_t i = 0; i < n; ++i) pruned += mask[i] == 0.0 ? 1 : 0;
    if (want <= pruned) continue;  // monotone: never regrow

    std::vector<std::size_t> surv;
    surv.reserve(n - pruned);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i] != 0.0) surv.push_back(i);
    }
    std::sort(surv.begin(), surv.end(), [&](std::size_t a, std::size_t b) {
      double fa = std::fabs(w[a]), fb = std::fabs(w[b]);
      return fa != fb ? fa < fb : a < b;
    });
    const std::size_t need = want - pruned;
    for (std::size_t k = 0; k < need; ++k) mask[surv[k]] = 0.0;
  }
}

HardPruneScheme hard_scheme_from_name(const std::string& s) {
  if (s == "blind" || s == "class_blind") return HardPruneScheme::kClassBlind;
  if (s == "uniform" || s == "class_uniform") return HardPruneScheme::kClassUniform;
  if (s == "distribution" || s == "class_distribution") return HardPruneScheme::kClassDistribution;
  throw std::invalid_argument("unknown hard pruning scheme: " + s);
}

const char* hard_scheme_name(HardPruneScheme s) {
  switch (s) {
    case HardPruneScheme::kClassBlind: return "class_blind";
    case HardPruneScheme::kClassUniform: return "class_uniform";
    default: return "class_distribution";
  }
}

namespace {

struct Entry {
  double key;  // |w| or |w|/sigma_layer
  std::uint32_t layer;
  std::uint32_t index;
};

void prune_first(std::vector<Entry>& entries, std::size_t k, LayerMasks& masks) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.index < b.index;
  });
  for (std::size_t i = 0; i < k && i < entries.size(); ++i) {
    masks[entries[i].layer][entries[i].index] = 0.0;
  }
}

}  // namespace

LayerMasks hard_prune(const DecoderModel& model, double s_final, HardPruneScheme scheme) {
  if (s_final < 0.0 || s_final >= 1.0) {
    throw std::invalid_argument("hard_prune target sparsity must be in [0,1), got " +
                                std::to_string(s_final));
  }
  LayerMasks masks = all_ones_masks(model);
  std::size_t total = 0;
  for (std::size_t li = 0; li < kLayerCount; ++li) total += model.layers[li].W.numel();
  const std::size_t k_total = static_cast<std::size_t>(s_final * static_cast<double>(total));

  if (scheme == HardPruneScheme::kClassBlind) {
    std::vector<Entry> entries;
    entries.reserve(total);
    for (std::uint32_t li = 0; li < kLayerCount; ++li) {
      const Tensor& w = model.layers[li].W;
      for (std::uint32_t i = 0; i < w.numel(); ++i) {
        entries.push_back({std::fabs(w[i]), li, i});
      }
    }
    prune_first(entries, k_total, masks);
    return masks;
  }

  if (scheme == HardPruneScheme::kClassUniform) {
    // Per-layer quota floor(s * N_l); the remainder against floor(s * N) is
    // spread by largest fractional part so every scheme prunes the same
    // overall count.
    std::array<std::size_t, kLayerCount> quota{};
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t li = 0; li < kLayerCount; ++li) {
      double exact = s_final * static_cast<double>(model.layers[li].W.numel());
      quota[li] = static_cast<std::size_t>(exact);
      assigned += quota[li];
      frac.push_back({exact - static_cast<double>(quota[li]), li});
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < k_total && i < frac.size(); ++i, ++assigned) {
      ++quota[frac[i].second];
    }
    for (std::uint32_t li = 0; li < kLayerCount; ++li) {
      const Tensor& w = model.layers[li].W;
      std::vector<Entry> entries;
      entries.reserve(w.numel());
      for (std::uint32_t i = 0; i < w.numel(); ++i) entries.push_back({std::fabs(w[i]), li, i});
      prune_first(entries, quota[li], masks);
    }
    return masks;
  }

  // class_distribution: threshold lambda * sigma_l per layer.
  std::array<double, kLayerCount> sigma{};
  for (std::size_t li = 0; li < kLayerCount; ++li) {
    const Tensor& w = model.layers[li].W;
    double mean = 0.0;
    for (std::size_t i = 0; i < w.numel(); ++i) mean += w[i];
    mean /= static_cast<double>(w.numel());
    double var = 0.0;
    for (std::size_t i = 0; i < w.numel(); ++i) var += (w[i] - mean) * (w[i] - mean);
    sigma[li] = std::max(std::sqrt(var / static_cast<double>(w.numel())), 1e-300);
  }

  auto count_below = [&](double lambda) {
    std::size_t c = 0;
    for (std::size_t li = 0; li < kLayerCount; ++li) {
      const Tensor& w = model.layers[li].W;
      const double thr = lambda * sigma[li];
      for (std::size_t i = 0; i < w.numel(); ++i) c += std::fabs(w[i]) < thr ? 1 : 0;
    }
    return c;
  };

  double lo = 0.0, hi = 1.0;
  while (count_below(hi) < k_total) hi *= 2.0;
  for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (count_below(mid) > k_total) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  // Prune everything strictly below lo * sigma_l, then resolve threshold
  // ties in deterministic (layer, index) order until the count is exact.
  std::size_t pruned = 0;
  for (std::uint32_t li = 0; li < kLayerCount; ++li) {
    const Tensor& w = model.layers[li].W;
    const double thr = lo * sigma[li];
    for (std::uint32_t i = 0; i < w.numel(); ++i) {
      if (std::fabs(w[i]) < thr) {
        masks[li][i] = 0.0;
        ++pruned;
      }
    }
  }
  if (pruned < k_total) {
    std::vector<Entry> boundary;
    for (std::uint32_t li = 0; li < kLayerCount; ++li) {
      const Tensor& w = model.layers[li].W;
      for (std::uint32_t i = 0; i < w.numel(); ++i) {
        if (masks[li][i] != 0.0 && std::fabs(w[i]) < hi * sigma[li]) {
          boundary.push_back({std::fabs(w[i]) / sigma[li], li, i});
        }
      }
    }
    prune_first(boundary, k_total - pruned, masks);
  }
  return masks;
}

std::size_t mask_nnz(const LayerMasks& masks) {
  std::size_t nnz = 0;
  for (const Tensor& m : masks) {
    for (std::size_t i = 0; i < m.numel(); ++i) nnz += m[i] != 0.0 ? 1 : 0;
  }
  return nnz;
}

std::size_t mask_total(const LayerMasks& masks) {
  std::size_t total = 0;
  for (const Tensor& m : masks) total += m.numel();
  return total;
}

}  // namespace gatecap
