#pragma once

#include <string>
#include <vector>

#include "gatecap/forward.hpp"
#include "gatecap/sparse_model.hpp"

namespace gatecap {

struct LayerStat {
  std::string name;
  std::size_t total = 0;
  std::size_t nnz = 0;
  double sparsity = 0.0;
};

// Size accounting behind every NNZ / compression figure. The headline
// numbers count prunable weights only; a second pair of figures folds in the
// (never pruned) biases since published NNZ counts are ambiguous about them.
struct PruneReport {
  std::vector<LayerStat> layers;
  std::size_t total = 0;
  std::size_t nnz = 0;
  double sparsity = 0.0;
  double compression_ratio = 1.0;  // total / nnz
  std::size_t bias_params = 0;
  std::size_t total_with_bias = 0;
  std::size_t nnz_with_bias = 0;
  double sparsity_with_bias = 0.0;
  double cr_with_bias = 1.0;
};

// Gated models count ML-kept entries; fixed masks count mask ones; dense
// models report zero sparsity.
PruneReport report_model(const DecoderModel& model, const LayerMasks* fixed_masks);
PruneReport report_sparse(const SparseModel& model);

// Layer CSV: {layer,total,nnz,sparsity} rows plus an overall row; any
// config echo is embedded as leading '#' comment lines.
std::string layer_report_csv(const PruneReport& r, const std::string& config_echo);

}  // namespace gatecap
