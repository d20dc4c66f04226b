#include "gatecap/report.hpp"

#include <sstream>

namespace gatecap {

namespace {

void finalize(PruneReport& r, std::size_t bias_params) {
  for (const LayerStat& l : r.layers) {
    r.total += l.total;
    r.nnz += l.nnz;
  }
  r.sparsity = r.total == 0 ? 0.0 : 1.0 - static_cast<double>(r.nnz) / static_cast<double>(r.total);
  r.compression_ratio =
      r.nnz == 0 ? 0.0 : static_cast<double>(r.total) / static_cast<double>(r.nnz);
  r.bias_params = bias_params;
  r.total_with_bias = r.total + bias_params;
  r.nnz_with_bias = r.nnz + bias_params;
  r.sparsity_with_bias =
      1.0 - static_cast<double>(r.nnz_with_bias) / static_cast<double>(r.total_with_bias);
  r.cr_with_bias =
      static_cast<double>(r.total_with_bias) / static_cast<double>(r.nnz_with_bias);
}

LayerStat stat_for(const std::string& name, std::size_t total, std::size_t nnz) {
  LayerStat s;
  s.name = name;
  s.total = total;
  s.nnz = nnz;
  s.sparsity = total == 0 ? 0.0 : 1.0 - static_cast<double>(nnz) / static_cast<double>(total);
  return s;
}

}  // namespace

PruneReport report_model(const DecoderModel& model, const LayerMasks* fixed_masks) {
  PruneReport r;
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const GatedParameter& p = model.layers[i];
    std::size_t nnz = 0;
    if (fixed_masks != nullptr && (*fixed_masks)[i].numel() > 0) {
      const Tensor& mask = (*fixed_masks)[i];
      for (std::size_t j = 0; j < mask.numel(); ++j) nnz += mask[j] != 0.0 ? 1 : 0;
    } else if (model.gates_active) {
      for (std::size_t j = 0; j < p.G.numel(); ++j) nnz += p.G[j] > 0.0 ? 1 : 0;
    } else {
      nnz = p.W.numel();
    }
    r.layers.push_back(stat_for(p.name, p.W.numel(), nnz));
  }
  std::size_t bias =
      model.rnn_bias.numel() + model.attn_bias.numel() + model.logits_bias.numel();
  finalize(r, bias);
  return r;
}

PruneReport report_sparse(const SparseModel& model) {
  PruneReport r;
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const SparseMatrix& s = model.layers[i];
    r.layers.push_back(stat_for(kLayerNames[i], s.total(), s.nnz()));
  }
  std::size_t bias =
      model.rnn_bias.numel() + model.attn_bias.numel() + model.logits_bias.numel();
  finalize(r, bias);
  return r;
}

std::string layer_report_csv(const PruneReport& r, const std::string& config_echo) {
  std::ostringstream out;
  std::istringstream echo(config_echo);
  for (std::string line; std::getline(echo, line);) out << "# " << line << "\n";
  out << "layer,total,nnz,sparsity\n";
  out.precision(6);
  out << std::fixed;
  for (const LayerStat& l : r.layers) {
    out << l.name << "," << l.total << "," << l.nnz << "," << l.sparsity << "\n";
  }
  out << "overall_weights," << r.total << "," << r.nnz << "," << r.sparsity << "\n";
  out << "overall_with_biases," << r.total_with_bias << "," << r.nnz_with_bias << ","
      << r.sparsity_with_bias << "\n";
  return out.str();
}

}  // namespace gatecap
