#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cssl/encoder.hpp"
#include "cssl/support_set.hpp"
#include "cssl/trace.hpp"

namespace cssl {

struct LossConfig {
  double tau = 0.1;
  double lambda_self = 1.0;
  double rho = 0.9;
  int k_pseudo = 1;
  bool use_label_aware = true;
};

void validate_config(const LossConfig& config);

struct ContrastiveBatch {
  std::vector<std::vector<double>> anchors;
  std::vector<std::vector<double>> positives;           // paired by index
  std::vector<std::optional<int>> labels;               // empty or one per anchor
  std::vector<std::vector<std::vector<double>>> negatives;  // empty or one list per anchor
};

// ---- trace-level builders ----
// Inputs are nodes so gradients flow wherever the caller wired them; support
// neighbors always enter as raw values and become constants (detached).

NodeId build_info_nce(Trace& trace, NodeId z, NodeId z_pos,
                      const std::vector<NodeId>& negatives, double tau);
NodeId build_simclr(Trace& trace, const std::vector<NodeId>& anchors,
                    const std::vector<NodeId>& positives, double tau);
// nnclr after NN selection: neighbors[i] replaces anchor i, pred_pos[k] are
// prediction-head outputs of the positives.
NodeId build_nnclr(Trace& trace, const std::vector<std::vector<double>>& neighbors,
                   const std::vector<NodeId>& pred_pos, double tau);
NodeId build_scl(Trace& trace, const std::vector<NodeId>& anchors,
                 const std::vector<int>& anchor_labels,
                 const std::vector<NodeId>& pool, const std::vector<int>& pool_labels,
                 double tau);
NodeId build_ncl(Trace& trace, const std::vector<NodeId>& anchors,
                 const std::vector<NodeId>& views,
                 const std::vector<std::vector<std::vector<double>>>& neighbors,
                 const std::vector<NodeId>& hard_negatives, double tau);
NodeId build_consistency(Trace& trace, NodeId pred_x, NodeId pred_xhat);
// pseudo_labels[i][j] for i<j; probs are head softmax output nodes.
NodeId build_pairwise_bce(Trace& trace, const std::vector<std::vector<bool>>& pseudo_labels,
                          const std::vector<NodeId>& probs);
NodeId build_fewshot_total(Trace& trace, NodeId sup_loss, NodeId self_loss,
                           double lambda);
// piecewise-linear clamp of a scalar node to [lo, hi]
NodeId build_clamp(Trace& trace, NodeId x, double lo, double hi);

// ---- support-set selection helpers (value level, detached) ----

struct NeighborSelection {
  std::vector<std::vector<double>> neighbors;  // one per anchor
  std::vector<std::optional<int>> neighbor_labels;
  std::vector<std::uint64_t> neighbor_indices;
  std::vector<bool> fallback;  // admissible subset was empty, unrestricted NN used
};

NeighborSelection select_neighbors(const SupportSet& support,
                                   const std::vector<std::vector<double>>& anchors,
                                   const std::vector<std::optional<int>>& labels,
                                   bool use_label_aware);

// k nearest per anchor for the pseudo-positive term; warns and returns all
// entries when the support holds fewer than k.
std::vector<std::vector<std::vector<double>>> select_k_neighbors(
    const SupportSet& support, const std::vector<std::vector<double>>& anchors,
    int k_pseudo);

// computes l_ij = [cos(features_i, features_j) >= rho]
std::vector<std::vector<bool>> cosine_pseudo_labels(
    const std::vector<std::vector<double>>& features, double rho);

// ---- value-level losses ----

double info_nce(const std::vector<double>& z, const std::vector<double>& z_pos,
                const std::vector<std::vector<double>>& negatives, double tau);
double info_nce_batch(const ContrastiveBatch& batch, double tau);
double simclr_loss(const std::vector<std::vector<double>>& anchors,
                   const std::vector<std::vector<double>>& positives, double tau);

struct NnclrResult {
  double loss;
  NeighborSelection selection;
};
// applies the prediction head of `params` to the positives
NnclrResult nnclr_loss(const std::vector<std::vector<double>>& anchors,
                       const std::vector<std::vector<double>>& positives,
                       const SupportSet& support, double tau,
                       const std::vector<std::optional<int>>& labels,
                       bool use_label_aware, const ModelParams& params);

double scl_loss(const std::vector<std::vector<double>>& anchors,
                const std::vector<int>& anchor_labels,
                const std::vector<std::vector<double>>& pool,
                const std::vector<int>& pool_labels, double tau);
double ncl_loss(const std::vector<std::vector<double>>& anchors,
                const std::vector<std::vector<double>>& views,
                const SupportSet& support,
                const std::vector<std::vector<double>>& hard_negatives, double tau,
                int k_pseudo);
double consistency_loss(const std::vector<double>& pred_x,
                        const std::vector<double>& pred_xhat);
double pairwise_bce_loss(const std::vector<std::vector<double>>& features,
                         const std::vector<std::vector<double>>& head_probs,
                         double rho);
double fewshot_total_loss(double sup_loss, double self_loss, double lambda);

}  // namespace cssl
