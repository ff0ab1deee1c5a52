#include "cssl/contrastive.hpp"

#include <cmath>
#include <string>

#include "cssl/error.hpp"
#include "cssl/log.hpp"

namespace cssl {

void validate_config(const LossConfig& config) {
  if (!(config.tau > 0.0)) throw ConfigError("loss config: tau must be > 0");
  if (config.k_pseudo < 1) throw ConfigError("loss config: k_pseudo must be >= 1");
  if (config.rho < -1.0 || config.rho > 1.0) {
    throw ConfigError("loss config: rho must be in [-1, 1]");
  }
  if (config.lambda_self < 0.0) {
    throw ConfigError("loss config: lambda_self must be >= 0");
  }
}

namespace {

void require_tau(double tau) {
  if (!(tau > 0.0)) throw ValueError("contrastive loss: tau must be > 0");
}

void require_unit(const std::vector<double>& v, const char* who) {
  if (std::fabs(vec_norm(v) - 1.0) > 1e-6) {
    throw ValueError(std::string(who) + ": embedding is not unit-norm");
  }
}

void require_unit_all(const std::vector<std::vector<double>>& vs, const char* who) {
  for (const auto& v : vs) require_unit(v, who);
}

// -log softmax(logits / tau)[target]
NodeId neg_log_softmax_at(Trace& trace, const std::vector<NodeId>& logits,
                          std::size_t target, double tau) {
  NodeId scaled = trace.scale(trace.concat(logits), 1.0 / tau);
  return trace.scale(trace.log(trace.pick(trace.softmax(scaled), target)), -1.0);
}

NodeId mean_of(Trace& trace, const std::vector<NodeId>& scalars) {
  return trace.mean(trace.concat(scalars));
}

}  // namespace

NodeId build_info_nce(Trace& trace, NodeId z, NodeId z_pos,
                      const std::vector<NodeId>& negatives, double tau) {
  require_tau(tau);
  std::vector<NodeId> logits{trace.dot(z, z_pos)};
  for (NodeId n : negatives) logits.push_back(trace.dot(z, n));
  return neg_log_softmax_at(trace, logits, 0, tau);
}

NodeId build_simclr(Trace& trace, const std::vector<NodeId>& anchors,
                    const std::vector<NodeId>& positives, double tau) {
  require_tau(tau);
  if (anchors.empty()) throw ValueError("simclr: empty batch");
  if (anchors.size() != positives.size()) {
    throw ValueError("simclr: anchors and positives differ in length");
  }
  std::vector<NodeId> per_anchor;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    std::vector<NodeId> logits;
    for (NodeId p : positives) logits.push_back(trace.dot(anchors[i], p));
    per_anchor.push_back(neg_log_softmax_at(trace, logits, i, tau));
  }
  return mean_of(trace, per_anchor);
}

NodeId build_nnclr(Trace& trace, const std::vector<std::vector<double>>& neighbors,
                   const std::vector<NodeId>& pred_pos, double tau) {
  require_tau(tau);
  if (neighbors.empty()) throw ValueError("nnclr: empty batch");
  if (neighbors.size() != pred_pos.size()) {
    throw ValueError("nnclr: neighbors and positives differ in length");
  }
  std::vector<NodeId> per_anchor;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    NodeId nn = trace.constant(vec_tensor(neighbors[i]));  // detached
    std::vector<NodeId> logits;
    for (NodeId p : pred_pos) logits.push_back(trace.dot(nn, p));
    per_anchor.push_back(neg_log_softmax_at(trace, logits, i, tau));
  }
  return mean_of(trace, per_anchor);
}

NodeId build_scl(Trace& trace, const std::vector<NodeId>& anchors,
                 const std::vector<int>& anchor_labels,
                 const std::vector<NodeId>& pool, const std::vector<int>& pool_labels,
                 double tau) {
  require_tau(tau);
  if (anchors.empty()) throw ValueError("scl: empty batch");
  if (pool.empty()) throw ValueError("scl: empty pool");
  if (anchors.size() != anchor_labels.size() || pool.size() != pool_labels.size()) {
    throw ValueError("scl: labels do not match embeddings");
  }
  std::vector<NodeId> per_anchor;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    std::vector<NodeId> logits;
    std::vector<std::size_t> same;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      logits.push_back(trace.dot(anchors[i], pool[j]));
      if (pool_labels[j] == anchor_labels[i]) same.push_back(j);
    }
    if (same.empty()) {
      // no same-label positive in the pool: contributes 0 to the batch mean
      per_anchor.push_back(trace.constant(scalar_tensor(0.0)));
      continue;
    }
    std::vector<NodeId> terms;
    for (std::size_t j : same) {
      terms.push_back(neg_log_softmax_at(trace, logits, j, tau));
    }
    per_anchor.push_back(mean_of(trace, terms));
  }
  return mean_of(trace, per_anchor);
}

NodeId build_ncl(Trace& trace, const std::vector<NodeId>& anchors,
                 const std::vector<NodeId>& views,
                 const std::vector<std::vector<std::vector<double>>>& neighbors,
                 const std::vector<NodeId>& hard_negatives, double tau) {
  require_tau(tau);
  if (anchors.empty()) throw ValueError("ncl: empty batch");
  if (anchors.size() != views.size() || anchors.size() != neighbors.size()) {
    throw ValueError("ncl: anchors, views and neighbor lists differ in length");
  }
  std::vector<NodeId> per_anchor;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (neighbors[i].empty()) throw ValueError("ncl: no pseudo-positive neighbors");
    std::vector<NodeId> negs;
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      if (j != i) negs.push_back(anchors[j]);
    }
    for (NodeId h : hard_negatives) negs.push_back(h);

    NodeId term1 = build_info_nce(trace, anchors[i], views[i], negs, tau);
    std::vector<NodeId> pseudo;
    for (const auto& n : neighbors[i]) {
      NodeId nn = trace.constant(vec_tensor(n));  // detached
      pseudo.push_back(build_info_nce(trace, anchors[i], nn, negs, tau));
    }
    NodeId term2 = mean_of(trace, pseudo);
    per_anchor.push_back(trace.scale(trace.add(term1, term2), 0.5));
  }
  return mean_of(trace, per_anchor);
}

NodeId build_consistency(Trace& trace, NodeId pred_x, NodeId pred_xhat) {
  NodeId d = trace.sub(pred_x, pred_xhat);
  return trace.mean(trace.mul(d, d));
}

NodeId build_clamp(Trace& trace, NodeId x, double lo, double hi) {
  if (!(lo < hi)) throw ValueError("clamp: lo must be < hi");
  NodeId above_lo = trace.relu(trace.shift(x, -lo));
  NodeId above_hi = trace.relu(trace.shift(x, -hi));
  return trace.shift(trace.sub(above_lo, above_hi), lo);
}

NodeId build_pairwise_bce(Trace& trace,
                          const std::vector<std::vector<bool>>& pseudo_labels,
                          const std::vector<NodeId>& probs) {
  if (probs.size() < 2) throw ValueError("pairwise bce: need at least 2 samples");
  if (pseudo_labels.size() != probs.size()) {
    throw ValueError("pairwise bce: label matrix does not match sample count");
  }
  const double lo = 1e-7;
  std::vector<NodeId> terms;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (std::size_t j = i + 1; j < probs.size(); ++j) {
      NodeId s = build_clamp(trace, trace.dot(probs[i], probs[j]), lo, 1.0 - lo);
      NodeId term = pseudo_labels[i][j]
                        ? trace.scale(trace.log(s), -1.0)
                        : trace.scale(trace.log(trace.shift(trace.scale(s, -1.0), 1.0)),
                                      -1.0);
      terms.push_back(term);
    }
  }
  return mean_of(trace, terms);
}

NodeId build_fewshot_total(Trace& trace, NodeId sup_loss, NodeId self_loss,
                           double lambda) {
  if (lambda < 0.0) throw ValueError("fewshot total: lambda must be >= 0");
  return trace.add(sup_loss, trace.scale(self_loss, lambda));
}

NeighborSelection select_neighbors(const SupportSet& support,
                                   const std::vector<std::vector<double>>& anchors,
                                   const std::vector<std::optional<int>>& labels,
                                   bool use_label_aware) {
  if (support.empty()) throw NotFoundError("select_neighbors: empty support set");
  if (!labels.empty() && labels.size() != anchors.size()) {
    throw ValueError("select_neighbors: labels do not match anchors");
  }
  NeighborSelection sel;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    std::optional<int> label;
    if (use_label_aware && !labels.empty()) label = labels[i];
    SupportSet::AdmissibleResult r = support.nearest_admissible(anchors[i], label);
    if (r.fallback) {
      log::warn("nnclr: no admissible support entry for label " +
                std::to_string(*label) + ", falling back to unrestricted NN");
    }
    sel.neighbors.push_back(r.entry->embedding);
    sel.neighbor_labels.push_back(r.entry->label);
    sel.neighbor_indices.push_back(r.entry->insertion_index);
    sel.fallback.push_back(r.fallback);
  }
  return sel;
}

std::vector<std::vector<std::vector<double>>> select_k_neighbors(
    const SupportSet& support, const std::vector<std::vector<double>>& anchors,
    int k_pseudo) {
  if (support.empty()) throw NotFoundError("select_k_neighbors: empty support set");
  if (k_pseudo < 1) throw ValueError("select_k_neighbors: k must be >= 1");
  if (support.size() < static_cast<std::size_t>(k_pseudo)) {
    log::warn("ncl: support holds " + std::to_string(support.size()) +
              " entries, fewer than k=" + std::to_string(k_pseudo) + "; using all");
  }
  std::vector<std::vector<std::vector<double>>> out;
  for (const auto& z : anchors) {
    auto picked = support.nearest_k(z, static_cast<std::size_t>(k_pseudo));
    std::vector<std::vector<double>> vs;
    for (const SupportEntry* e : picked) vs.push_back(e->embedding);
    out.push_back(std::move(vs));
  }
  return out;
}

std::vector<std::vector<bool>> cosine_pseudo_labels(
    const std::vector<std::vector<double>>& features, double rho) {
  std::size_t n = features.size();
  std::vector<std::vector<bool>> l(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double denom = vec_norm(features[i]) * vec_norm(features[j]);
      if (denom < 1e-12) throw NumericError("pseudo labels: zero-norm feature");
      double cos = vec_dot(features[i], features[j]) / denom;
      l[i][j] = l[j][i] = cos >= rho;
    }
  }
  return l;
}

// ---- value-level wrappers: constant traces over the builders ----

namespace {

std::vector<NodeId> constants_for(Trace& trace,
                                  const std::vector<std::vector<double>>& vs) {
  std::vector<NodeId> nodes;
  nodes.reserve(vs.size());
  for (const auto& v : vs) nodes.push_back(trace.constant(vec_tensor(v)));
  return nodes;
}

double eval_scalar(const Trace& trace, NodeId node) {
  return evaluate(trace).scalar_at(node);
}

}  // namespace

double info_nce(const std::vector<double>& z, const std::vector<double>& z_pos,
                const std::vector<std::vector<double>>& negatives, double tau) {
  require_unit(z, "info_nce");
  require_unit(z_pos, "info_nce");
  require_unit_all(negatives, "info_nce");
  Trace trace;
  NodeId loss = build_info_nce(trace, trace.constant(vec_tensor(z)),
                               trace.constant(vec_tensor(z_pos)),
                               constants_for(trace, negatives), tau);
  return eval_scalar(trace, loss);
}

double info_nce_batch(const ContrastiveBatch& batch, double tau) {
  if (batch.anchors.empty()) throw ValueError("info_nce_batch: empty batch");
  if (batch.anchors.size() != batch.positives.size()) {
    throw ValueError("info_nce_batch: anchors and positives differ in length");
  }
  if (!batch.negatives.empty() && batch.negatives.size() != batch.anchors.size()) {
    throw ValueError("info_nce_batch: negative lists do not match anchors");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch.anchors.size(); ++i) {
    static const std::vector<std::vector<double>> kNone;
    const auto& negs = batch.negatives.empty() ? kNone : batch.negatives[i];
    total += info_nce(batch.anchors[i], batch.positives[i], negs, tau);
  }
  return total / static_cast<double>(batch.anchors.size());
}

double simclr_loss(const std::vector<std::vector<double>>& anchors,
                   const std::vector<std::vector<double>>& positives, double tau) {
  require_unit_all(anchors, "simclr");
  require_unit_all(positives, "simclr");
  Trace trace;
  NodeId loss = build_simclr(trace, constants_for(trace, anchors),
                             constants_for(trace, positives), tau);
  return eval_scalar(trace, loss);
}

NnclrResult nnclr_loss(const std::vector<std::vector<double>>& anchors,
                       const std::vector<std::vector<double>>& positives,
                       const SupportSet& support, double tau,
                       const std::vector<std::optional<int>>& labels,
                       bool use_label_aware, const ModelParams& params) {
  require_unit_all(anchors, "nnclr");
  require_unit_all(positives, "nnclr");
  if (anchors.size() != positives.size()) {
    throw ValueError("nnclr: anchors and positives differ in length");
  }
  NeighborSelection sel = select_neighbors(support, anchors, labels, use_label_aware);

  Trace trace;
  NodeMap nodes;
  for (const auto& [name, tensor] : params.tensors) {
    nodes[name] = trace.constant(tensor);
  }
  std::vector<NodeId> pred_pos;
  for (const auto& p : positives) {
    pred_pos.push_back(
        apply_predict_head(trace, nodes, trace.constant(vec_tensor(p))));
  }
  NodeId loss = build_nnclr(trace, sel.neighbors, pred_pos, tau);
  return NnclrResult{eval_scalar(trace, loss), std::move(sel)};
}

double scl_loss(const std::vector<std::vector<double>>& anchors,
                const std::vector<int>& anchor_labels,
                const std::vector<std::vector<double>>& pool,
                const std::vector<int>& pool_labels, double tau) {
  require_unit_all(anchors, "scl");
  require_unit_all(pool, "scl");
  Trace trace;
  NodeId loss = build_scl(trace, constants_for(trace, anchors), anchor_labels,
                          constants_for(trace, pool), pool_labels, tau);
  return eval_scalar(trace, loss);
}

double ncl_loss(const std::vector<std::vector<double>>& anchors,
                const std::vector<std::vector<double>>& views,
                const SupportSet& support,
                const std::vector<std::vector<double>>& hard_negatives, double tau,
                int k_pseudo) {
  require_unit_all(anchors, "ncl");
  require_unit_all(views, "ncl");
  require_unit_all(hard_negatives, "ncl");
  auto neighbors = select_k_neighbors(support, anchors, k_pseudo);
  Trace trace;
  NodeId loss = build_ncl(trace, constants_for(trace, anchors),
                          constants_for(trace, views), neighbors,
                          constants_for(trace, hard_negatives), tau);
  return eval_scalar(trace, loss);
}

double consistency_loss(const std::vector<double>& pred_x,
                        const std::vector<double>& pred_xhat) {
  if (pred_x.size() != pred_xhat.size() || pred_x.empty()) {
    throw ValueError("consistency: prediction lengths differ or are empty");
  }
  for (const auto* p : {&pred_x, &pred_xhat}) {
    double sum = 0.0;
    for (double v : *p) {
      if (v < 0.0) throw ValueError("consistency: negative probability entry");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw ValueError("consistency: probabilities do not sum to 1");
    }
  }
  Trace trace;
  NodeId loss = build_consistency(trace, trace.constant(vec_tensor(pred_x)),
                                  trace.constant(vec_tensor(pred_xhat)));
  return eval_scalar(trace, loss);
}

double pairwise_bce_loss(const std::vector<std::vector<double>>& features,
                         const std::vector<std::vector<double>>& head_probs,
                         double rho) {
  if (features.size() < 2) throw ValueError("pairwise bce: need at least 2 samples");
  if (features.size() != head_probs.size()) {
    throw ValueError("pairwise bce: features and head outputs differ in length");
  }
  for (const auto& p : head_probs) {
    double sum = 0.0;
    for (double v : p) {
      if (v < 0.0) throw ValueError("pairwise bce: negative probability entry");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw ValueError("pairwise bce: head output does not sum to 1");
    }
  }
  auto labels = cosine_pseudo_labels(features, rho);
  Trace trace;
  NodeId loss = build_pairwise_bce(trace, labels, constants_for(trace, head_probs));
  return eval_scalar(trace, loss);
}

double fewshot_total_loss(double sup_loss, double self_loss, double lambda) {
  if (lambda < 0.0) throw ValueError("fewshot total: lambda must be >= 0");
  return sup_loss + lambda * self_loss;
}

}  // namespace cssl
