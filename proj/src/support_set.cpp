#include "cssl/support_set.hpp"

#include <algorithm>
#include <cmath>

#include "cssl/error.hpp"
#include "cssl/tensor.hpp"

namespace cssl {

SupportSet::SupportSet(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValueError("SupportSet: capacity must be positive");
}

void SupportSet::push(const std::vector<double>& embedding, std::optional<int> label) {
  if (std::fabs(vec_norm(embedding) - 1.0) > 1e-8) {
    throw ValueError("SupportSet::push: entry is not unit-norm");
  }
  entries_.push_back(SupportEntry{embedding, label, next_index_++});
  while (entries_.size() > capacity_) entries_.pop_front();
}

const SupportEntry& SupportSet::nearest(const std::vector<double>& z) const {
  if (entries_.empty()) throw NotFoundError("SupportSet::nearest: empty support set");
  const SupportEntry* best = &entries_.front();
  double best_d = vec_dist2(z, best->embedding);
  for (const SupportEntry& e : entries_) {
    double d = vec_dist2(z, e.embedding);
    // strict < keeps the earliest insertion on ties (storage order is
    // insertion order)
    if (d < best_d) {
      best = &e;
      best_d = d;
    }
  }
  return *best;
}

std::vector<const SupportEntry*> SupportSet::nearest_k(const std::vector<double>& z,
                                                       std::size_t k) const {
  std::vector<std::pair<double, const SupportEntry*>> scored;
  scored.reserve(entries_.size());
  for (const SupportEntry& e : entries_) {
    scored.emplace_back(vec_dist2(z, e.embedding), &e);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<const SupportEntry*> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) {
    out.push_back(scored[i].second);
  }
  return out;
}

std::vector<const SupportEntry*> SupportSet::exemplar_positives(
    std::optional<int> label) const {
  std::vector<const SupportEntry*> out;
  for (const SupportEntry& e : entries_) {
    if (!label || !e.label || *e.label == *label) out.push_back(&e);
  }
  return out;
}

SupportSet::AdmissibleResult SupportSet::nearest_admissible(
    const std::vector<double>& z, std::optional<int> label) const {
  if (entries_.empty()) {
    throw NotFoundError("SupportSet::nearest_admissible: empty support set");
  }
  std::vector<const SupportEntry*> pool = exemplar_positives(label);
  if (pool.empty()) {
    return AdmissibleResult{&nearest(z), true};
  }
  const SupportEntry* best = pool.front();
  double best_d = vec_dist2(z, best->embedding);
  for (const SupportEntry* e : pool) {
    double d = vec_dist2(z, e->embedding);
    if (d < best_d) {
      best = e;
      best_d = d;
    }
  }
  return AdmissibleResult{best, false};
}

}  // namespace cssl
