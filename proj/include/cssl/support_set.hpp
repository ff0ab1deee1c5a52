#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace cssl {

struct SupportEntry {
  std::vector<double> embedding;  // unit norm
  std::optional<int> label;
  std::uint64_t insertion_index = 0;
};

// FIFO queue of past embeddings searched for nearest-neighbor positives.
// Single writer; reads between pushes are safe.
class SupportSet {
 public:
  explicit SupportSet(std::size_t capacity);

  void push(const std::vector<double>& embedding, std::optional<int> label);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<SupportEntry>& entries() const { return entries_; }

  // Exact linear scan, Euclidean distance, ties by lowest insertion index.
  const SupportEntry& nearest(const std::vector<double>& z) const;

  // Up to k nearest entries ordered by (distance, insertion index).
  std::vector<const SupportEntry*> nearest_k(const std::vector<double>& z,
                                             std::size_t k) const;

  // Entries admissible as neighbors for a query with this label: everything
  // for an unlabeled query, same-label plus unlabeled entries otherwise. The
  // result can be empty; the caller decides on the fallback.
  std::vector<const SupportEntry*> exemplar_positives(std::optional<int> label) const;

  struct AdmissibleResult {
    const SupportEntry* entry;
    bool fallback;  // true when the admissible subset was empty
  };
  // Label-aware NN with the documented fallback to an unrestricted search.
  AdmissibleResult nearest_admissible(const std::vector<double>& z,
                                      std::optional<int> label) const;

 private:
  std::size_t capacity_;
  std::deque<SupportEntry> entries_;
  std::uint64_t next_index_ = 0;
};

}  // namespace cssl
