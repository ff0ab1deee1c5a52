#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cssl/error.hpp"

namespace cssl {

struct Sample {
  int id = 0;
  std::vector<double> x;
  std::optional<int> label;
};

// synthetic Gaussian-blob dataset description
struct SyntheticSpec {
  int num_classes = 2;
  int dim = 2;
  int per_class_count = 10;
  double cluster_std = 0.1;
  double centroid_scale = 1.0;
  std::uint64_t seed = 0;
};

void validate_config(const SyntheticSpec& spec);

// centroids drawn uniformly in [-centroid_scale, centroid_scale]^dim, then
// per-class Gaussian samples around them; fully determined by spec.seed
std::vector<Sample> gen_clusters(const SyntheticSpec& spec);

// vector-space stand-in for image augmentation: multiplicative scale, then
// additive jitter, then coordinate masking, in that fixed order
struct AugmentSpec {
  double jitter_std = 0.0;
  double mask_prob = 0.0;
  double scale_lo = 1.0;
  double scale_hi = 1.0;
};

void validate_config(const AugmentSpec& spec);

std::vector<double> augment(const std::vector<double>& x, const AugmentSpec& spec,
                            std::uint64_t stream_seed);

// labeled/unlabeled pools; ground truth stripped from the unlabeled pool is
// reachable only through the evaluation-only accessors below
class DatasetSplit {
 public:
  std::vector<Sample> labeled;    // labels visible to training
  std::vector<Sample> unlabeled;  // label field cleared

  // evaluation-only ground truth for samples whose label was stripped
  bool has_eval_label(int sample_id) const;
  int eval_label(int sample_id) const;
  std::set<int> labeled_classes() const;
  // classes present among stripped samples; evaluation-only
  std::set<int> hidden_classes() const;

 private:
  std::map<int, int> hidden_;

  friend DatasetSplit split(const std::vector<Sample>& samples,
                            double labeled_fraction, bool ncd_mode,
                            const std::set<int>& known_classes);
};

// plain mode: the first floor(labeled_fraction * n_c) samples of each class
// keep their labels, the rest are stripped. ncd mode: known classes keep
// labels, every other class is stripped wholesale.
DatasetSplit split(const std::vector<Sample>& samples, double labeled_fraction,
                   bool ncd_mode, const std::set<int>& known_classes = {});

struct SessionSpec {
  std::vector<int> classes;
  int shots = 5;
};

struct CilProtocol {
  std::vector<int> base_classes;
  std::vector<SessionSpec> sessions;
  int test_per_class = 1;
};

void validate_config(const CilProtocol& protocol);

struct SessionData {
  std::vector<int> classes;
  std::vector<Sample> shots;
};

struct CilData {
  std::vector<Sample> base_train;
  std::vector<SessionData> sessions;
  std::map<int, std::vector<Sample>> test_sets;  // class id -> held-out queries
};

// per-class selection keyed by mix_seed(seed, class): shuffle, take the test
// set first, then training shots, all without replacement
CilData make_sessions(const std::vector<Sample>& samples, const CilProtocol& protocol,
                      std::uint64_t seed);

// big-endian IDX ingestion; pixels scaled to [0,1]
std::vector<Sample> load_idx(const std::string& images_path,
                             const std::string& labels_path);

struct Dataset {
  SyntheticSpec spec;
  std::vector<Sample> samples;
};

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace cssl
