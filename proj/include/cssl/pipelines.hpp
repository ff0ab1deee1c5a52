#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cssl/contrastive.hpp"
#include "cssl/data.hpp"
#include "cssl/encoder.hpp"
#include "cssl/optimizer.hpp"

namespace cssl {

struct TrainConfig {
  EncoderConfig encoder;
  int epochs = 5;
  int batch_size = 8;
  OptMethod method = OptMethod::kAdam;
  double lr = 0.01;
  double momentum = 0.9;  // sgd-momentum only
  LossConfig loss;
  AugmentSpec augment;
  std::size_t support_capacity = 256;
  std::uint64_t seed = 0;
  int stage_id = 0;
  int novel_classes = 2;   // width of the unlabeled head in the ncd pipeline
  bool supervised = true;  // fewshot: keep the cross-entropy term
};

void validate_config(const TrainConfig& config);

OptimizerState make_optimizer(const TrainConfig& config);

struct TrainResult {
  ModelParams params;
  std::vector<double> history;  // per-epoch mean loss
};

// self-supervised pretraining: per batch, nearest-neighbor contrastive loss
// against the FIFO support set, label-aware where labels exist; view-1
// embeddings are pushed into the support set after the optimizer step
TrainResult pretrain_cssl(const std::vector<Sample>& samples,
                          const TrainConfig& config);

enum class FinetuneMode { kLinearProbe, kFull };

// cross-entropy training of a classifier head named "main" over the labeled
// classes; linear-probe mode freezes everything except that head
TrainResult finetune_supervised(ModelParams params, const std::vector<Sample>& samples,
                                const TrainConfig& config, FinetuneMode mode);

// supervised cross-entropy plus lambda-weighted self-supervised auxiliary
// loss over the same batches; config.supervised=false drops the CE term,
// config.loss.lambda_self = 0 drops the self-supervised branch
TrainResult fewshot_base(const std::vector<Sample>& samples, const TrainConfig& config);

struct NclResult {
  ModelParams params;
  std::vector<double> stage1;  // CE + consistency on the labeled pool
  std::vector<double> stage2;  // neighborhood contrastive + supervised contrastive
  std::vector<double> stage3;  // pairwise pseudo-label BCE + consistency
};

// three sequential stages over one shared encoder; attaches a "labeled" head
// over the split's labeled classes and an "unlabeled" head of
// config.novel_classes outputs (trained in stage 3 with the labeled head
// frozen)
NclResult ncl_pipeline(const DatasetSplit& split, const TrainConfig& config);

// argmax of the unlabeled head on raw inputs; ties keep the lowest index
std::vector<int> ncl_assign(const ModelParams& params,
                            const std::vector<Sample>& samples);

// ---- checkpointing ----

struct CheckpointManifest {
  int stage_id = 0;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::map<std::string, double> metrics;
  std::string config_json;     // resolved config, serialized
  std::uint64_t config_hash = 0;  // fnv1a64(config_json), recomputed on load
};

struct Checkpoint {
  CheckpointManifest manifest;
  ModelParams params;
};

std::uint64_t fnv1a64(const std::string& bytes);

// JSON on disk; parameter values printed with 17 significant digits so the
// round trip is bit-exact
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointManifest& manifest);
Checkpoint load_checkpoint(const std::string& path);

struct HistoryRow {
  int stage = 0;
  int epoch = 0;
  std::string loss_name;
  double value = 0.0;
};

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows);

}  // namespace cssl
