#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cssl/trace.hpp"

namespace cssl {

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t embed_dim = 0;
  bool normalize_output = true;
};

void validate_config(const EncoderConfig& config);

// All trainable tensors live in one flat name->tensor map so the optimizer,
// the checkpoint writer and the trace builders share a single addressing
// scheme. Names: enc.w0/enc.b0 per encoder layer, pred.w0/pred.b0/pred.w1/
// pred.b1 for the prediction head, cls.<head>.w / cls.<head>.b per
// classifier head. Weight matrices are stored [out_dim, in_dim].
struct ModelParams {
  EncoderConfig encoder;
  std::map<std::string, std::vector<int>> heads;  // head id -> ordered class ids
  std::map<std::string, Tensor> tensors;
};

// He-uniform weights (bound sqrt(6/fan_in)), zero biases, one draw stream in
// tensor-name order. Also creates the prediction head (embed -> embed ->
// embed, relu between).
ModelParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Linear head over the given classes, zero-initialized (a linear head has no
// symmetry to break, and zero init keeps runs reproducible without another
// seed). Logit order follows class_ids order.
void add_classifier_head(ModelParams& params, const std::string& head_id,
                         const std::vector<int>& class_ids);

using NodeMap = std::map<std::string, NodeId>;
using TrainablePredicate = std::function<bool(const std::string&)>;

inline bool all_trainable(const std::string&) { return true; }
inline bool none_trainable(const std::string&) { return false; }
TrainablePredicate prefix_trainable(std::vector<std::string> prefixes);

// Registers every tensor in params as either a trainable param node or a
// frozen constant node, decided per name. Returns name -> node.
NodeMap register_params(Trace& trace, const ModelParams& params,
                        const TrainablePredicate& trainable);

// Bindings for exactly the tensors the predicate marks trainable.
Bindings trainable_bindings(const ModelParams& params,
                            const TrainablePredicate& trainable);

NodeId apply_encoder(Trace& trace, const NodeMap& nodes, const EncoderConfig& config,
                     NodeId x);
NodeId apply_predict_head(Trace& trace, const NodeMap& nodes, NodeId z);
NodeId apply_classifier(Trace& trace, const NodeMap& nodes, const ModelParams& params,
                        const std::string& head_id, NodeId z);

// Value-level forward passes. These build a one-off constant trace and
// evaluate it, so they are bit-identical to the training-time node path.
std::vector<double> embed(const ModelParams& params, const std::vector<double>& x);
std::vector<double> predict(const ModelParams& params, const std::vector<double>& z);
std::vector<double> classify(const ModelParams& params, const std::string& head_id,
                             const std::vector<double>& z);

const std::vector<int>& head_classes(const ModelParams& params,
                                     const std::string& head_id);

}  // namespace cssl
