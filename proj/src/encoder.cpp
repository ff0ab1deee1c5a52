#include "cssl/encoder.hpp"

#include <cmath>

#include "cssl/error.hpp"
#include "cssl/rng.hpp"

namespace cssl {

void validate_config(const EncoderConfig& config) {
  if (config.input_dim == 0) throw ConfigError("encoder: input_dim must be positive");
  if (config.embed_dim == 0) throw ConfigError("encoder: embed_dim must be positive");
  for (std::size_t h : config.hidden_dims) {
    if (h == 0) throw ConfigError("encoder: hidden dims must be positive");
  }
}

namespace {

Tensor he_uniform(Rng& rng, std::size_t out_dim, std::size_t in_dim) {
  double bound = std::sqrt(6.0 / static_cast<double>(in_dim));
  Tensor w = zeros({out_dim, in_dim});
  for (double& v : w.values) v = rng.uniform(-bound, bound);
  return w;
}

// input_dim, hidden..., embed_dim
std::vector<std::size_t> layer_dims(const EncoderConfig& c) {
  std::vector<std::size_t> dims{c.input_dim};
  dims.insert(dims.end(), c.hidden_dims.begin(), c.hidden_dims.end());
  dims.push_back(c.embed_dim);
  return dims;
}

}  // namespace

ModelParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  validate_config(config);
  ModelParams params;
  params.encoder = config;
  Rng rng(seed);

  std::vector<std::size_t> dims = layer_dims(config);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    std::string idx = std::to_string(i);
    params.tensors["enc.w" + idx] = he_uniform(rng, dims[i + 1], dims[i]);
    params.tensors["enc.b" + idx] = zeros({dims[i + 1]});
  }

  std::size_t d = config.embed_dim;
  params.tensors["pred.w0"] = he_uniform(rng, d, d);
  params.tensors["pred.b0"] = zeros({d});
  params.tensors["pred.w1"] = he_uniform(rng, d, d);
  params.tensors["pred.b1"] = zeros({d});
  return params;
}

void add_classifier_head(ModelParams& params, const std::string& head_id,
                         const std::vector<int>& class_ids) {
  if (class_ids.empty()) throw ValueError("classifier head '" + head_id + "' needs classes");
  if (params.heads.count(head_id)) {
    throw ValueError("classifier head '" + head_id + "' already exists");
  }
  params.heads[head_id] = class_ids;
  params.tensors["cls." + head_id + ".w"] =
      zeros({class_ids.size(), params.encoder.embed_dim});
  params.tensors["cls." + head_id + ".b"] = zeros({class_ids.size()});
}

TrainablePredicate prefix_trainable(std::vector<std::string> prefixes) {
  return [prefixes = std::move(prefixes)](const std::string& name) {
    for (const std::string& p : prefixes) {
      if (name.rfind(p, 0) == 0) return true;
    }
    return false;
  };
}

NodeMap register_params(Trace& trace, const ModelParams& params,
                        const TrainablePredicate& trainable) {
  NodeMap nodes;
  for (const auto& [name, tensor] : params.tensors) {
    nodes[name] = trainable(name) ? trace.param(name, tensor.shape)
                                  : trace.constant(tensor);
  }
  return nodes;
}

Bindings trainable_bindings(const ModelParams& params,
                            const TrainablePredicate& trainable) {
  Bindings b;
  for (const auto& [name, tensor] : params.tensors) {
    if (trainable(name)) b[name] = tensor;
  }
  return b;
}

NodeId apply_encoder(Trace& trace, const NodeMap& nodes, const EncoderConfig& config,
                     NodeId x) {
  std::size_t layers = config.hidden_dims.size() + 1;
  NodeId h = x;
  for (std::size_t i = 0; i < layers; ++i) {
    std::string idx = std::to_string(i);
    NodeId pre = trace.add(trace.matmul(nodes.at("enc.w" + idx), h),
                           nodes.at("enc.b" + idx));
    h = (i + 1 < layers) ? trace.relu(pre) : pre;
  }
  return config.normalize_output ? trace.l2_normalize(h) : h;
}

NodeId apply_predict_head(Trace& trace, const NodeMap& nodes, NodeId z) {
  NodeId h = trace.relu(
      trace.add(trace.matmul(nodes.at("pred.w0"), z), nodes.at("pred.b0")));
  NodeId p = trace.add(trace.matmul(nodes.at("pred.w1"), h), nodes.at("pred.b1"));
  return trace.l2_normalize(p);
}

NodeId apply_classifier(Trace& trace, const NodeMap& nodes, const ModelParams& params,
                        const std::string& head_id, NodeId z) {
  if (!params.heads.count(head_id)) {
    throw NotFoundError("classifier head '" + head_id + "' does not exist");
  }
  return trace.add(trace.matmul(nodes.at("cls." + head_id + ".w"), z),
                   nodes.at("cls." + head_id + ".b"));
}

namespace {

NodeMap constant_nodes(Trace& trace, const ModelParams& params) {
  NodeMap nodes;
  for (const auto& [name, tensor] : params.tensors) {
    nodes[name] = trace.constant(tensor);
  }
  return nodes;
}

}  // namespace

std::vector<double> embed(const ModelParams& params, const std::vector<double>& x) {
  if (x.size() != params.encoder.input_dim) {
    throw ShapeError("embed: input length " + std::to_string(x.size()) +
                     ", encoder expects " + std::to_string(params.encoder.input_dim));
  }
  Trace trace;
  NodeMap nodes = constant_nodes(trace, params);
  NodeId z = apply_encoder(trace, nodes, params.encoder, trace.constant(vec_tensor(x)));
  return evaluate(trace).at(z).values;
}

std::vector<double> predict(const ModelParams& params, const std::vector<double>& z) {
  if (z.size() != params.encoder.embed_dim) {
    throw ShapeError("predict: input length " + std::to_string(z.size()) +
                     ", head expects " + std::to_string(params.encoder.embed_dim));
  }
  Trace trace;
  NodeMap nodes = constant_nodes(trace, params);
  NodeId p = apply_predict_head(trace, nodes, trace.constant(vec_tensor(z)));
  return evaluate(trace).at(p).values;
}

std::vector<double> classify(const ModelParams& params, const std::string& head_id,
                             const std::vector<double>& z) {
  if (z.size() != params.encoder.embed_dim) {
    throw ShapeError("classify: input length " + std::to_string(z.size()) +
                     ", head expects " + std::to_string(params.encoder.embed_dim));
  }
  Trace trace;
  NodeMap nodes = constant_nodes(trace, params);
  NodeId logits =
      apply_classifier(trace, nodes, params, head_id, trace.constant(vec_tensor(z)));
  return evaluate(trace).at(logits).values;
}

const std::vector<int>& head_classes(const ModelParams& params,
                                     const std::string& head_id) {
  auto it = params.heads.find(head_id);
  if (it == params.heads.end()) {
    throw NotFoundError("classifier head '" + head_id + "' does not exist");
  }
  return it->second;
}

}  // namespace cssl
