#include "cssl/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "cssl/rng.hpp"

namespace cssl {

void validate_config(const TrainConfig& config) {
  validate_config(config.encoder);
  validate_config(config.loss);
  validate_config(config.augment);
  if (config.epochs < 1) throw ConfigError("train: epochs must be positive");
  if (config.batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (!(config.lr > 0.0) || !std::isfinite(config.lr)) {
    throw ConfigError("train: lr must be positive and finite");
  }
  if (config.support_capacity < 1) {
    throw ConfigError("train: support_capacity must be positive");
  }
  if (config.novel_classes < 1) {
    throw ConfigError("train: novel_classes must be positive");
  }
}

OptimizerState make_optimizer(const TrainConfig& config) {
  switch (config.method) {
    case OptMethod::kSgd:
      return make_sgd(config.lr);
    case OptMethod::kSgdMomentum:
      return make_sgd_momentum(config.lr, config.momentum);
    case OptMethod::kAdam:
      return make_adam(config.lr);
  }
  throw ConfigError("train: unknown optimizer method");
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size,
                                                   std::uint64_t shuffle_seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(shuffle_seed);
  rng.shuffle(idx);

  std::vector<std::vector<std::size_t>> batches;
  std::size_t step = static_cast<std::size_t>(batch_size);
  for (std::size_t at = 0; at < n; at += step) {
    std::size_t end = std::min(at + step, n);
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(at),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // a trailing singleton joins the previous batch so contrastive terms always
  // see at least one in-batch partner
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

struct EngineSpec {
  bool use_ce = false;
  bool use_ssl = false;
  double lambda = 1.0;
  std::string head;
  TrainablePredicate trainable = all_trainable;
};

// one shared loop: cross-entropy branch, self-supervised branch, or both.
// The trace is rebuilt per batch; the optimizer state persists over the run.
TrainResult run_engine(ModelParams params, const std::vector<Sample>& samples,
                       const TrainConfig& cfg, const EngineSpec& spec) {
  if (samples.empty()) throw ValueError("train: empty sample pool");

  OptimizerState opt = make_optimizer(cfg);
  SupportSet support(cfg.support_capacity);

  std::map<int, std::size_t> class_index;
  if (spec.use_ce) {
    const std::vector<int>& classes = head_classes(params, spec.head);
    for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = i;
  }

  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches = make_batches(samples.size(), cfg.batch_size,
                                mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    double epoch_total = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      try {
        Trace trace;
        NodeMap nodes = register_params(trace, params, spec.trainable);

        NodeId sup_node = 0;
        if (spec.use_ce) {
          std::vector<NodeId> terms;
          for (std::size_t i : batch) {
            const Sample& s = samples[i];
            if (!s.label) continue;
            NodeId z = apply_encoder(trace, nodes, params.encoder,
                                     trace.constant(vec_tensor(s.x)));
            NodeId logits = apply_classifier(trace, nodes, params, spec.head, z);
            NodeId p = trace.pick(trace.softmax(logits), class_index.at(*s.label));
            terms.push_back(trace.scale(trace.log(p), -1.0));
          }
          sup_node = terms.empty() ? trace.constant(scalar_tensor(0.0))
                                   : trace.mean(trace.concat(terms));
        }

        NodeId ssl_node = 0;
        std::vector<std::vector<double>> z1_vals;
        std::vector<std::optional<int>> batch_labels;
        if (spec.use_ssl) {
          if (batch.size() < 2) {
            throw ValueError("train: contrastive batch of size 1 (epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(bi) +
                             ")");
          }
          std::vector<std::vector<double>> v2;
          for (std::size_t i : batch) {
            const Sample& s = samples[i];
            std::uint64_t sid = static_cast<std::uint64_t>(s.id);
            std::uint64_t e = static_cast<std::uint64_t>(epoch);
            std::vector<double> v1 = augment(s.x, cfg.augment,
                                             mix_seed(cfg.seed, sid, e, 1));
            v2.push_back(augment(s.x, cfg.augment, mix_seed(cfg.seed, sid, e, 2)));
            z1_vals.push_back(embed(params, v1));
            batch_labels.push_back(s.label);
          }
          if (support.size() == 0) {
            for (std::size_t k = 0; k < z1_vals.size(); ++k) {
              support.push(z1_vals[k], batch_labels[k]);
            }
          }
          NeighborSelection sel = select_neighbors(support, z1_vals, batch_labels,
                                                   cfg.loss.use_label_aware);
          std::vector<NodeId> pred_pos;
          for (const auto& view : v2) {
            NodeId z2 = apply_encoder(trace, nodes, params.encoder,
                                      trace.constant(vec_tensor(view)));
            pred_pos.push_back(apply_predict_head(trace, nodes, z2));
          }
          ssl_node = build_nnclr(trace, sel.neighbors, pred_pos, cfg.loss.tau);
        }

        NodeId loss_node;
        if (spec.use_ce && spec.use_ssl) {
          loss_node = build_fewshot_total(trace, sup_node, ssl_node, spec.lambda);
        } else if (spec.use_ssl) {
          loss_node = trace.scale(ssl_node, spec.lambda);
        } else {
          loss_node = sup_node;
        }

        Bindings bind = trainable_bindings(params, spec.trainable);
        Values vals = evaluate(trace, bind);
        double batch_loss = vals.scalar_at(loss_node);
        if (!std::isfinite(batch_loss)) throw NumericError("non-finite loss");
        epoch_total += batch_loss;
        GradientMap grads = gradient(trace, loss_node, bind);
        optimizer_step(opt, bind, grads);
        for (const auto& [name, t] : bind) params.tensors[name] = t;

        if (spec.use_ssl) {
          for (std::size_t k = 0; k < z1_vals.size(); ++k) {
            support.push(z1_vals[k], batch_labels[k]);
          }
        }
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi) + ": " + e.what());
      }
    }
    history.push_back(epoch_total / static_cast<double>(batches.size()));
  }
  return TrainResult{std::move(params), std::move(history)};
}

void require_contrastive_config(const TrainConfig& cfg, const char* who) {
  if (cfg.batch_size < 2) {
    throw ConfigError(std::string(who) + ": batch_size must be >= 2");
  }
  if (!cfg.encoder.normalize_output) {
    throw ConfigError(std::string(who) +
                      ": contrastive training needs normalized embeddings");
  }
}

std::vector<int> sorted_label_set(const std::vector<Sample>& samples) {
  std::set<int> classes;
  for (const Sample& s : samples) {
    if (s.label) classes.insert(*s.label);
  }
  return std::vector<int>(classes.begin(), classes.end());
}

}  // namespace

TrainResult pretrain_cssl(const std::vector<Sample>& samples,
                          const TrainConfig& config) {
  validate_config(config);
  require_contrastive_config(config, "pretrain_cssl");

  EngineSpec spec;
  spec.use_ssl = true;
  spec.lambda = 1.0;
  return run_engine(init_params(config.encoder, config.seed), samples, config, spec);
}

TrainResult finetune_supervised(ModelParams params, const std::vector<Sample>& samples,
                                const TrainConfig& config, FinetuneMode mode) {
  validate_config(config);
  if (samples.empty()) throw ValueError("finetune_supervised: empty labeled set");
  for (const Sample& s : samples) {
    if (!s.label) {
      throw ValueError("finetune_supervised: sample " + std::to_string(s.id) +
                       " has no label");
    }
  }

  if (params.heads.count("main") == 0) {
    add_classifier_head(params, "main", sorted_label_set(samples));
  } else {
    const std::vector<int>& classes = head_classes(params, "main");
    for (const Sample& s : samples) {
      if (std::find(classes.begin(), classes.end(), *s.label) == classes.end()) {
        throw ValueError("finetune_supervised: label " + std::to_string(*s.label) +
                         " not covered by the classifier head");
      }
    }
  }

  EngineSpec spec;
  spec.use_ce = true;
  spec.head = "main";
  if (mode == FinetuneMode::kLinearProbe) {
    spec.trainable = prefix_trainable({"cls.main."});
  }
  return run_engine(std::move(params), samples, config, spec);
}

TrainResult fewshot_base(const std::vector<Sample>& samples,
                         const TrainConfig& config) {
  validate_config(config);
  double lambda = config.loss.lambda_self;
  bool use_ce = config.supervised;
  bool use_ssl = lambda != 0.0;
  if (!use_ce && !use_ssl) {
    throw ConfigError("fewshot_base: both loss terms disabled");
  }
  if (use_ssl) require_contrastive_config(config, "fewshot_base");

  ModelParams params = init_params(config.encoder, config.seed);
  if (use_ce) {
    std::vector<int> classes = sorted_label_set(samples);
    if (classes.empty()) {
      throw ValueError("fewshot_base: supervised term enabled but no labeled samples");
    }
    add_classifier_head(params, "main", classes);
  }

  EngineSpec spec;
  spec.use_ce = use_ce;
  spec.use_ssl = use_ssl;
  spec.lambda = lambda;
  spec.head = "main";
  return run_engine(std::move(params), samples, config, spec);
}

namespace {

// stage loops share this error wrapper so a non-finite loss names its batch
template <class Fn>
void guarded(int stage, int epoch, std::size_t batch, Fn&& fn) {
  try {
    fn();
  } catch (const NumericError& e) {
    throw NumericError("stage " + std::to_string(stage) + ", epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch) +
                       ": " + e.what());
  }
}

}  // namespace

NclResult ncl_pipeline(const DatasetSplit& split, const TrainConfig& config) {
  validate_config(config);
  if (split.labeled.empty()) throw ValueError("ncl_pipeline: empty labeled pool");
  if (split.unlabeled.empty()) throw ValueError("ncl_pipeline: empty unlabeled pool");
  require_contrastive_config(config, "ncl_pipeline");
  if (config.novel_classes < 2) {
    throw ConfigError("ncl_pipeline: novel_classes must be >= 2");
  }
  if (split.unlabeled.size() < 2) {
    throw ValueError("ncl_pipeline: unlabeled pool needs at least 2 samples");
  }

  ModelParams params = init_params(config.encoder, config.seed);
  std::vector<int> labeled_ids = sorted_label_set(split.labeled);
  add_classifier_head(params, "labeled", labeled_ids);
  std::vector<int> novel_ids(static_cast<std::size_t>(config.novel_classes));
  std::iota(novel_ids.begin(), novel_ids.end(), 0);
  add_classifier_head(params, "unlabeled", novel_ids);
  // a zero weight matrix is a stationary point of the stage-3 objective
  // (uniform softmax kills both the pairwise and the consistency gradients),
  // so the novel head needs a symmetry-breaking random init
  {
    Tensor& w = params.tensors.at("cls.unlabeled.w");
    double bound = std::sqrt(6.0 / static_cast<double>(config.encoder.embed_dim));
    Rng hrng(mix_seed(config.seed, 0xC1));
    for (double& v : w.values) v = hrng.uniform(-bound, bound);
  }

  std::map<int, std::size_t> lidx;
  for (std::size_t i = 0; i < labeled_ids.size(); ++i) lidx[labeled_ids[i]] = i;

  std::uint64_t s1 = mix_seed(config.seed, 0xA1);
  std::uint64_t s2 = mix_seed(config.seed, 0xA2);
  std::uint64_t s3 = mix_seed(config.seed, 0xA3);
  NclResult out;

  // stage 1: cross-entropy on the raw sample plus prediction consistency
  // between the raw sample and its augmented view, labeled pool only
  {
    OptimizerState opt = make_optimizer(config);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      auto batches = make_batches(split.labeled.size(), config.batch_size,
                                  mix_seed(s1, static_cast<std::uint64_t>(epoch)));
      double total = 0.0;
      for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        guarded(1, epoch, bi, [&] {
          Trace trace;
          NodeMap nodes = register_params(trace, params, all_trainable);
          std::vector<NodeId> terms;
          for (std::size_t i : batches[bi]) {
            const Sample& s = split.labeled[i];
            NodeId z = apply_encoder(trace, nodes, params.encoder,
                                     trace.constant(vec_tensor(s.x)));
            NodeId logits = apply_classifier(trace, nodes, params, "labeled", z);
            NodeId probs = trace.softmax(logits);
            NodeId ce = trace.scale(
                trace.log(trace.pick(probs, lidx.at(*s.label))), -1.0);
            std::vector<double> view =
                augment(s.x, config.augment,
                        mix_seed(s1, static_cast<std::uint64_t>(s.id),
                                 static_cast<std::uint64_t>(epoch), 1));
            NodeId zv = apply_encoder(trace, nodes, params.encoder,
                                      trace.constant(vec_tensor(view)));
            NodeId probs_v =
                trace.softmax(apply_classifier(trace, nodes, params, "labeled", zv));
            NodeId cs = build_consistency(trace, probs, probs_v);
            terms.push_back(trace.add(ce, cs));
          }
          NodeId loss = trace.mean(trace.concat(terms));
          Bindings bind = trainable_bindings(params, all_trainable);
          double batch_loss = evaluate(trace, bind).scalar_at(loss);
          if (!std::isfinite(batch_loss)) throw NumericError("non-finite loss");
          total += batch_loss;
          GradientMap grads = gradient(trace, loss, bind);
          optimizer_step(opt, bind, grads);
          for (const auto& [name, t] : bind) params.tensors[name] = t;
        });
      }
      out.stage1.push_back(total / static_cast<double>(batches.size()));
    }
  }

  // stage 2: neighborhood contrastive loss on the unlabeled pool with the
  // labeled batch embeddings as hard negatives, plus supervised contrastive
  // loss on the labeled pairing; support set holds unlabeled embeddings only
  {
    OptimizerState opt = make_optimizer(config);
    SupportSet support(config.support_capacity);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      auto batches = make_batches(split.unlabeled.size(), config.batch_size,
                                  mix_seed(s2, static_cast<std::uint64_t>(epoch)));
      std::vector<std::size_t> l_order(split.labeled.size());
      std::iota(l_order.begin(), l_order.end(), std::size_t{0});
      Rng lrng(mix_seed(s2, static_cast<std::uint64_t>(epoch), 7));
      lrng.shuffle(l_order);
      std::size_t cursor = 0;

      double total = 0.0;
      for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        guarded(2, epoch, bi, [&] {
          const auto& batch = batches[bi];
          if (batch.size() < 2) {
            throw ValueError("ncl_pipeline: contrastive batch of size 1");
          }
          std::uint64_t e = static_cast<std::uint64_t>(epoch);

          std::vector<std::vector<double>> v1, v2, z1_vals;
          for (std::size_t i : batch) {
            const Sample& s = split.unlabeled[i];
            std::uint64_t sid = static_cast<std::uint64_t>(s.id);
            v1.push_back(augment(s.x, config.augment, mix_seed(s2, sid, e, 1)));
            v2.push_back(augment(s.x, config.augment, mix_seed(s2, sid, e, 2)));
            z1_vals.push_back(embed(params, v1.back()));
          }
          if (support.size() == 0) {
            for (const auto& z : z1_vals) support.push(z, std::nullopt);
          }
          auto neighbors = select_k_neighbors(support, z1_vals, config.loss.k_pseudo);

          std::size_t companion = std::min(static_cast<std::size_t>(config.batch_size),
                                           split.labeled.size());
          std::vector<std::size_t> l_batch;
          for (std::size_t j = 0; j < companion; ++j) {
            l_batch.push_back(l_order[(cursor + j) % l_order.size()]);
          }
          cursor += companion;

          Trace trace;
          NodeMap nodes = register_params(trace, params, all_trainable);
          std::vector<NodeId> u_z1, u_z2;
          for (std::size_t k = 0; k < batch.size(); ++k) {
            u_z1.push_back(apply_encoder(trace, nodes, params.encoder,
                                         trace.constant(vec_tensor(v1[k]))));
            u_z2.push_back(apply_encoder(trace, nodes, params.encoder,
                                         trace.constant(vec_tensor(v2[k]))));
          }
          std::vector<NodeId> l_z1, l_z2;
          std::vector<int> l_labels;
          for (std::size_t j : l_batch) {
            const Sample& s = split.labeled[j];
            std::uint64_t sid = static_cast<std::uint64_t>(s.id);
            l_z1.push_back(apply_encoder(
                trace, nodes, params.encoder,
                trace.constant(vec_tensor(
                    augment(s.x, config.augment, mix_seed(s2, sid, e, 1))))));
            l_z2.push_back(apply_encoder(
                trace, nodes, params.encoder,
                trace.constant(vec_tensor(
                    augment(s.x, config.augment, mix_seed(s2, sid, e, 2))))));
            l_labels.push_back(*s.label);
          }

          NodeId ncl =
              build_ncl(trace, u_z1, u_z2, neighbors, l_z1, config.loss.tau);
          NodeId scl =
              build_scl(trace, l_z1, l_labels, l_z2, l_labels, config.loss.tau);
          NodeId loss = trace.add(ncl, scl);

          Bindings bind = trainable_bindings(params, all_trainable);
          double batch_loss = evaluate(trace, bind).scalar_at(loss);
          if (!std::isfinite(batch_loss)) throw NumericError("non-finite loss");
          total += batch_loss;
          GradientMap grads = gradient(trace, loss, bind);
          optimizer_step(opt, bind, grads);
          for (const auto& [name, t] : bind) params.tensors[name] = t;

          for (const auto& z : z1_vals) support.push(z, std::nullopt);
        });
      }
      out.stage2.push_back(total / static_cast<double>(batches.size()));
    }
  }

  // stage 3: pairwise pseudo-label BCE through the unlabeled head plus
  // raw-versus-view prediction consistency; the labeled head is untouched
  {
    OptimizerState opt = make_optimizer(config);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      auto batches = make_batches(split.unlabeled.size(), config.batch_size,
                                  mix_seed(s3, static_cast<std::uint64_t>(epoch)));
      double total = 0.0;
      for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        guarded(3, epoch, bi, [&] {
          const auto& batch = batches[bi];
          if (batch.size() < 2) {
            throw ValueError("ncl_pipeline: pairwise batch of size 1");
          }
          std::vector<std::vector<double>> feats;
          for (std::size_t i : batch) {
            feats.push_back(embed(params, split.unlabeled[i].x));
          }
          auto pseudo = cosine_pseudo_labels(feats, config.loss.rho);

          Trace trace;
          NodeMap nodes = register_params(trace, params, all_trainable);
          std::vector<NodeId> probs, cs_terms;
          std::uint64_t e = static_cast<std::uint64_t>(epoch);
          for (std::size_t k = 0; k < batch.size(); ++k) {
            const Sample& s = split.unlabeled[batch[k]];
            NodeId z = apply_encoder(trace, nodes, params.encoder,
                                     trace.constant(vec_tensor(s.x)));
            NodeId p =
                trace.softmax(apply_classifier(trace, nodes, params, "unlabeled", z));
            probs.push_back(p);
            std::vector<double> view =
                augment(s.x, config.augment,
                        mix_seed(s3, static_cast<std::uint64_t>(s.id), e, 1));
            NodeId zv = apply_encoder(trace, nodes, params.encoder,
                                      trace.constant(vec_tensor(view)));
            NodeId pv =
                trace.softmax(apply_classifier(trace, nodes, params, "unlabeled", zv));
            cs_terms.push_back(build_consistency(trace, p, pv));
          }
          NodeId bce = build_pairwise_bce(trace, pseudo, probs);
          NodeId cs = trace.mean(trace.concat(cs_terms));
          NodeId loss = trace.add(bce, cs);

          Bindings bind = trainable_bindings(params, all_trainable);
          double batch_loss = evaluate(trace, bind).scalar_at(loss);
          if (!std::isfinite(batch_loss)) throw NumericError("non-finite loss");
          total += batch_loss;
          GradientMap grads = gradient(trace, loss, bind);
          optimizer_step(opt, bind, grads);
          for (const auto& [name, t] : bind) params.tensors[name] = t;
        });
      }
      out.stage3.push_back(total / static_cast<double>(batches.size()));
    }
  }

  out.params = std::move(params);
  return out;
}

std::vector<int> ncl_assign(const ModelParams& params,
                            const std::vector<Sample>& samples) {
  const std::vector<int>& classes = head_classes(params, "unlabeled");
  std::vector<int> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    std::vector<double> logits = classify(params, "unlabeled", embed(params, s.x));
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    out.push_back(classes[best]);
  }
  return out;
}

// ---- checkpointing ----

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointManifest& manifest) {
  nlohmann::json m;
  m["stage_id"] = manifest.stage_id;
  m["seed"] = manifest.seed;
  m["epoch"] = manifest.epoch;
  m["metrics"] = manifest.metrics;
  m["config_json"] = manifest.config_json;
  m["config_hash"] = manifest.config_hash;

  nlohmann::json enc;
  enc["input_dim"] = params.encoder.input_dim;
  enc["hidden_dims"] = params.encoder.hidden_dims;
  enc["embed_dim"] = params.encoder.embed_dim;
  enc["normalize_output"] = params.encoder.normalize_output;

  std::string out;
  out += "{\n\"manifest\": " + m.dump() + ",\n";
  out += "\"params\": {\n\"encoder\": " + enc.dump() + ",\n";
  out += "\"heads\": " + nlohmann::json(params.heads).dump() + ",\n";
  out += "\"tensors\": {";
  bool first_tensor = true;
  for (const auto& [name, t] : params.tensors) {
    if (!first_tensor) out += ",";
    first_tensor = false;
    out += "\n" + nlohmann::json(name).dump() + ": {\"shape\": [";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(t.shape[i]);
    }
    out += "], \"values\": [";
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      if (i) out += ",";
      out += fmt17(t.values[i]);
    }
    out += "]}";
  }
  out += "\n}\n}\n}\n";

  std::ofstream f(path);
  if (!f) throw NotFoundError("cannot open file for writing: " + path);
  f << out;
  if (!f.good()) throw FormatError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NotFoundError("cannot open file: " + path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint parse error in " + path + ": " + e.what());
  }

  Checkpoint out;
  try {
    const auto& m = j.at("manifest");
    out.manifest.stage_id = m.at("stage_id").get<int>();
    out.manifest.seed = m.at("seed").get<std::uint64_t>();
    out.manifest.epoch = m.at("epoch").get<int>();
    out.manifest.metrics = m.at("metrics").get<std::map<std::string, double>>();
    out.manifest.config_json = m.at("config_json").get<std::string>();
    out.manifest.config_hash = m.at("config_hash").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest error in " + path + ": " + e.what());
  }

  if (fnv1a64(out.manifest.config_json) != out.manifest.config_hash) {
    throw HashMismatchError("checkpoint config hash mismatch in " + path);
  }

  try {
    const auto& p = j.at("params");
    const auto& enc = p.at("encoder");
    out.params.encoder.input_dim = enc.at("input_dim").get<std::size_t>();
    out.params.encoder.hidden_dims =
        enc.at("hidden_dims").get<std::vector<std::size_t>>();
    out.params.encoder.embed_dim = enc.at("embed_dim").get<std::size_t>();
    out.params.encoder.normalize_output = enc.at("normalize_output").get<bool>();
    out.params.heads =
        p.at("heads").get<std::map<std::string, std::vector<int>>>();
    for (const auto& [name, tj] : p.at("tensors").items()) {
      Shape shape = tj.at("shape").get<Shape>();
      std::vector<double> values = tj.at("values").get<std::vector<double>>();
      out.params.tensors.emplace(name, Tensor(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint params error in " + path + ": " + e.what());
  } catch (const Error& e) {
    throw FormatError("checkpoint tensor error in " + path + ": " + e.what());
  }
  return out;
}

void write_history_csv(const std::string& path,
                       const std::vector<HistoryRow>& rows) {
  std::ofstream f(path);
  if (!f) throw NotFoundError("cannot open file for writing: " + path);
  f << "stage,epoch,loss_name,value\n";
  for (const HistoryRow& r : rows) {
    f << r.stage << "," << r.epoch << "," << r.loss_name << "," << fmt17(r.value)
      << "\n";
  }
  if (!f.good()) throw FormatError("write failed: " + path);
}

}  // namespace cssl
