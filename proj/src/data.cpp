#include "cssl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cssl/rng.hpp"

namespace cssl {

void validate_config(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("gen_clusters: num_classes must be >= 2");
  if (spec.dim < 1) throw ConfigError("gen_clusters: dim must be positive");
  if (spec.per_class_count < 1) {
    throw ConfigError("gen_clusters: per_class_count must be positive");
  }
  if (!(spec.cluster_std >= 0.0)) {
    throw ConfigError("gen_clusters: cluster_std must be >= 0");
  }
  if (!(spec.centroid_scale > 0.0)) {
    throw ConfigError("gen_clusters: centroid_scale must be positive");
  }
}

std::vector<Sample> gen_clusters(const SyntheticSpec& spec) {
  validate_config(spec);
  Rng rng(spec.seed);

  std::vector<std::vector<double>> centroids(spec.num_classes);
  for (auto& c : centroids) {
    c.resize(spec.dim);
    for (double& v : c) v = rng.uniform(-spec.centroid_scale, spec.centroid_scale);
  }

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(spec.num_classes) * spec.per_class_count);
  int id = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int i = 0; i < spec.per_class_count; ++i) {
      Sample s;
      s.id = id++;
      s.label = c;
      s.x.resize(spec.dim);
      for (int d = 0; d < spec.dim; ++d) {
        s.x[d] = centroids[c][d] + spec.cluster_std * rng.gaussian();
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

void validate_config(const AugmentSpec& spec) {
  if (!(spec.jitter_std >= 0.0)) throw ConfigError("augment: jitter_std must be >= 0");
  if (!(spec.mask_prob >= 0.0 && spec.mask_prob <= 1.0)) {
    throw ConfigError("augment: mask_prob must be in [0,1]");
  }
  if (!(spec.scale_lo > 0.0 && spec.scale_lo <= spec.scale_hi)) {
    throw ConfigError("augment: scale range must satisfy 0 < lo <= hi");
  }
}

std::vector<double> augment(const std::vector<double>& x, const AugmentSpec& spec,
                            std::uint64_t stream_seed) {
  validate_config(spec);
  Rng rng(stream_seed);
  std::vector<double> out(x.size());

  double s = rng.uniform(spec.scale_lo, spec.scale_hi);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += spec.jitter_std * rng.gaussian();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.uniform() < spec.mask_prob) out[i] = 0.0;
  }
  return out;
}

bool DatasetSplit::has_eval_label(int sample_id) const {
  return hidden_.count(sample_id) != 0;
}

int DatasetSplit::eval_label(int sample_id) const {
  auto it = hidden_.find(sample_id);
  if (it == hidden_.end()) {
    throw NotFoundError("eval_label: no hidden label for sample " +
                        std::to_string(sample_id));
  }
  return it->second;
}

std::set<int> DatasetSplit::labeled_classes() const {
  std::set<int> out;
  for (const Sample& s : labeled) {
    if (s.label) out.insert(*s.label);
  }
  return out;
}

std::set<int> DatasetSplit::hidden_classes() const {
  std::set<int> out;
  for (const auto& [id, label] : hidden_) {
    (void)id;
    out.insert(label);
  }
  return out;
}

DatasetSplit split(const std::vector<Sample>& samples, double labeled_fraction,
                   bool ncd_mode, const std::set<int>& known_classes) {
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0)) {
    throw ValueError("split: labeled_fraction must be in [0,1]");
  }

  DatasetSplit out;
  auto strip = [&out](const Sample& s) {
    Sample u = s;
    if (u.label) {
      out.hidden_.emplace(u.id, *u.label);
      u.label.reset();
    }
    out.unlabeled.push_back(std::move(u));
  };

  if (ncd_mode) {
    std::set<int> all_classes;
    for (const Sample& s : samples) {
      if (s.label) all_classes.insert(*s.label);
    }
    for (int c : known_classes) {
      if (all_classes.count(c) == 0) {
        throw ValueError("split: known class " + std::to_string(c) +
                         " not present in the data");
      }
    }
    if (known_classes.size() >= all_classes.size()) {
      throw ValueError("split: ncd mode needs at least one non-known class");
    }
    for (const Sample& s : samples) {
      if (s.label && known_classes.count(*s.label)) {
        out.labeled.push_back(s);
      } else {
        strip(s);
      }
    }
    return out;
  }

  // plain mode: per-class prefix keeps labels, in input order
  std::map<int, std::size_t> class_total, class_kept;
  for (const Sample& s : samples) {
    if (s.label) class_total[*s.label] += 1;
  }
  for (const Sample& s : samples) {
    if (!s.label) {
      out.unlabeled.push_back(s);
      continue;
    }
    std::size_t keep = static_cast<std::size_t>(
        std::floor(labeled_fraction * static_cast<double>(class_total[*s.label])));
    if (class_kept[*s.label] < keep) {
      class_kept[*s.label] += 1;
      out.labeled.push_back(s);
    } else {
      strip(s);
    }
  }
  return out;
}

void validate_config(const CilProtocol& protocol) {
  if (protocol.base_classes.empty()) {
    throw ConfigError("make_sessions: base class set must not be empty");
  }
  if (protocol.test_per_class < 1) {
    throw ConfigError("make_sessions: test_per_class must be positive");
  }
  std::set<int> seen(protocol.base_classes.begin(), protocol.base_classes.end());
  if (seen.size() != protocol.base_classes.size()) {
    throw ConfigError("make_sessions: duplicate base class");
  }
  for (const SessionSpec& session : protocol.sessions) {
    if (session.classes.empty()) {
      throw ConfigError("make_sessions: a session has no classes");
    }
    if (session.shots < 1) throw ConfigError("make_sessions: shots must be positive");
    for (int c : session.classes) {
      if (!seen.insert(c).second) {
        throw ConfigError("make_sessions: class " + std::to_string(c) +
                          " appears in more than one task");
      }
    }
  }
}

CilData make_sessions(const std::vector<Sample>& samples, const CilProtocol& protocol,
                      std::uint64_t seed) {
  validate_config(protocol);

  std::map<int, std::vector<Sample>> by_class;
  for (const Sample& s : samples) {
    if (!s.label) {
      throw ValueError("make_sessions: sample " + std::to_string(s.id) +
                       " has no label");
    }
    by_class[*s.label].push_back(s);
  }

  // shuffle each class once with its own stream; the head of the shuffle is
  // the test set, training samples come after it
  auto allocate = [&](int cls, std::size_t train_count, bool take_all) {
    auto it = by_class.find(cls);
    if (it == by_class.end()) {
      throw NotFoundError("make_sessions: class " + std::to_string(cls) +
                          " not present in the data");
    }
    std::vector<Sample> pool = it->second;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(pool);

    std::size_t test_count = static_cast<std::size_t>(protocol.test_per_class);
    std::size_t need = test_count + (take_all ? 1 : train_count);
    if (pool.size() < need) {
      throw ValueError("make_sessions: class " + std::to_string(cls) + " has " +
                       std::to_string(pool.size()) + " samples, needs " +
                       std::to_string(need));
    }
    std::vector<Sample> test(pool.begin(), pool.begin() + test_count);
    std::vector<Sample> train;
    if (take_all) {
      train.assign(pool.begin() + test_count, pool.end());
    } else {
      train.assign(pool.begin() + test_count, pool.begin() + test_count + train_count);
    }
    return std::pair<std::vector<Sample>, std::vector<Sample>>(std::move(train),
                                                               std::move(test));
  };

  CilData out;
  for (int cls : protocol.base_classes) {
    auto [train, test] = allocate(cls, 0, true);
    out.base_train.insert(out.base_train.end(), train.begin(), train.end());
    out.test_sets[cls] = std::move(test);
  }
  for (const SessionSpec& spec : protocol.sessions) {
    SessionData session;
    session.classes = spec.classes;
    for (int cls : spec.classes) {
      auto [train, test] = allocate(cls, static_cast<std::size_t>(spec.shots), false);
      session.shots.insert(session.shots.end(), train.begin(), train.end());
      out.test_sets[cls] = std::move(test);
    }
    out.sessions.push_back(std::move(session));
  }
  return out;
}

namespace {

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off,
                   const std::string& path) {
  if (off + 4 > b.size()) {
    throw IdxError(IdxError::Kind::kTruncated,
                   "idx file truncated in header: " + path);
  }
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

}  // namespace

std::vector<Sample> load_idx(const std::string& images_path,
                             const std::string& labels_path) {
  std::vector<unsigned char> img = read_bytes(images_path);
  std::vector<unsigned char> lab = read_bytes(labels_path);

  if (be32(img, 0, images_path) != 0x00000803u) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   "bad image magic in " + images_path);
  }
  std::uint32_t count = be32(img, 4, images_path);
  std::uint32_t rows = be32(img, 8, images_path);
  std::uint32_t cols = be32(img, 12, images_path);
  std::size_t pixels = static_cast<std::size_t>(count) * rows * cols;
  if (img.size() != 16 + pixels) {
    throw IdxError(IdxError::Kind::kTruncated,
                   "image payload size mismatch in " + images_path + ": expected " +
                       std::to_string(16 + pixels) + " bytes, got " +
                       std::to_string(img.size()));
  }

  if (be32(lab, 0, labels_path) != 0x00000801u) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   "bad label magic in " + labels_path);
  }
  std::uint32_t label_count = be32(lab, 4, labels_path);
  if (lab.size() != 8 + static_cast<std::size_t>(label_count)) {
    throw IdxError(IdxError::Kind::kTruncated,
                   "label payload size mismatch in " + labels_path);
  }
  if (count != label_count) {
    throw IdxError(IdxError::Kind::kCountMismatch,
                   "image count " + std::to_string(count) + " != label count " +
                       std::to_string(label_count));
  }

  std::vector<Sample> out;
  out.reserve(count);
  std::size_t dim = static_cast<std::size_t>(rows) * cols;
  for (std::uint32_t i = 0; i < count; ++i) {
    Sample s;
    s.id = static_cast<int>(i);
    s.label = static_cast<int>(lab[8 + i]);
    s.x.resize(dim);
    for (std::size_t p = 0; p < dim; ++p) {
      s.x[p] = static_cast<double>(img[16 + static_cast<std::size_t>(i) * dim + p]) /
               255.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  nlohmann::json j;
  j["spec"] = {{"num_classes", dataset.spec.num_classes},
               {"dim", dataset.spec.dim},
               {"per_class_count", dataset.spec.per_class_count},
               {"cluster_std", dataset.spec.cluster_std},
               {"centroid_scale", dataset.spec.centroid_scale},
               {"seed", dataset.spec.seed}};
  nlohmann::json samples = nlohmann::json::array();
  for (const Sample& s : dataset.samples) {
    nlohmann::json e;
    e["id"] = s.id;
    e["x"] = s.x;
    e["label"] = s.label ? nlohmann::json(*s.label) : nlohmann::json(nullptr);
    samples.push_back(std::move(e));
  }
  j["samples"] = std::move(samples);

  std::ofstream f(path);
  if (!f) throw NotFoundError("cannot open file for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f.good()) throw FormatError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NotFoundError("cannot open file: " + path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset json parse error in " + path + ": " + e.what());
  }

  try {
    Dataset out;
    const auto& spec = j.at("spec");
    out.spec.num_classes = spec.at("num_classes").get<int>();
    out.spec.dim = spec.at("dim").get<int>();
    out.spec.per_class_count = spec.at("per_class_count").get<int>();
    out.spec.cluster_std = spec.at("cluster_std").get<double>();
    out.spec.centroid_scale = spec.at("centroid_scale").get<double>();
    out.spec.seed = spec.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("samples")) {
      Sample s;
      s.id = e.at("id").get<int>();
      s.x = e.at("x").get<std::vector<double>>();
      if (!e.at("label").is_null()) s.label = e.at("label").get<int>();
      for (double v : s.x) {
        if (!std::isfinite(v)) {
          throw FormatError("dataset sample " + std::to_string(s.id) +
                            " has a non-finite feature");
        }
      }
      out.samples.push_back(std::move(s));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset schema error in " + path + ": " + e.what());
  }
}

}  // namespace cssl
