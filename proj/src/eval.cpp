#include "cssl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cssl/optimizer.hpp"
#include "cssl/tensor.hpp"
#include "cssl/trace.hpp"

namespace cssl {

namespace {

void check_embedding_table(const std::vector<std::vector<double>>& xs,
                           const std::vector<int>& ys, const char* who) {
  if (xs.empty()) throw ValueError(std::string(who) + ": empty embedding list");
  if (xs.size() != ys.size()) {
    throw ValueError(std::string(who) + ": embedding and label counts differ");
  }
  for (const auto& x : xs) {
    if (x.size() != xs.front().size()) {
      throw ShapeError(std::string(who) + ": inconsistent embedding dims");
    }
  }
}

// exact O(n^3) assignment on a square cost matrix; returns col -> row
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost) {
  int n = static_cast<int>(cost.size());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col_to_row(n);
  for (int j = 1; j <= n; ++j) col_to_row[j - 1] = p[j] - 1;
  return col_to_row;
}

}  // namespace

double linear_probe(const std::vector<std::vector<double>>& train_x,
                    const std::vector<int>& train_y,
                    const std::vector<std::vector<double>>& test_x,
                    const std::vector<int>& test_y, const ProbeConfig& config) {
  check_embedding_table(train_x, train_y, "linear_probe");
  check_embedding_table(test_x, test_y, "linear_probe");
  if (config.epochs < 1) throw ConfigError("linear_probe: epochs must be positive");
  if (test_x.front().size() != train_x.front().size()) {
    throw ShapeError("linear_probe: train and test dims differ");
  }

  std::set<int> class_set(train_y.begin(), train_y.end());
  if (class_set.size() < 2) throw ValueError("linear_probe: needs at least 2 classes");
  std::vector<int> classes(class_set.begin(), class_set.end());
  std::map<int, std::size_t> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = i;

  std::size_t dim = train_x.front().size();
  std::size_t n_classes = classes.size();

  // one trace, rebound every epoch: mean CE over the train set
  Trace trace;
  NodeId w = trace.param("probe.w", {n_classes, dim});
  NodeId b = trace.param("probe.b", {n_classes});
  std::vector<NodeId> losses;
  for (std::size_t i = 0; i < train_x.size(); ++i) {
    NodeId x = trace.constant(vec_tensor(train_x[i]));
    NodeId logits = trace.add(trace.matmul(w, x), b);
    NodeId prob = trace.pick(trace.softmax(logits), class_index.at(train_y[i]));
    losses.push_back(trace.scale(trace.log(prob), -1.0));
  }
  NodeId loss = trace.mean(trace.concat(losses));

  Bindings params{{"probe.w", zeros({n_classes, dim})},
                  {"probe.b", zeros({n_classes})}};
  OptimizerState opt = make_adam(config.lr);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    GradientMap grads = gradient(trace, loss, params);
    optimizer_step(opt, params, grads);
  }

  const Tensor& wt = params.at("probe.w");
  const Tensor& bt = params.at("probe.b");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) {
    std::size_t best = 0;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_classes; ++c) {
      double logit = bt.values[c];
      for (std::size_t d = 0; d < dim; ++d) logit += wt.at(c, d) * test_x[i][d];
      if (logit > best_logit) {
        best_logit = logit;
        best = c;
      }
    }
    if (classes[best] == test_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

double knn_accuracy(const std::vector<std::vector<double>>& train_x,
                    const std::vector<int>& train_y,
                    const std::vector<std::vector<double>>& test_x,
                    const std::vector<int>& test_y, int k) {
  check_embedding_table(train_x, train_y, "knn_accuracy");
  check_embedding_table(test_x, test_y, "knn_accuracy");
  if (k < 1 || static_cast<std::size_t>(k) > train_x.size()) {
    throw ValueError("knn_accuracy: k must be in [1, train size]");
  }

  std::vector<double> train_norm(train_x.size());
  for (std::size_t i = 0; i < train_x.size(); ++i) {
    train_norm[i] = vec_norm(train_x[i]);
    if (train_norm[i] < 1e-8) {
      throw NumericError("knn_accuracy: train embedding " + std::to_string(i) +
                         " has near-zero norm");
    }
  }

  std::size_t correct = 0;
  for (std::size_t q = 0; q < test_x.size(); ++q) {
    double qn = vec_norm(test_x[q]);
    if (qn < 1e-8) {
      throw NumericError("knn_accuracy: test embedding " + std::to_string(q) +
                         " has near-zero norm");
    }
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(train_x.size());
    for (std::size_t i = 0; i < train_x.size(); ++i) {
      double dist = 1.0 - vec_dot(test_x[q], train_x[i]) / (qn * train_norm[i]);
      scored.emplace_back(dist, i);
    }
    // stable sort over index order: distance ties keep the lowest index
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::map<int, int> votes;
    for (int i = 0; i < k; ++i) votes[train_y[scored[i].second]] += 1;
    int best_class = votes.begin()->first;
    int best_count = votes.begin()->second;
    for (const auto& [cls, count] : votes) {
      if (count > best_count) {  // ties keep the lowest class id
        best_class = cls;
        best_count = count;
      }
    }
    if (best_class == test_y[q]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

double cluster_accuracy(const std::vector<int>& predicted,
                        const std::vector<int>& labels) {
  if (predicted.empty()) throw ValueError("cluster_accuracy: empty input");
  if (predicted.size() != labels.size()) {
    throw ValueError("cluster_accuracy: length mismatch");
  }

  std::map<int, std::size_t> pred_index, label_index;
  for (int p : predicted) pred_index.emplace(p, pred_index.size());
  for (int l : labels) label_index.emplace(l, label_index.size());

  std::size_t n = std::max(pred_index.size(), label_index.size());
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    counts[pred_index[predicted[i]]][label_index[labels[i]]] += 1.0;
  }

  // maximize matched counts: minimize (max - count)
  double top = 0.0;
  for (const auto& row : counts) {
    for (double v : row) top = std::max(top, v);
  }
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i][j] = top - counts[i][j];
  }

  std::vector<int> col_to_row = hungarian_min(cost);
  double matched = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    matched += counts[static_cast<std::size_t>(col_to_row[j])][j];
  }
  return matched / static_cast<double>(predicted.size());
}

std::map<int, double> forgetting(const AccuracyMatrix& matrix) {
  if (matrix.rows.size() < 2) {
    throw ValueError("forgetting: needs at least 2 evaluation times");
  }
  for (const auto& row : matrix.rows) {
    for (const auto& [g, acc] : row) {
      if (!(acc >= 0.0 && acc <= 1.0)) {
        throw ValueError("forgetting: accuracy for group " + std::to_string(g) +
                         " outside [0,1]");
      }
    }
  }
  // once introduced, a group must stay present
  std::set<int> seen;
  for (const auto& row : matrix.rows) {
    for (int g : seen) {
      if (row.count(g) == 0) {
        throw ValueError("forgetting: group " + std::to_string(g) +
                         " missing after its introduction");
      }
    }
    for (const auto& [g, acc] : row) {
      (void)acc;
      seen.insert(g);
    }
  }

  const auto& final_row = matrix.rows.back();
  std::map<int, double> out;
  for (const auto& [g, final_acc] : final_row) {
    double best = -1.0;
    for (std::size_t t = 0; t + 1 < matrix.rows.size(); ++t) {
      auto it = matrix.rows[t].find(g);
      if (it != matrix.rows[t].end()) best = std::max(best, it->second);
    }
    if (best < 0.0) continue;  // introduced at the final time
    out[g] = std::max(0.0, best - final_acc);
  }
  return out;
}

double separation_ratio(const std::vector<std::vector<double>>& embeddings,
                        const std::vector<int>& labels) {
  check_embedding_table(embeddings, labels, "separation_ratio");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (by_class.size() < 2) {
    throw ValueError("separation_ratio: needs at least 2 classes");
  }
  for (const auto& [cls, members] : by_class) {
    if (members.size() < 2) {
      throw ValueError("separation_ratio: class " + std::to_string(cls) +
                       " has fewer than 2 samples");
    }
  }

  std::size_t dim = embeddings.front().size();
  std::map<int, std::vector<double>> centroids;
  for (const auto& [cls, members] : by_class) {
    std::vector<double> c(dim, 0.0);
    for (std::size_t i : members) {
      for (std::size_t d = 0; d < dim; ++d) c[d] += embeddings[i][d];
    }
    for (double& v : c) v /= static_cast<double>(members.size());
    centroids[cls] = std::move(c);
  }

  double inter = 0.0;
  std::size_t pairs = 0;
  for (auto a = centroids.begin(); a != centroids.end(); ++a) {
    for (auto b = std::next(a); b != centroids.end(); ++b) {
      inter += std::sqrt(vec_dist2(a->second, b->second));
      ++pairs;
    }
  }
  inter /= static_cast<double>(pairs);

  double within = 0.0;
  for (const auto& [cls, members] : by_class) {
    for (std::size_t i : members) {
      within += std::sqrt(vec_dist2(embeddings[i], centroids[cls]));
    }
  }
  within /= static_cast<double>(embeddings.size());

  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return inter / within;
}

}  // namespace cssl
