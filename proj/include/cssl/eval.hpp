#pragma once

#include <map>
#include <vector>

#include "cssl/error.hpp"

namespace cssl {

// rows[t][g]: accuracy of class group g measured after session t; a group
// appears first at the session that introduced it and at every later time
struct AccuracyMatrix {
  std::vector<std::map<int, double>> rows;
};

struct ProbeConfig {
  double lr = 1e-2;
  int epochs = 200;
};

// trains a linear classifier with cross-entropy on the frozen train
// embeddings (zero init, full-batch adam) and reports test accuracy
double linear_probe(const std::vector<std::vector<double>>& train_x,
                    const std::vector<int>& train_y,
                    const std::vector<std::vector<double>>& test_x,
                    const std::vector<int>& test_y, const ProbeConfig& config = {});

// majority vote over the k nearest train embeddings by cosine distance;
// distance ties keep the lowest train index, vote ties the lowest class id
double knn_accuracy(const std::vector<std::vector<double>>& train_x,
                    const std::vector<int>& train_y,
                    const std::vector<std::vector<double>>& test_x,
                    const std::vector<int>& test_y, int k);

// exact maximum-weight one-to-one matching between cluster ids and labels on
// the contingency matrix; accuracy = matched count / total
double cluster_accuracy(const std::vector<int>& predicted,
                        const std::vector<int>& labels);

// per-group drop from the best earlier accuracy to the final row, clipped at
// zero; groups introduced at the final time are excluded
std::map<int, double> forgetting(const AccuracyMatrix& matrix);

// mean pairwise inter-class centroid distance over mean sample-to-centroid
// distance; +infinity when every class is a point mass
double separation_ratio(const std::vector<std::vector<double>>& embeddings,
                        const std::vector<int>& labels);

}  // namespace cssl
