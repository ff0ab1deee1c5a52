#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cssl/contrastive.hpp"
#include "cssl/encoder.hpp"
#include "cssl/error.hpp"
#include "cssl/rng.hpp"
#include "cssl/support_set.hpp"

using namespace cssl;

namespace {

std::vector<double> unit(std::vector<double> v) {
  double n = vec_norm(v);
  for (double& x : v) x /= n;
  return v;
}

std::vector<double> rand_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.gaussian();
  return unit(v);
}

std::vector<std::vector<double>> rand_unit_batch(Rng& rng, std::size_t n,
                                                 std::size_t dim) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rand_unit(rng, dim));
  return out;
}

// prediction-head params whose hidden relu can never go fully dead on a unit
// input: the bias dominates any row dot product, so the head output cannot
// collapse to the zero vector
ModelParams head_params(std::size_t dim, std::uint64_t seed) {
  EncoderConfig c;
  c.input_dim = dim;
  c.embed_dim = dim;
  ModelParams p = init_params(c, seed);
  p.tensors["pred.b0"] = vec_tensor(std::vector<double>(dim, 5.0));
  return p;
}

// ---- brute-force oracles, direct formula evaluation only ----

double oracle_info_nce(const std::vector<double>& z, const std::vector<double>& zp,
                       const std::vector<std::vector<double>>& negs, double tau) {
  double num = std::exp(vec_dot(z, zp) / tau);
  double denom = num;
  for (const auto& n : negs) denom += std::exp(vec_dot(z, n) / tau);
  return -std::log(num / denom);
}

double oracle_simclr(const std::vector<std::vector<double>>& anchors,
                     const std::vector<std::vector<double>>& positives, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    double denom = 0.0;
    for (std::size_t k = 0; k < positives.size(); ++k) {
      denom += std::exp(vec_dot(anchors[i], positives[k]) / tau);
    }
    total += -std::log(std::exp(vec_dot(anchors[i], positives[i]) / tau) / denom);
  }
  return total / static_cast<double>(anchors.size());
}

double oracle_scl(const std::vector<std::vector<double>>& anchors,
                  const std::vector<int>& alabels,
                  const std::vector<std::vector<double>>& pool,
                  const std::vector<int>& plabels, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    double denom = 0.0;
    for (const auto& q : pool) denom += std::exp(vec_dot(anchors[i], q) / tau);
    double sum = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (plabels[j] != alabels[i]) continue;
      sum += -std::log(std::exp(vec_dot(anchors[i], pool[j]) / tau) / denom);
      ++count;
    }
    total += count == 0 ? 0.0 : sum / count;
  }
  return total / static_cast<double>(anchors.size());
}

double oracle_bce(const std::vector<std::vector<double>>& features,
                  const std::vector<std::vector<double>>& probs, double rho) {
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      double cos = vec_dot(features[i], features[j]) /
                   (vec_norm(features[i]) * vec_norm(features[j]));
      double l = cos >= rho ? 1.0 : 0.0;
      double s = std::clamp(vec_dot(probs[i], probs[j]), 1e-7, 1.0 - 1e-7);
      total += -(l * std::log(s) + (1.0 - l) * std::log(1.0 - s));
      ++pairs;
    }
  }
  return total / pairs;
}

}  // namespace

TEST_CASE("info_nce with no negatives is exactly zero") {
  std::vector<double> z{1, 0, 0};
  CHECK(info_nce(z, z, {}, 0.1) == 0.0);
}

TEST_CASE("info_nce on orthogonal positive and negative") {
  std::vector<double> e1{1, 0}, e2{0, 1};
  // -log(e / (e + 1)) = log1p(1/e), computed independently of the library
  double expect = std::log1p(std::exp(-1.0));
  CHECK(info_nce(e1, e1, {e2}, 1.0) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect == doctest::Approx(0.31326).epsilon(1e-4));
}

TEST_CASE("info_nce with equal similarities is ln n") {
  std::vector<double> z{0, 1, 0};
  // positive and both negatives all have dot 1 with z
  double loss = info_nce(z, z, {z, z}, 0.5);
  CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("info_nce matches the direct-formula oracle on random inputs") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    auto z = rand_unit(rng, 5);
    auto zp = rand_unit(rng, 5);
    auto negs = rand_unit_batch(rng, 4, 5);
    double tau = rng.uniform(0.05, 2.0);
    CHECK(info_nce(z, zp, negs, tau) ==
          doctest::Approx(oracle_info_nce(z, zp, negs, tau)).epsilon(1e-12));
  }
}

TEST_CASE("info_nce_batch averages per-sample losses") {
  Rng rng(43);
  ContrastiveBatch batch;
  batch.anchors = rand_unit_batch(rng, 6, 4);
  batch.positives = rand_unit_batch(rng, 6, 4);
  for (int i = 0; i < 6; ++i) batch.negatives.push_back(rand_unit_batch(rng, 3, 4));

  double expect = 0.0;
  for (int i = 0; i < 6; ++i) {
    expect += oracle_info_nce(batch.anchors[i], batch.positives[i], batch.negatives[i],
                              0.2);
  }
  expect /= 6.0;
  CHECK(info_nce_batch(batch, 0.2) == doctest::Approx(expect).epsilon(1e-12));

  ContrastiveBatch single;
  single.anchors = {batch.anchors[0]};
  single.positives = {batch.positives[0]};
  single.negatives = {batch.negatives[0]};
  CHECK(info_nce_batch(single, 0.2) ==
        doctest::Approx(info_nce(batch.anchors[0], batch.positives[0],
                                 batch.negatives[0], 0.2))
            .epsilon(1e-14));

  // duplicating every sample leaves the mean unchanged
  ContrastiveBatch doubled = batch;
  doubled.anchors.insert(doubled.anchors.end(), batch.anchors.begin(),
                         batch.anchors.end());
  doubled.positives.insert(doubled.positives.end(), batch.positives.begin(),
                           batch.positives.end());
  doubled.negatives.insert(doubled.negatives.end(), batch.negatives.begin(),
                           batch.negatives.end());
  CHECK(info_nce_batch(doubled, 0.2) ==
        doctest::Approx(info_nce_batch(batch, 0.2)).epsilon(1e-12));

  CHECK_THROWS_AS(info_nce_batch(ContrastiveBatch{}, 0.2), ValueError);
}

TEST_CASE("simclr single-anchor batch is zero") {
  CHECK(simclr_loss({{1.0, 0.0}}, {{1.0, 0.0}}, 0.7) == 0.0);
}

TEST_CASE("simclr with all similarities equal is ln N") {
  std::vector<double> z{1, 0};
  std::vector<std::vector<double>> batch(5, z);
  CHECK(simclr_loss(batch, batch, 0.3) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-13));
}

TEST_CASE("simclr orthonormal 3-batch at tau 1") {
  std::vector<std::vector<double>> basis{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  // own-positive similarity 1, cross similarities 0: -log(e / (e + 2))
  double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  CHECK(simclr_loss(basis, basis, 1.0) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect == doctest::Approx(0.551445).epsilon(1e-5));
}

TEST_CASE("simclr matches the direct-formula oracle on random batches") {
  Rng rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    auto anchors = rand_unit_batch(rng, 5, 6);
    auto positives = rand_unit_batch(rng, 5, 6);
    double tau = rng.uniform(0.05, 1.5);
    CHECK(simclr_loss(anchors, positives, tau) ==
          doctest::Approx(oracle_simclr(anchors, positives, tau)).epsilon(1e-12));
  }
}

TEST_CASE("batch permutation leaves losses unchanged") {
  Rng rng(53);
  auto anchors = rand_unit_batch(rng, 7, 5);
  auto positives = rand_unit_batch(rng, 7, 5);
  double base = simclr_loss(anchors, positives, 0.2);

  std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
  std::vector<std::vector<double>> pa, pp;
  for (std::size_t i : perm) {
    pa.push_back(anchors[i]);
    pp.push_back(positives[i]);
  }
  CHECK(simclr_loss(pa, pp, 0.2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("nnclr with support equal to the anchors reduces to simclr") {
  Rng rng(59);
  ModelParams params = head_params(4, 77);

  for (int trial = 0; trial < 10; ++trial) {
    auto anchors = rand_unit_batch(rng, 5, 4);
    auto positives = rand_unit_batch(rng, 5, 4);
    SupportSet support(64);
    for (const auto& a : anchors) support.push(a, std::nullopt);

    std::vector<std::vector<double>> pred_pos;
    for (const auto& p : positives) pred_pos.push_back(predict(params, p));

    NnclrResult r = nnclr_loss(anchors, positives, support, 0.4, {}, true, params);
    CHECK(r.loss == doctest::Approx(simclr_loss(anchors, pred_pos, 0.4)).epsilon(1e-12));
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      CHECK(r.selection.neighbors[i] == anchors[i]);
    }
  }
}

TEST_CASE("nnclr uses the admissible neighbor for labeled anchors") {
  ModelParams params = head_params(2, 1);

  SupportSet support(8);
  support.push({1, 0}, 2);  // nearer but conflicting label
  support.push({0, 1}, 1);

  std::vector<std::vector<double>> anchors{unit({0.9, 0.1})};
  std::vector<std::vector<double>> positives{unit({0.8, 0.2})};
  NnclrResult r = nnclr_loss(anchors, positives, support, 0.5, {1}, true, params);
  CHECK(r.selection.neighbor_labels[0] == 1);
  CHECK(!r.selection.fallback[0]);

  // label-aware off: the conflicting entry wins on distance
  NnclrResult r2 = nnclr_loss(anchors, positives, support, 0.5, {1}, false, params);
  CHECK(r2.selection.neighbor_labels[0] == 2);
}

TEST_CASE("nnclr falls back to unrestricted NN when nothing is admissible") {
  ModelParams params = head_params(2, 1);

  SupportSet support(8);
  support.push({1, 0}, 2);
  support.push({0, 1}, 2);
  std::vector<std::vector<double>> anchors{unit({0.9, 0.1})};
  std::vector<std::vector<double>> positives{unit({0.8, 0.2})};
  NnclrResult r = nnclr_loss(anchors, positives, support, 0.5, {1}, true, params);
  CHECK(r.selection.fallback[0]);
  CHECK(r.selection.neighbor_indices[0] == 0);
}

TEST_CASE("nnclr matches an independent full reimplementation") {
  Rng rng(61);
  ModelParams params = head_params(6, 5);

  for (int trial = 0; trial < 20; ++trial) {
    auto anchors = rand_unit_batch(rng, 4, 6);
    auto positives = rand_unit_batch(rng, 4, 6);
    SupportSet support(64);
    auto pool = rand_unit_batch(rng, 12, 6);
    for (const auto& q : pool) support.push(q, std::nullopt);
    double tau = rng.uniform(0.1, 1.0);

    NnclrResult r = nnclr_loss(anchors, positives, support, tau, {}, true, params);

    // oracle: brute-force NN by squared distance, then the SimCLR form over
    // prediction-head outputs
    std::vector<std::vector<double>> nn, pp;
    for (const auto& z : anchors) {
      std::size_t best = 0;
      double best_d = vec_dist2(z, pool[0]);
      for (std::size_t j = 1; j < pool.size(); ++j) {
        double d = vec_dist2(z, pool[j]);
        if (d < best_d) {
          best = j;
          best_d = d;
        }
      }
      nn.push_back(pool[best]);
    }
    for (const auto& p : positives) pp.push_back(predict(params, p));
    double expect = oracle_simclr(nn, pp, tau);
    CHECK(r.loss == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("scl with a single same-label pool entry is zero") {
  std::vector<std::vector<double>> anchors{{1, 0}};
  std::vector<std::vector<double>> pool{{0, 1}};
  CHECK(scl_loss(anchors, {3}, pool, {3}, 0.5) == 0.0);
}

TEST_CASE("scl with equidistant pool entries and one positive is ln n") {
  // all pool entries orthogonal to the anchor: equal dots, one same-label
  std::vector<std::vector<double>> anchors{{1, 0, 0, 0}};
  std::vector<std::vector<double>> pool{
      {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  CHECK(scl_loss(anchors, {1}, pool, {1, 2, 3}, 1.0) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-13));
}

TEST_CASE("scl matches the brute-force double loop") {
  Rng rng(67);
  for (int trial = 0; trial < 30; ++trial) {
    auto anchors = rand_unit_batch(rng, 5, 4);
    auto pool = rand_unit_batch(rng, 9, 4);
    std::vector<int> alabels, plabels;
    for (int i = 0; i < 5; ++i) alabels.push_back((int)rng.uniform_index(3));
    for (int i = 0; i < 9; ++i) plabels.push_back((int)rng.uniform_index(3));
    double tau = rng.uniform(0.1, 1.0);
    CHECK(scl_loss(anchors, alabels, pool, plabels, tau) ==
          doctest::Approx(oracle_scl(anchors, alabels, pool, plabels, tau))
              .epsilon(1e-12));
  }
}

TEST_CASE("anchors with no same-label pool entry contribute zero") {
  std::vector<std::vector<double>> anchors{{1, 0}, {0, 1}};
  std::vector<std::vector<double>> pool{{1, 0}};
  // anchor 0 shares label 1 with the pool entry; anchor 1's label 9 is absent
  double with_orphan = scl_loss(anchors, {1, 9}, pool, {1}, 0.5);
  double solo = scl_loss({anchors[0]}, {1}, pool, {1}, 0.5);
  CHECK(with_orphan == doctest::Approx(solo / 2.0).epsilon(1e-14));
}

TEST_CASE("ncl term2 equals term1 when the support holds exactly the view") {
  Rng rng(71);
  auto z = rand_unit(rng, 5);
  auto v = rand_unit(rng, 5);
  auto hard = rand_unit_batch(rng, 3, 5);

  SupportSet support(8);
  support.push(v, std::nullopt);

  // single anchor: both terms share the negatives, and NN(z) = v, so the
  // pseudo-positive term duplicates the correlated-view term
  double loss = ncl_loss({z}, {v}, support, hard, 0.3, 1);
  double term = oracle_info_nce(z, v, hard, 0.3);
  CHECK(loss == doctest::Approx(term).epsilon(1e-12));
}

TEST_CASE("ncl with no negatives at all is zero") {
  Rng rng(73);
  auto z = rand_unit(rng, 4);
  auto v = rand_unit(rng, 4);
  SupportSet support(4);
  support.push(v, std::nullopt);
  CHECK(ncl_loss({z}, {v}, support, {}, 0.3, 1) == 0.0);
}

TEST_CASE("a hard negative strictly increases the ncl loss") {
  Rng rng(79);
  auto anchors = rand_unit_batch(rng, 3, 5);
  auto views = rand_unit_batch(rng, 3, 5);
  SupportSet support(16);
  for (const auto& q : rand_unit_batch(rng, 6, 5)) support.push(q, std::nullopt);

  double without = ncl_loss(anchors, views, support, {}, 0.3, 2);
  double with_hard = ncl_loss(anchors, views, support, {anchors[0]}, 0.3, 2);
  CHECK(with_hard > without);
}

TEST_CASE("ncl matches a brute-force reimplementation") {
  Rng rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    auto anchors = rand_unit_batch(rng, 4, 5);
    auto views = rand_unit_batch(rng, 4, 5);
    auto hard = rand_unit_batch(rng, 2, 5);
    auto pool = rand_unit_batch(rng, 10, 5);
    SupportSet support(32);
    for (const auto& q : pool) support.push(q, std::nullopt);
    double tau = rng.uniform(0.1, 1.0);
    int k = 3;

    double total = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      std::vector<std::vector<double>> negs;
      for (std::size_t j = 0; j < anchors.size(); ++j) {
        if (j != i) negs.push_back(anchors[j]);
      }
      for (const auto& h : hard) negs.push_back(h);
      double term1 = oracle_info_nce(anchors[i], views[i], negs, tau);

      // k smallest distances, stable order
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t j = 0; j < pool.size(); ++j) {
        scored.emplace_back(vec_dist2(anchors[i], pool[j]), j);
      }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      double term2 = 0.0;
      for (int j = 0; j < k; ++j) {
        term2 += oracle_info_nce(anchors[i], pool[scored[j].second], negs, tau);
      }
      term2 /= k;
      total += 0.5 * (term1 + term2);
    }
    total /= static_cast<double>(anchors.size());
    CHECK(ncl_loss(anchors, views, support, hard, tau, k) ==
          doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("consistency loss basics") {
  std::vector<double> p{0.2, 0.3, 0.5};
  CHECK(consistency_loss(p, p) == 0.0);

  std::vector<double> one_hot{0, 1, 0, 0};
  std::vector<double> shifted{0, 0, 1, 0};
  CHECK(consistency_loss(one_hot, shifted) == doctest::Approx(0.5).epsilon(1e-14));

  std::vector<double> q{0.5, 0.25, 0.25};
  CHECK(consistency_loss(p, q) == doctest::Approx(consistency_loss(q, p)).epsilon(1e-15));

  CHECK_THROWS_AS(consistency_loss({0.5, 0.6}, {0.5, 0.5}), ValueError);
  CHECK_THROWS_AS(consistency_loss({-0.1, 1.1}, {0.5, 0.5}), ValueError);
}

TEST_CASE("pairwise bce pseudo-labels are symmetric") {
  Rng rng(89);
  auto features = rand_unit_batch(rng, 6, 4);
  auto l = cosine_pseudo_labels(features, 0.3);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(l[i][j] == l[j][i]);
    }
  }
}

TEST_CASE("pairwise bce near-perfect agreement") {
  std::vector<std::vector<double>> features{{1, 0}, {1, 0}};
  std::vector<std::vector<double>> probs{{1, 0}, {1, 0}};
  // l=1 and s clamps to 1-1e-7: loss = -log(1-1e-7), about 1e-7
  double loss = pairwise_bce_loss(features, probs, 0.9);
  CHECK(loss == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-9));
  CHECK(loss < 2e-7);
}

TEST_CASE("pairwise bce matches the brute-force pair loop") {
  Rng rng(97);
  for (int trial = 0; trial < 30; ++trial) {
    auto features = rand_unit_batch(rng, 5, 4);
    std::vector<std::vector<double>> probs;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> raw(3);
      for (double& v : raw) v = std::exp(rng.gaussian());
      double s = raw[0] + raw[1] + raw[2];
      for (double& v : raw) v /= s;
      probs.push_back(raw);
    }
    double rho = rng.uniform(-0.5, 0.9);
    CHECK(pairwise_bce_loss(features, probs, rho) ==
          doctest::Approx(oracle_bce(features, probs, rho)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(pairwise_bce_loss({{1.0, 0.0}}, {{1.0, 0.0}}, 0.5), ValueError);
}

TEST_CASE("fewshot total is supervised plus weighted self-supervised") {
  CHECK(fewshot_total_loss(0.5, 0.25, 1.0) == 0.75);
  CHECK(fewshot_total_loss(0.5, 123.0, 0.0) == 0.5);
  CHECK_THROWS_AS(fewshot_total_loss(0.5, 0.5, -1.0), ValueError);
}

TEST_CASE("fewshot gradient is the linear combination of part gradients") {
  Trace trace;
  NodeId w = trace.param("w", {4});
  NodeId sup = trace.mean(trace.mul(w, w));
  NodeId self = trace.sum(trace.relu(w));
  double lambda = 0.7;
  NodeId total = build_fewshot_total(trace, sup, self, lambda);

  Bindings b{{"w", vec_tensor({0.5, -1.0, 2.0, 0.1})}};
  GradientMap g_total = gradient(trace, total, b);
  GradientMap g_sup = gradient(trace, sup, b);
  GradientMap g_self = gradient(trace, self, b);
  for (std::size_t i = 0; i < 4; ++i) {
    double expect = g_sup.at("w").values[i] + lambda * g_self.at("w").values[i];
    CHECK(g_total.at("w").values[i] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("losses reject invalid inputs") {
  std::vector<double> ok{1, 0};
  std::vector<double> bad{1, 1};
  CHECK_THROWS_AS(info_nce(bad, ok, {}, 0.5), ValueError);
  CHECK_THROWS_AS(info_nce(ok, ok, {}, 0.0), ValueError);
  CHECK_THROWS_AS(info_nce(ok, ok, {}, -1.0), ValueError);
  CHECK_THROWS_AS(simclr_loss({}, {}, 0.5), ValueError);
  CHECK_THROWS_AS(scl_loss({ok}, {1}, {}, {}, 0.5), ValueError);
}

TEST_CASE("contrastive losses are non-negative on random inputs") {
  Rng rng(101);
  ModelParams params = head_params(4, 9);

  for (int trial = 0; trial < 40; ++trial) {
    auto anchors = rand_unit_batch(rng, 4, 4);
    auto positives = rand_unit_batch(rng, 4, 4);
    auto negs = rand_unit_batch(rng, 3, 4);
    double tau = rng.uniform(0.05, 2.0);
    CHECK(info_nce(anchors[0], positives[0], negs, tau) >= 0.0);
    CHECK(simclr_loss(anchors, positives, tau) >= 0.0);

    SupportSet support(16);
    for (const auto& q : rand_unit_batch(rng, 8, 4)) support.push(q, std::nullopt);
    CHECK(nnclr_loss(anchors, positives, support, tau, {}, true, params).loss >= 0.0);
    CHECK(ncl_loss(anchors, positives, support, negs, tau, 2) >= 0.0);

    std::vector<int> alabels{0, 1, 0, 1};
    std::vector<int> plabels{0, 1, 1};
    CHECK(scl_loss(anchors, alabels, negs, plabels, tau) >= 0.0);
  }
}

TEST_CASE("gradients of trace-built losses match finite differences") {
  Rng rng(103);
  for (int trial = 0; trial < 3; ++trial) {
    Trace trace;
    std::vector<NodeId> anchors, views;
    Bindings bind;
    for (int i = 0; i < 3; ++i) {
      std::string an = "a" + std::to_string(i);
      std::string vn = "v" + std::to_string(i);
      anchors.push_back(trace.l2_normalize(trace.param(an, {4})));
      views.push_back(trace.l2_normalize(trace.param(vn, {4})));
      std::vector<double> av(4), vv(4);
      for (double& x : av) x = rng.gaussian();
      for (double& x : vv) x = rng.gaussian();
      bind[an] = vec_tensor(av);
      bind[vn] = vec_tensor(vv);
    }

    NodeId simclr = build_simclr(trace, anchors, views, 0.5);
    CHECK(check_gradient(trace, simclr, bind, 1e-4) <= 1e-4);

    NodeId nce = build_info_nce(trace, anchors[0], views[0], {anchors[1], views[2]},
                                0.3);
    CHECK(check_gradient(trace, nce, bind, 1e-4) <= 1e-4);

    std::vector<std::vector<std::vector<double>>> neighbors(3);
    for (int i = 0; i < 3; ++i) neighbors[i] = rand_unit_batch(rng, 2, 4);
    NodeId ncl = build_ncl(trace, anchors, views, neighbors, {views[1]}, 0.4);
    CHECK(check_gradient(trace, ncl, bind, 1e-4) <= 1e-4);

    NodeId scl = build_scl(trace, anchors, {0, 1, 0}, views, {0, 0, 1}, 0.5);
    CHECK(check_gradient(trace, scl, bind, 1e-4) <= 1e-4);
  }
}

TEST_CASE("gradient flows through prediction-head parameters in nnclr") {
  ModelParams params = head_params(4, 13);
  Rng rng(107);

  Trace trace;
  NodeMap nodes = register_params(trace, params, prefix_trainable({"pred."}));
  std::vector<NodeId> pred_pos;
  std::vector<std::vector<double>> neighbors;
  for (int i = 0; i < 3; ++i) {
    auto p = rand_unit(rng, 4);
    pred_pos.push_back(apply_predict_head(trace, nodes, trace.constant(vec_tensor(p))));
    neighbors.push_back(rand_unit(rng, 4));
  }
  NodeId loss = build_nnclr(trace, neighbors, pred_pos, 0.3);
  Bindings bind = trainable_bindings(params, prefix_trainable({"pred."}));
  GradientMap g = gradient(trace, loss, bind);

  double total_mag = 0.0;
  for (const auto& [name, grad] : g) {
    (void)name;
    for (double v : grad.values) total_mag += std::fabs(v);
  }
  CHECK(total_mag > 1e-8);
  CHECK(check_gradient(trace, loss, bind, 1e-4) <= 1e-4);
}
