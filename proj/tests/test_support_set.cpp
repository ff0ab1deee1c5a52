#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cssl/error.hpp"
#include "cssl/rng.hpp"
#include "cssl/support_set.hpp"
#include "cssl/tensor.hpp"

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

// independent distance formulation: ||z||^2 - 2 z.q + ||q||^2 in long double
long double dist2_oracle(const std::vector<double>& z, const std::vector<double>& q) {
  long double zz = 0, zq = 0, qq = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    zz += static_cast<long double>(z[i]) * z[i];
    zq += static_cast<long double>(z[i]) * q[i];
    qq += static_cast<long double>(q[i]) * q[i];
  }
  return zz - 2 * zq + qq;
}

}  // namespace

TEST_CASE("fifo eviction keeps the newest entries") {
  SupportSet q(3);
  std::vector<double> a{1, 0, 0, 0}, b{0, 1, 0, 0}, c{0, 0, 1, 0}, d{0, 0, 0, 1};
  q.push(a, 0);
  q.push(b, 1);
  q.push(c, 2);
  q.push(d, 3);
  REQUIRE(q.size() == 3);
  CHECK(q.entries()[0].embedding == b);
  CHECK(q.entries()[1].embedding == c);
  CHECK(q.entries()[2].embedding == d);
  CHECK(q.entries()[0].insertion_index == 1);
  CHECK(q.entries()[2].insertion_index == 3);
}

TEST_CASE("pushing more than capacity in one burst keeps the tail") {
  SupportSet q(2);
  Rng rng(3);
  std::vector<std::vector<double>> pushed;
  for (int i = 0; i < 7; ++i) {
    pushed.push_back(rand_unit(rng, 5));
    q.push(pushed.back(), std::nullopt);
  }
  REQUIRE(q.size() == 2);
  CHECK(q.entries()[0].embedding == pushed[5]);
  CHECK(q.entries()[1].embedding == pushed[6]);
}

TEST_CASE("fifo property holds for arbitrary push sequences") {
  Rng rng(11);
  for (std::size_t cap : {1u, 4u, 16u}) {
    SupportSet q(cap);
    std::vector<std::vector<double>> pushed;
    std::size_t total = 3 * cap + 2;
    for (std::size_t i = 0; i < total; ++i) {
      pushed.push_back(rand_unit(rng, 3));
      q.push(pushed.back(), std::nullopt);
    }
    std::size_t kept = std::min(total, cap);
    REQUIRE(q.size() == kept);
    for (std::size_t i = 0; i < kept; ++i) {
      CHECK(q.entries()[i].embedding == pushed[total - kept + i]);
    }
  }
}

TEST_CASE("non-normalized entries are rejected") {
  SupportSet q(4);
  CHECK_THROWS_AS(q.push({1.0, 1.0}, std::nullopt), ValueError);
  CHECK_THROWS_AS(SupportSet(0), ValueError);
}

TEST_CASE("nearest picks the closest axis") {
  SupportSet q(4);
  q.push({1, 0}, std::nullopt);
  q.push({0, 1}, std::nullopt);
  CHECK(q.nearest(unit({0.9, 0.1})).embedding == std::vector<double>{1, 0});
  CHECK(q.nearest(unit({0.1, 0.9})).embedding == std::vector<double>{0, 1});
}

TEST_CASE("a member of the set is its own nearest neighbor") {
  SupportSet q(8);
  Rng rng(7);
  std::vector<std::vector<double>> entries;
  for (int i = 0; i < 8; ++i) {
    entries.push_back(rand_unit(rng, 6));
    q.push(entries.back(), std::nullopt);
  }
  for (const auto& e : entries) {
    CHECK(q.nearest(e).embedding == e);
  }
}

TEST_CASE("nearest matches a brute-force scan on 1000 random entries") {
  SupportSet q(1000);
  Rng rng(23);
  std::vector<std::vector<double>> entries;
  for (int i = 0; i < 1000; ++i) {
    entries.push_back(rand_unit(rng, 8));
    q.push(entries.back(), std::nullopt);
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z = rand_unit(rng, 8);
    std::size_t best = 0;
    long double best_d = dist2_oracle(z, entries[0]);
    for (std::size_t i = 1; i < entries.size(); ++i) {
      long double d = dist2_oracle(z, entries[i]);
      if (d < best_d) {
        best = i;
        best_d = d;
      }
    }
    CHECK(q.nearest(z).insertion_index == best);
  }
}

TEST_CASE("nearest ties break toward the lowest insertion index") {
  SupportSet q(4);
  q.push({1, 0}, std::nullopt);
  q.push({1, 0}, std::nullopt);  // identical duplicate
  CHECK(q.nearest({1, 0}).insertion_index == 0);
}

TEST_CASE("nearest_k returns sorted distinct entries") {
  SupportSet q(16);
  Rng rng(31);
  for (int i = 0; i < 16; ++i) q.push(rand_unit(rng, 4), std::nullopt);
  std::vector<double> z = rand_unit(rng, 4);
  auto top = q.nearest_k(z, 5);
  REQUIRE(top.size() == 5);
  for (std::size_t i = 1; i < top.size(); ++i) {
    double prev = vec_dist2(z, top[i - 1]->embedding);
    double cur = vec_dist2(z, top[i]->embedding);
    CHECK(prev <= cur);
  }
  CHECK(top[0]->insertion_index == q.nearest(z).insertion_index);
  CHECK(q.nearest_k(z, 100).size() == 16);
}

TEST_CASE("admissible subsets follow the labeling rule") {
  SupportSet q(8);
  q.push({1, 0, 0}, 2);            // q1, label b
  q.push({0, 1, 0}, 1);            // q2, label a
  q.push({0, 0, 1}, std::nullopt);  // q3, unlabeled

  auto all = q.exemplar_positives(std::nullopt);
  CHECK(all.size() == 3);

  auto for_a = q.exemplar_positives(1);
  REQUIRE(for_a.size() == 2);
  CHECK(for_a[0]->insertion_index == 1);
  CHECK(for_a[1]->insertion_index == 2);

  auto for_c = q.exemplar_positives(3);
  REQUIRE(for_c.size() == 1);
  CHECK(!for_c[0]->label.has_value());
}

TEST_CASE("label-aware nearest skips conflicting labels") {
  SupportSet q(4);
  q.push({1, 0}, 2);  // nearer to the query but wrong label
  q.push({0, 1}, 1);
  auto r = q.nearest_admissible(unit({0.9, 0.1}), 1);
  CHECK(!r.fallback);
  CHECK(r.entry->insertion_index == 1);
  CHECK(r.entry->label == 1);
}

TEST_CASE("empty admissible subset falls back to unrestricted search") {
  SupportSet q(4);
  q.push({1, 0}, 2);
  q.push({0, 1}, 2);
  auto r = q.nearest_admissible(unit({0.9, 0.1}), 1);
  CHECK(r.fallback);
  CHECK(r.entry->insertion_index == 0);
}

TEST_CASE("empty set operations raise") {
  SupportSet q(4);
  CHECK_THROWS_AS(q.nearest({1.0, 0.0}), NotFoundError);
  CHECK_THROWS_AS(q.nearest_admissible({1.0, 0.0}, std::nullopt), NotFoundError);
}
