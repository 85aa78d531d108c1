#include "vmcp/universe.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "vmcp/synth.hpp"

namespace {

using vmcp::LabelSet;
using vmcp::SetFunction;
using vmcp::SetFunctionKind;
using vmcp::SetProxy;

std::vector<int> chain_order(const vmcp::UniverseSeq& u) {
  std::vector<int> order;
  for (std::size_t j = 1; j < u.size(); ++j) order.push_back((u.sets[j] - u.sets[j - 1]).indices().front());
  return order;
}

std::vector<double> random_probs(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> p(static_cast<std::size_t>(k));
  for (double& x : p) x = u(rng);
  return p;
}

// Independent argsort: descending key, ascending index on ties.
std::vector<int> argsort_desc(const std::vector<double>& key) {
  std::vector<int> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return key[a] != key[b] ? key[a] > key[b] : a < b; });
  return idx;
}

TEST(Universe, FullSmall) {
  const SetFunction fp(SetFunctionKind::FalsePositive, 2);
  const auto u = vmcp::full_universe(SetProxy(fp, std::vector<double>{0.3, 0.8}));
  ASSERT_EQ(u.size(), 4u);
  EXPECT_TRUE(u.sets.front().empty());
  EXPECT_EQ(u.kind, vmcp::UniverseKind::Full);
  // Costs (1-p): {1}: 0.2, {0}: 0.7, {0,1}: 0.9.
  EXPECT_EQ(u.sets[1], LabelSet{1});
  EXPECT_EQ(u.sets[2], LabelSet{0});
  EXPECT_EQ(u.sets[3], (LabelSet{0, 1}));
}

TEST(Universe, FullSortedByProxyCost) {
  std::mt19937_64 rng(2);
  const int k = 3;
  const auto w = vmcp::mnist_weights(k);
  const SetFunction fpc(SetFunctionKind::FalsePositiveWeighted, k, w);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_probs(rng, k);
    const SetProxy proxy(fpc, p);
    const auto u = vmcp::full_universe(proxy);
    // Oracle: enumerate, compute cost by hand, sort.
    std::vector<std::pair<double, std::uint64_t>> expected;
    for (std::uint64_t b = 0; b < 8; ++b) {
      double c = 0.0;
      for (int j = 0; j < k; ++j) {
        if ((b >> j) & 1U) c += (1.0 - p[j]) * w[j];
      }
      expected.emplace_back(c, b);
    }
    std::sort(expected.begin(), expected.end());
    ASSERT_EQ(u.size(), 8u);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(u.sets[j].bits(), expected[j].second);
  }
}

TEST(Universe, FullGuardsClassCount) {
  const SetFunction fp(SetFunctionKind::FalsePositive, 21);
  EXPECT_THROW(vmcp::full_universe(SetProxy(fp, std::vector<double>(21, 0.5))), std::invalid_argument);
}

TEST(Universe, GreedyProbExample) {
  const auto u = vmcp::greedy_prob(std::vector<double>{0.2, 0.9, 0.5});
  EXPECT_EQ(chain_order(u), (std::vector<int>{1, 2, 0}));
  EXPECT_TRUE(u.nested());
  EXPECT_EQ(u.sets[2], (LabelSet{1, 2}));
  EXPECT_EQ(chain_order(vmcp::greedy_prob(std::vector<double>{0.5, 0.7, 0.5})), (std::vector<int>{1, 0, 2}));
}

TEST(Universe, GreedyValueExamples) {
  EXPECT_EQ(chain_order(vmcp::greedy_value(std::vector<double>{0.9, 0.6}, std::vector<double>{1, 10})),
            (std::vector<int>{1, 0}));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_probs(rng, 8);
    EXPECT_EQ(chain_order(vmcp::greedy_value(p, std::vector<double>(8, 3.0))), chain_order(vmcp::greedy_prob(p)));
    std::vector<double> v(8);
    std::vector<double> key(8);
    for (int j = 0; j < 8; ++j) {
      v[j] = 1.0 + j;
      key[j] = p[j] * v[j];
    }
    EXPECT_EQ(chain_order(vmcp::greedy_value(p, v)), argsort_desc(key));
    EXPECT_EQ(chain_order(vmcp::greedy_prob(p)), argsort_desc(p));
  }
  EXPECT_THROW(vmcp::greedy_value(std::vector<double>{0.5}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(Universe, RatioAdditiveExamples) {
  const std::vector<double> p{0.9, 0.6};
  EXPECT_EQ(chain_order(vmcp::greedy_ratio_additive(p, std::vector<double>{1, 10}, std::vector<double>{0.1, 0.4})),
            (std::vector<int>{1, 0}));
  // v_k proportional to c_k / p_k makes every ratio equal.
  const std::vector<double> p3{0.2, 0.5, 0.8};
  const std::vector<double> c3{0.8, 0.5, 0.2};
  std::vector<double> v3(3);
  for (int k = 0; k < 3; ++k) v3[k] = 2.0 * c3[k] / p3[k];
  EXPECT_EQ(chain_order(vmcp::greedy_ratio_additive(p3, v3, c3)), (std::vector<int>{0, 1, 2}));
}

TEST(Universe, ZeroMarginalCostComesFirst) {
  const std::vector<double> p{0.5, 0.5, 0.5};
  const std::vector<double> v{1, 2, 3};
  const auto u = vmcp::greedy_ratio_additive(p, v, std::vector<double>{0.5, 0.0, 0.0});
  EXPECT_EQ(chain_order(u), (std::vector<int>{2, 1, 0}));
}

TEST(Universe, RatioGeneralMatchesAdditiveOnAdditiveSpecs) {
  std::mt19937_64 rng(6);
  const int k = 10;
  const auto w = vmcp::mnist_weights(k);
  const SetFunction tpc(SetFunctionKind::TruePositiveWeighted, k, w);
  const SetFunction fp(SetFunctionKind::FalsePositive, k);
  const SetFunction tp(SetFunctionKind::TruePositive, k);
  const SetFunction fpc(SetFunctionKind::FalsePositiveWeighted, k, w);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_probs(rng, k);
    for (const auto& [value, cost] : {std::pair{&tpc, &fp}, std::pair{&tp, &fpc}}) {
      const SetProxy vp(*value, p);
      const SetProxy cp(*cost, p);
      std::vector<double> units(k);
      std::vector<double> mc(k);
      for (int j = 0; j < k; ++j) {
        units[j] = value->unit(j);
        mc[j] = cp.marginal(j, LabelSet{});
      }
      ASSERT_EQ(vmcp::greedy_ratio_general(vp, cp).sets, vmcp::greedy_ratio_additive(p, units, mc).sets);
    }
  }
}

TEST(Universe, RatioGeneralSingleClass) {
  const SetFunction tp(SetFunctionKind::TruePositive, 1);
  const SetFunction fp(SetFunctionKind::FalsePositive, 1);
  const std::vector<double> p{0.3};
  const auto u = vmcp::greedy_ratio_general(SetProxy(tp, p), SetProxy(fp, p));
  ASSERT_EQ(u.size(), 2u);
  EXPECT_EQ(u.sets[1], LabelSet{0});
}

TEST(Universe, RatioGeneralWithGeneralValueMatchesStepwiseArgmax) {
  std::mt19937_64 rng(10);
  const int k = 10;
  const auto w = vmcp::mnist_weights(k);
  const SetFunction gen(SetFunctionKind::General, k);
  const SetFunction fpc(SetFunctionKind::FalsePositiveWeighted, k, w);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_probs(rng, k);
    const SetProxy vp(gen, p, {100, static_cast<std::uint64_t>(trial), false});
    const SetProxy cp(fpc, p);
    const auto u = vmcp::greedy_ratio_general(vp, cp);
    ASSERT_TRUE(u.nested());
    // Oracle: at every step evaluate each remaining class from whole-set
    // proxy differences and take the best ratio, lowest index on ties.
    LabelSet current;
    for (std::size_t j = 1; j < u.size(); ++j) {
      int best = -1;
      double best_ratio = 0.0;
      for (int c = 0; c < k; ++c) {
        if (current.contains(c)) continue;
        const double dv = vp(current.with(c)) - vp(current);
        const double dc = cp(current.with(c)) - cp(current);
        const double r = dv / dc;
        if (best < 0 || r > best_ratio + 1e-9 * std::max(1.0, std::abs(best_ratio))) {
          best = c;
          best_ratio = r;
        }
      }
      current = current.with(best);
      ASSERT_EQ(u.sets[j], current) << "trial " << trial << " step " << j;
    }
  }
}

TEST(Universe, GreedyChainsHaveNonDecreasingProxyCost) {
  std::mt19937_64 rng(12);
  const int k = 12;
  const auto w = vmcp::mnist_weights(k);
  const SetFunction tp(SetFunctionKind::TruePositive, k);
  const SetFunction fpc(SetFunctionKind::FalsePositiveWeighted, k, w);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_probs(rng, k);
    const SetProxy vp(tp, p);
    const SetProxy cp(fpc, p);
    std::vector<double> units(k);
    std::vector<double> mc(k);
    for (int j = 0; j < k; ++j) {
      units[j] = tp.unit(j);
      mc[j] = cp.marginal(j, LabelSet{});
    }
    for (const auto& u : {vmcp::greedy_prob(p), vmcp::greedy_value(p, units), vmcp::greedy_ratio_additive(p, units, mc),
                          vmcp::greedy_ratio_general(vp, cp)}) {
      ASSERT_EQ(u.size(), static_cast<std::size_t>(k + 1));
      ASSERT_TRUE(u.nested());
      for (std::size_t j = 1; j < u.size(); ++j) ASSERT_LE(cp(u.sets[j - 1]), cp(u.sets[j]));
    }
  }
}

}  // namespace
