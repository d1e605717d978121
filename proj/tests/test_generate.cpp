#include <gtest/gtest.h>

#include <random>

#include "gdraw/generate.hpp"
#include "gdraw/pipeline.hpp"

using namespace gdraw;

namespace {

std::array<std::size_t, 3> label_counts(const std::vector<Split>& labels) {
  std::array<std::size_t, 3> c{0, 0, 0};
  for (auto s : labels) ++c[int(s)];
  return c;
}

}  // namespace

TEST(Grid, TableOneExtremes) {
  const auto small = gen_grid(10, 10);
  EXPECT_EQ(small.size(), 100u);
  EXPECT_EQ(small.edge_count(), 180u);
  const auto large = gen_grid(24, 24);
  EXPECT_EQ(large.size(), 576u);
  EXPECT_EQ(large.edge_count(), 1104u);
}

TEST(Grid, TwoByTwoIsFourCycle) {
  const auto g = gen_grid(2, 2);
  EXPECT_EQ(g.edge_count(), 4u);
  for (int v = 0; v < 4; ++v) EXPECT_EQ(g.degree(v), 2);
}

TEST(Grid, EdgeCountAndDegrees) {
  for (int r = 2; r <= 9; ++r) {
    for (int c = 2; c <= 9; ++c) {
      const auto g = gen_grid(r, c);
      EXPECT_EQ(g.edge_count(), std::size_t(r * (c - 1) + c * (r - 1)));
      for (int v = 0; v < r * c; ++v) {
        EXPECT_GE(g.degree(v), 2);
        EXPECT_LE(g.degree(v), 4);
      }
      EXPECT_TRUE(validate_graph(g).empty());
    }
  }
  EXPECT_THROW(gen_grid(1, 5), Error);
}

TEST(Star, TableOneExtremes) {
  const auto a = gen_star(9);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a.edge_count(), 9u);
  const auto b = gen_star(208);
  EXPECT_EQ(b.size(), 209u);
  EXPECT_EQ(b.edge_count(), 208u);
  const auto c = gen_star(1);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.edge_count(), 1u);
  EXPECT_THROW(gen_star(0), Error);
}

TEST(Clustered, SmallSpecWithinTableOneRanges) {
  ClusteredSpec spec{20, 3.0, 2, 0.1, 10, 5};
  const auto r = gen_clustered(spec);
  EXPECT_TRUE(validate_graph(r.graph).empty());
  EXPECT_GE(r.graph.edge_count(), 23u);
  EXPECT_LE(r.graph.edge_count(), 178u);
  EXPECT_LE(r.graph.max_degree(), 10);
  const double avg = 2.0 * double(r.graph.edge_count()) / 20.0;
  EXPECT_NEAR(avg, 3.0, 0.6);
}

TEST(Clustered, ZeroMixingIsRepairedAndFlagged) {
  ClusteredSpec spec{30, 4.0, 3, 0.0, 10, 3};
  const auto r = gen_clustered(spec);
  EXPECT_TRUE(r.repaired);
  EXPECT_TRUE(is_connected(r.graph));
  // only the bridges cross communities: one per extra component at most
  const auto& comm = *r.graph.communities();
  std::size_t cross = 0;
  for (auto [u, v] : r.graph.edges()) cross += comm[u] != comm[v];
  EXPECT_GE(cross, 2u);
  EXPECT_LE(cross, 10u);
}

TEST(Clustered, BalancedCommunitiesPigeonhole) {
  ClusteredSpec spec{50, 3.0, 12, 0.3, 10, 9};
  const auto r = gen_clustered(spec);
  std::vector<int> size(12, 0);
  for (int c : *r.graph.communities()) ++size[c];
  EXPECT_EQ(*std::max_element(size.begin(), size.end()), 5);
  EXPECT_EQ(*std::min_element(size.begin(), size.end()), 4);
}

TEST(Clustered, Reproducible) {
  ClusteredSpec spec{40, 4.5, 4, 0.2, 10, 123};
  EXPECT_TRUE(gen_clustered(spec).graph == gen_clustered(spec).graph);
  auto other = spec;
  other.seed = 124;
  EXPECT_FALSE(gen_clustered(spec).graph == gen_clustered(other).graph);
}

TEST(Clustered, MixingFractionStatistics) {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    ClusteredSpec spec{35, 4.0, 4, 0.2, 10, 1000 + s};
    const auto r = gen_clustered(spec);
    const auto& comm = *r.graph.communities();
    std::size_t cross = 0;
    for (auto [u, v] : r.graph.edges()) cross += comm[u] != comm[v];
    total += double(cross) / double(r.graph.edge_count());
  }
  const double mean = total / 100.0;
  EXPECT_GE(mean, 0.1);
  EXPECT_LE(mean, 0.3);
}

TEST(Clustered, InfeasibleSpecs) {
  EXPECT_THROW(gen_clustered({20, 0.5, 2, 0.1, 10, 1}), Error);
  EXPECT_THROW(gen_clustered({20, 3.0, 2, 1.0, 10, 1}), Error);
  EXPECT_THROW(gen_clustered({20, 3.0, 1, 0.2, 10, 1}), Error);
  EXPECT_THROW(gen_clustered({20, 8.0, 2, 0.1, 5, 1}), Error);
  // 20 singleton-ish communities cannot hold 90% of the edges
  EXPECT_THROW(gen_clustered({20, 6.0, 20, 0.1, 10, 1}), Error);
}

TEST(Clustered, SampledSpecsStayInsideTableOne) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 2000; ++i) {
    const auto [spec, r, redraws] = sample_general_graph(rng);
    ASSERT_GE(spec.n, 20);
    ASSERT_LE(spec.n, 50);
    ASSERT_GE(spec.communities, 2);
    ASSERT_LE(spec.communities, 12);
    EXPECT_TRUE(validate_graph(r.graph).empty());
    EXPECT_GE(r.graph.edge_count(), 23u);
    EXPECT_LE(r.graph.edge_count(), 178u);
    EXPECT_LE(r.graph.max_degree(), 10);
  }
}

TEST(Split, GridPresetCounts) {
  const auto d = generate_preset("grid", 1);
  std::array<std::size_t, 3> c{0, 0, 0};
  for (const auto& e : d.entries) ++c[int(e.split)];
  EXPECT_EQ(c, (std::array<std::size_t, 3>{72, 24, 24}));
  EXPECT_EQ(d.entries.size(), 120u);
}

TEST(Split, StarPresetCounts) {
  const auto d = generate_preset("star", 1);
  std::array<std::size_t, 3> c{0, 0, 0};
  for (const auto& e : d.entries) ++c[int(e.split)];
  EXPECT_EQ(c, (std::array<std::size_t, 3>{120, 40, 40}));
}

TEST(Split, GeneralPresetCounts) {
  std::mt19937_64 rng(5);
  std::vector<Graph> graphs;
  graphs.reserve(32000);
  for (int i = 0; i < 32000; ++i) graphs.push_back(sample_general_graph(rng).result.graph);
  const auto s = split_dataset(graphs, {26000.0 / 32000.0, 3000.0 / 32000.0, 3000.0 / 32000.0}, 9);
  EXPECT_EQ(label_counts(s.labels), (std::array<std::size_t, 3>{26000, 3000, 3000}));
  EXPECT_EQ(s.kept.size() + s.evicted, 32000u);
}

TEST(Split, HeldOutNeverSharesHashWithTrain) {
  std::vector<Graph> graphs;
  for (int r = 2; r <= 8; ++r) {
    for (int c = 2; c <= 8; ++c) graphs.push_back(gen_grid(r, c));  // r x c and c x r are isomorphic
  }
  const auto s = split_dataset(graphs, {0.6, 0.2, 0.2}, 4);
  std::set<std::string> train;
  for (std::size_t i : s.kept) {
    if (s.labels[i] == Split::train) train.insert(wl_hash(graphs[i]));
  }
  std::size_t held = 0;
  for (std::size_t i : s.kept) {
    if (s.labels[i] != Split::train) {
      ++held;
      EXPECT_FALSE(train.count(wl_hash(graphs[i])));
    }
  }
  EXPECT_GT(s.evicted, 0u);
  EXPECT_GT(held, 0u);
}

TEST(Split, AllIsomorphicLeavesHeldOutEmptyWithWarning) {
  std::vector<Graph> graphs(10, gen_grid(3, 4));
  const auto s = split_dataset(graphs, {0.6, 0.2, 0.2}, 1);
  EXPECT_EQ(s.kept.size(), 6u);
  EXPECT_EQ(s.evicted, 4u);
  ASSERT_EQ(s.warnings.size(), 1u);
}

TEST(Split, RejectsBadFractions) {
  std::vector<Graph> graphs{gen_grid(2, 2)};
  EXPECT_THROW(split_dataset(graphs, {0.5, 0.2, 0.2}, 1), Error);
  EXPECT_THROW(split_dataset(graphs, {1.2, -0.2, 0.0}, 1), Error);
}

TEST(Split, DeterministicPerSeed) {
  const auto a = generate_preset("clustered-desk", 3, {{"count", "200"}});
  const auto b = generate_preset("clustered-desk", 3, {{"count", "200"}});
  EXPECT_TRUE(a == b);
}
