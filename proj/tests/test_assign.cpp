#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "compactseg/assign.hpp"
#include "compactseg/io.hpp"
#include "compactseg/rng.hpp"
#include "oracles.hpp"

using namespace compactseg;

namespace {

std::vector<oracle::WeightedEdge> edges_of(const ClassAdjacencyGraph& g) {
  std::vector<oracle::WeightedEdge> out;
  for (const auto& [e, c] : g.edges()) out.push_back({e.first, e.second, c});
  return out;
}

ClassAdjacencyGraph random_graph(unsigned n, double density, std::uint64_t seed) {
  Rng rng(seed);
  ClassAdjacencyGraph g(n);
  for (unsigned a = 0; a < n; ++a) {
    for (unsigned b = a + 1; b < n; ++b) {
      if (rng.bernoulli(density)) g.add(a, b, 1 + rng.below(20));
    }
  }
  return g;
}

// Independent recomputation straight from the voxel grid.
std::uint64_t brute_pair_count(const LabelVolume& v, unsigned a, unsigned b) {
  const Dims& d = v.dims();
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < d.x; ++i)
    for (std::size_t j = 0; j < d.y; ++j)
      for (std::size_t k = 0; k < d.z; ++k)
        for (std::size_t i2 = 0; i2 < d.x; ++i2)
          for (std::size_t j2 = 0; j2 < d.y; ++j2)
            for (std::size_t k2 = 0; k2 < d.z; ++k2) {
              const auto manhattan = (i > i2 ? i - i2 : i2 - i) + (j > j2 ? j - j2 : j2 - j) + (k > k2 ? k - k2 : k2 - k);
              if (manhattan != 1 || d.index(i, j, k) > d.index(i2, j2, k2)) continue;
              const unsigned x = v.at(i, j, k), y = v.at(i2, j2, k2);
              n += (x == a && y == b) || (x == b && y == a);
            }
  return n;
}

}  // namespace

TEST(Adjacency, HandCountableCases) {
  const std::vector<LabelVolume> single{LabelVolume(Dims{3, 3, 3}, 2)};
  EXPECT_EQ(build_adjacency(single, 4).n_edges(), 0u);

  const std::vector<LabelVolume> pair{LabelVolume(Dims{2, 1, 1}, std::vector<std::uint16_t>{3, 5})};
  const auto g = build_adjacency(pair, 6);
  EXPECT_EQ(g.n_edges(), 1u);
  EXPECT_EQ(g.count(3, 5), 1u);
  EXPECT_EQ(g.count(5, 3), 1u);

  LabelVolume checker(Dims{4, 4, 1});
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 4; ++i) checker.at(i, j, 0) = static_cast<std::uint16_t>((i + j) % 2);
  const std::vector<LabelVolume> cb{checker};
  EXPECT_EQ(build_adjacency(cb, 2).count(0, 1), 24u);
  EXPECT_EQ(brute_pair_count(checker, 0, 1), 24u);

  EXPECT_THROW(build_adjacency(std::span<const LabelVolume>{}, 2), std::invalid_argument);
  EXPECT_THROW(build_adjacency(pair, 5), std::invalid_argument);
}

TEST(Adjacency, MatchesBruteForceAndMergesVolumes) {
  Rng rng(5);
  std::vector<LabelVolume> vols;
  for (int n = 0; n < 3; ++n) {
    LabelVolume v(Dims{5, 4, 3});
    for (auto& l : v.labels()) l = static_cast<std::uint16_t>(rng.below(6));
    vols.push_back(v);
  }
  const auto g = build_adjacency(vols, 6);
  const auto g_par = build_adjacency(vols, 6, 3);
  EXPECT_EQ(g, g_par);
  for (unsigned a = 0; a < 6; ++a) {
    for (unsigned b = a + 1; b < 6; ++b) {
      std::uint64_t expect = 0;
      for (const auto& v : vols) expect += brute_pair_count(v, a, b);
      EXPECT_EQ(g.count(a, b), expect);
    }
  }
}

TEST(Adjacency, GraphInvariants) {
  ClassAdjacencyGraph g(4);
  EXPECT_THROW(g.add(1, 1), std::invalid_argument);
  EXPECT_THROW(g.add(1, 4), std::invalid_argument);
  g.add(2, 1, 3);
  g.add(1, 2, 2);
  EXPECT_EQ(g.count(1, 2), 5u);
  const auto file = std::filesystem::temp_directory_path() / "compactseg_adj.json";
  save_adjacency(g, file);
  EXPECT_EQ(load_adjacency(file), g);
}

TEST(AssignmentCost, SmallCases) {
  ClassAdjacencyGraph g(4);
  EXPECT_EQ(assignment_cost(g, identity_codebook(4, Scheme::Vanilla)), 0u);
  g.add(0, 1, 7);
  // words 0b01 and 0b11 differ in one bit (adjacent Gray codes)
  EXPECT_EQ(assignment_cost(g, Codebook(Scheme::Vanilla, {1, 3, 0, 2})), 7u);
  EXPECT_THROW(assignment_cost(ClassAdjacencyGraph(9), identity_codebook(8, Scheme::Vanilla)),
               std::invalid_argument);
}

TEST(AssignmentCost, MatchesIndependentSum) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(8, 0.5, seed);
    const Codebook cb = build_random_codebook(8, Scheme::Vanilla, seed + 100);
    std::uint64_t expect = 0, binary = 0;
    for (const auto& e : edges_of(g)) {
      expect += e.w * oracle::popcount(cb.word_of(e.a) ^ cb.word_of(e.b));
      binary += oracle::popcount(cb.word_of(e.a) ^ cb.word_of(e.b));
    }
    EXPECT_EQ(assignment_cost(g, cb), expect);
    EXPECT_EQ(assignment_cost(g, cb, EdgeWeighting::Binary), binary);
  }
}

// Relabelling classes by a permutation, applied to both graph and codebook,
// leaves the cost unchanged.
TEST(AssignmentCost, InvariantUnderConsistentRelabelling) {
  Rng rng(8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_graph(12, 0.4, seed);
    const Codebook cb = build_random_codebook(12, Scheme::Vanilla, seed);
    std::vector<unsigned> perm(12);
    std::iota(perm.begin(), perm.end(), 0u);
    rng.shuffle(std::span(perm));
    ClassAdjacencyGraph g2(12);
    for (const auto& [e, c] : g.edges()) g2.add(perm[e.first], perm[e.second], c);
    std::vector<std::uint32_t> words(12);
    for (unsigned c = 0; c < 12; ++c) words[perm[c]] = cb.word_of(c);
    EXPECT_EQ(assignment_cost(g2, Codebook(Scheme::Vanilla, words)), assignment_cost(g, cb));
  }
}

TEST(OptimizeAssignment, PathGraphReachesGrayCodeOptimum) {
  ClassAdjacencyGraph path(4);
  path.add(0, 1, 5);
  path.add(1, 2, 2);
  path.add(2, 3, 9);
  const auto optimum = oracle::exhaustive_assignment_optimum(4, 2, edges_of(path));
  EXPECT_EQ(optimum, 16u);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = optimize_assignment(path, Scheme::Vanilla, seed, 50);
    EXPECT_EQ(r.cost, optimum);
    EXPECT_EQ(r.cost, assignment_cost(path, r.codebook));
  }
}

TEST(OptimizeAssignment, EmptyGraphAndBudget) {
  const auto r = optimize_assignment(ClassAdjacencyGraph(5), Scheme::Hamming74, 3, 10);
  EXPECT_EQ(r.cost, 0u);
  EXPECT_EQ(r.codebook.n_classes(), 5u);
  EXPECT_EQ(r.codebook.scheme(), Scheme::Hamming74);
  EXPECT_THROW(optimize_assignment(ClassAdjacencyGraph(5), Scheme::Vanilla, 3, 0), std::invalid_argument);
}

TEST(OptimizeAssignment, DeterministicAndNeverWorseThanGreedy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_graph(30, 0.15, seed);
    const auto a = optimize_assignment(g, Scheme::Vanilla, seed, 100);
    const auto b = optimize_assignment(g, Scheme::Vanilla, seed, 100);
    EXPECT_EQ(a.codebook, b.codebook);
    EXPECT_LE(a.cost, a.greedy_cost);
    EXPECT_EQ(a.cost, assignment_cost(g, a.codebook));
    EXPECT_GE(a.iterations, 1u);
  }
}

// Exhaustive fixtures: 8 classes in 3 bits. Declared factor: 1.10 of the optimum.
TEST(OptimizeAssignment, WithinDeclaredFactorOfExhaustiveOptimum) {
  constexpr double kDeclaredFactor = 1.10;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto g = random_graph(8, 0.45, 1000 + seed);
    const auto optimum = oracle::exhaustive_assignment_optimum(8, 3, edges_of(g));
    const auto r = optimize_assignment(g, Scheme::Vanilla, seed, 100);
    EXPECT_GE(r.cost, optimum);
    EXPECT_LE(static_cast<double>(r.cost), kDeclaredFactor * static_cast<double>(optimum))
        << "seed " << seed << " cost " << r.cost << " optimum " << optimum;
  }
}

TEST(OptimizeAssignment, BinaryWeightingIgnoresCounts) {
  ClassAdjacencyGraph g(4);
  g.add(0, 1, 100);
  g.add(2, 3, 1);
  const auto r = optimize_assignment(g, Scheme::Vanilla, 1, 20, EdgeWeighting::Binary);
  EXPECT_EQ(r.cost, 2u);
  EXPECT_EQ(assignment_cost(g, r.codebook, EdgeWeighting::Binary), 2u);
}
