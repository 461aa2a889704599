#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "compactseg/codebook.hpp"
#include "compactseg/volume.hpp"

namespace compactseg {

// Undirected class co-boundary counts: edge {a, b} (a < b) holds the number of
// face-adjacent voxel pairs labelled a and b.
class ClassAdjacencyGraph {
 public:
  using Edge = std::pair<std::uint16_t, std::uint16_t>;

  explicit ClassAdjacencyGraph(unsigned n_classes);

  unsigned n_classes() const { return n_classes_; }
  void add(unsigned a, unsigned b, std::uint64_t count = 1);
  std::uint64_t count(unsigned a, unsigned b) const;
  const std::map<Edge, std::uint64_t>& edges() const { return edges_; }
  std::size_t n_edges() const { return edges_.size(); }
  void merge(const ClassAdjacencyGraph& other);

  // Per-class neighbor lists (neighbor, count), derived from edges.
  std::vector<std::vector<std::pair<unsigned, std::uint64_t>>> neighbors() const;

  bool operator==(const ClassAdjacencyGraph&) const = default;

 private:
  unsigned n_classes_;
  std::map<Edge, std::uint64_t> edges_;
};

// 6-connected co-boundary counts summed over all volumes.
ClassAdjacencyGraph build_adjacency(std::span<const LabelVolume> volumes, unsigned n_classes, unsigned threads = 1);

enum class EdgeWeighting {
  Count,   // weight = co-boundary count
  Binary,  // weight = 1 for every present edge
};

// Sum over edges of weight * Hamming distance between the classes' data words.
std::uint64_t assignment_cost(const ClassAdjacencyGraph& graph, const Codebook& codebook,
                              EdgeWeighting weighting = EdgeWeighting::Count);

struct AssignmentResult {
  Codebook codebook;
  std::uint64_t cost = 0;
  std::uint64_t greedy_cost = 0;
  std::size_t iterations = 0;  // local-search sweeps performed
  std::size_t moves = 0;       // improving swaps/moves applied
  std::uint64_t seed = 0;
};

// Greedy placement by connectivity followed by first-improvement swap search
// (class-class swaps and moves to unused words) until a sweep finds nothing or
// max_iterations sweeps have run.
AssignmentResult optimize_assignment(const ClassAdjacencyGraph& graph, Scheme scheme, std::uint64_t seed,
                                     long max_iterations, EdgeWeighting weighting = EdgeWeighting::Count);

inline constexpr int kAdjacencyFormatVersion = 1;
std::string adjacency_to_json(const ClassAdjacencyGraph& graph);
ClassAdjacencyGraph adjacency_from_json(std::string_view text);
void save_adjacency(const ClassAdjacencyGraph& graph, const std::filesystem::path& path);
ClassAdjacencyGraph load_adjacency(const std::filesystem::path& path);

}  // namespace compactseg
