#include "compactseg/assign.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "compactseg/io.hpp"
#include "compactseg/rng.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace compactseg {

using nlohmann::json;

ClassAdjacencyGraph::ClassAdjacencyGraph(unsigned n_classes) : n_classes_(n_classes) {
  if (n_classes == 0 || n_classes > (1u << kMaxDataBits)) throw std::invalid_argument("invalid class count");
}

void ClassAdjacencyGraph::add(unsigned a, unsigned b, std::uint64_t count) {
  if (a >= n_classes_ || b >= n_classes_) {
    throw std::invalid_argument("edge {" + std::to_string(a) + ", " + std::to_string(b) + "} outside " +
                                std::to_string(n_classes_) + " classes");
  }
  if (a == b) throw std::invalid_argument("self-loops are not allowed");
  if (count == 0) return;
  if (a > b) std::swap(a, b);
  edges_[{static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b)}] += count;
}

std::uint64_t ClassAdjacencyGraph::count(unsigned a, unsigned b) const {
  if (a > b) std::swap(a, b);
  const auto it = edges_.find({static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b)});
  return it == edges_.end() ? 0 : it->second;
}

void ClassAdjacencyGraph::merge(const ClassAdjacencyGraph& other) {
  if (other.n_classes_ != n_classes_) throw std::invalid_argument("cannot merge graphs with different class counts");
  for (const auto& [edge, c] : other.edges_) edges_[edge] += c;
}

std::vector<std::vector<std::pair<unsigned, std::uint64_t>>> ClassAdjacencyGraph::neighbors() const {
  std::vector<std::vector<std::pair<unsigned, std::uint64_t>>> out(n_classes_);
  for (const auto& [edge, c] : edges_) {
    out[edge.first].emplace_back(edge.second, c);
    out[edge.second].emplace_back(edge.first, c);
  }
  return out;
}

ClassAdjacencyGraph build_adjacency(std::span<const LabelVolume> volumes, unsigned n_classes, unsigned threads) {
  if (volumes.empty()) throw std::invalid_argument("build_adjacency needs at least one label volume");
  std::vector<ClassAdjacencyGraph> partial(volumes.size(), ClassAdjacencyGraph(n_classes));
  detail::for_each_block(
      volumes.size(), threads,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const LabelVolume& vol = volumes[i];
          const Dims& d = vol.dims();
          ClassAdjacencyGraph& g = partial[i];
          // dense counts first; the map is only touched once per class pair
          std::map<ClassAdjacencyGraph::Edge, std::uint64_t> local;
          auto visit = [&](unsigned a, unsigned b) {
            if (a >= n_classes || b >= n_classes) {
              throw std::invalid_argument("volume " + std::to_string(i) + " has a label outside " +
                                          std::to_string(n_classes) + " classes");
            }
            if (a != b) ++local[{static_cast<std::uint16_t>(std::min(a, b)), static_cast<std::uint16_t>(std::max(a, b))}];
          };
          for (std::size_t k = 0; k < d.z; ++k) {
            for (std::size_t j = 0; j < d.y; ++j) {
              for (std::size_t x = 0; x < d.x; ++x) {
                const unsigned a = vol.at(x, j, k);
                if (a >= n_classes) visit(a, a);
                if (x + 1 < d.x) visit(a, vol.at(x + 1, j, k));
                if (j + 1 < d.y) visit(a, vol.at(x, j + 1, k));
                if (k + 1 < d.z) visit(a, vol.at(x, j, k + 1));
              }
            }
          }
          for (const auto& [e, c] : local) g.add(e.first, e.second, c);
        }
      },
      1);
  ClassAdjacencyGraph graph(n_classes);
  for (const auto& g : partial) graph.merge(g);
  return graph;
}

std::uint64_t assignment_cost(const ClassAdjacencyGraph& graph, const Codebook& codebook, EdgeWeighting weighting) {
  if (codebook.n_classes() < graph.n_classes()) {
    throw std::invalid_argument("codebook covers " + std::to_string(codebook.n_classes()) + " classes, graph has " +
                                std::to_string(graph.n_classes()));
  }
  std::uint64_t cost = 0;
  for (const auto& [edge, c] : graph.edges()) {
    const std::uint64_t w = weighting == EdgeWeighting::Count ? c : 1;
    cost += w * hamming_distance(codebook.word_of(edge.first), codebook.word_of(edge.second));
  }
  return cost;
}

namespace {

class SwapSearch {
 public:
  SwapSearch(const ClassAdjacencyGraph& graph, EdgeWeighting weighting)
      : n_(graph.n_classes()), n_words_(1u << required_data_bits(std::max(graph.n_classes(), 2u))) {
    for (auto& list : graph.neighbors()) {
      auto& row = adj_.emplace_back();
      for (const auto& [nb, c] : list) row.emplace_back(nb, weighting == EdgeWeighting::Count ? std::int64_t(c) : 1);
    }
    pos_.assign(n_, -1);
    occupant_.assign(n_words_, -1);
  }

  void greedy(Rng& rng) {
    std::vector<unsigned> class_rank(n_), word_rank(n_words_);
    {
      std::vector<unsigned> perm(n_);
      std::iota(perm.begin(), perm.end(), 0u);
      rng.shuffle(std::span(perm));
      for (unsigned r = 0; r < n_; ++r) class_rank[perm[r]] = r;
      std::vector<unsigned> wperm(n_words_);
      std::iota(wperm.begin(), wperm.end(), 0u);
      rng.shuffle(std::span(wperm));
      for (unsigned r = 0; r < n_words_; ++r) word_rank[wperm[r]] = r;
    }
    std::vector<std::int64_t> degree(n_, 0);
    for (unsigned c = 0; c < n_; ++c) {
      for (const auto& [nb, w] : adj_[c]) degree[c] += w;
    }
    std::vector<unsigned> placed_neighbors(n_, 0);
    std::vector<std::int64_t> placed_weight(n_, 0);

    for (unsigned step = 0; step < n_; ++step) {
      // most placed neighbors, then heaviest placed connection, then degree
      int pick = -1;
      auto key = [&](unsigned c) {
        return std::make_tuple(placed_neighbors[c], placed_weight[c], degree[c], -static_cast<long>(class_rank[c]));
      };
      for (unsigned c = 0; c < n_; ++c) {
        if (pos_[c] >= 0) continue;
        if (pick < 0 || key(c) > key(static_cast<unsigned>(pick))) pick = static_cast<int>(c);
      }
      const auto c = static_cast<unsigned>(pick);
      int best_word = -1;
      std::int64_t best_inc = 0;
      for (unsigned w = 0; w < n_words_; ++w) {
        if (occupant_[w] >= 0) continue;
        std::int64_t inc = 0;
        for (const auto& [nb, wt] : adj_[c]) {
          if (pos_[nb] >= 0) inc += wt * hamming_distance(w, static_cast<std::uint32_t>(pos_[nb]));
        }
        if (best_word < 0 || inc < best_inc ||
            (inc == best_inc && word_rank[w] < word_rank[static_cast<unsigned>(best_word)])) {
          best_word = static_cast<int>(w);
          best_inc = inc;
        }
      }
      place(c, static_cast<unsigned>(best_word));
      for (const auto& [nb, wt] : adj_[c]) {
        ++placed_neighbors[nb];
        placed_weight[nb] += wt;
      }
    }
  }

  // One first-improvement sweep over (class, word) pairs; returns moves applied.
  std::size_t sweep(Rng& rng) {
    std::vector<unsigned> order(n_);
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(std::span(order));
    std::size_t moves = 0;
    for (const unsigned c : order) {
      for (unsigned w = 0; w < n_words_; ++w) {
        const auto from = static_cast<unsigned>(pos_[c]);
        if (w == from) continue;
        const int other = occupant_[w];
        std::int64_t delta = relocation_delta(c, from, w, other);
        if (other >= 0) delta += relocation_delta(static_cast<unsigned>(other), w, from, static_cast<int>(c));
        if (delta < 0) {
          occupant_[from] = -1;
          if (other >= 0) place(static_cast<unsigned>(other), from);
          place(c, w);
          ++moves;
        }
      }
    }
    return moves;
  }

  std::vector<std::uint32_t> assignment() const {
    std::vector<std::uint32_t> words(n_);
    for (unsigned c = 0; c < n_; ++c) words[c] = static_cast<std::uint32_t>(pos_[c]);
    return words;
  }

 private:
  void place(unsigned c, unsigned w) {
    pos_[c] = static_cast<int>(w);
    occupant_[w] = static_cast<int>(c);
  }

  // Cost change from moving c between words, ignoring its edge to `partner`
  // (whose distance to c is unchanged by a swap).
  std::int64_t relocation_delta(unsigned c, unsigned from, unsigned to, int partner) const {
    std::int64_t delta = 0;
    for (const auto& [nb, wt] : adj_[c]) {
      if (static_cast<int>(nb) == partner) continue;
      const auto at = static_cast<std::uint32_t>(pos_[nb]);
      delta += wt * (static_cast<std::int64_t>(hamming_distance(to, at)) - hamming_distance(from, at));
    }
    return delta;
  }

  unsigned n_;
  unsigned n_words_;
  std::vector<std::vector<std::pair<unsigned, std::int64_t>>> adj_;
  std::vector<int> pos_;
  std::vector<int> occupant_;
};

}  // namespace

AssignmentResult optimize_assignment(const ClassAdjacencyGraph& graph, Scheme scheme, std::uint64_t seed,
                                     long max_iterations, EdgeWeighting weighting) {
  if (max_iterations <= 0) throw std::invalid_argument("iteration budget must be positive");
  required_data_bits(graph.n_classes());
  Rng rng(seed);
  SwapSearch search(graph, weighting);
  search.greedy(rng);
  const Codebook start(scheme, search.assignment());
  AssignmentResult result{start, assignment_cost(graph, start, weighting), 0, 0, 0, seed};
  result.greedy_cost = result.cost;
  while (result.iterations < static_cast<std::size_t>(max_iterations)) {
    const std::size_t moves = search.sweep(rng);
    ++result.iterations;
    result.moves += moves;
    if (moves == 0) break;
  }
  result.codebook = Codebook(scheme, search.assignment());
  result.cost = assignment_cost(graph, result.codebook, weighting);
  return result;
}

std::string adjacency_to_json(const ClassAdjacencyGraph& graph) {
  json edges = json::array();
  for (const auto& [e, c] : graph.edges()) edges.push_back({e.first, e.second, c});
  json doc = {{"format_version", kAdjacencyFormatVersion}, {"n_classes", graph.n_classes()}, {"edges", edges}};
  return doc.dump(1) + "\n";
}

ClassAdjacencyGraph adjacency_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format_version").get<int>() != kAdjacencyFormatVersion) {
      throw std::runtime_error("adjacency: unsupported format_version");
    }
    ClassAdjacencyGraph g(doc.at("n_classes").get<unsigned>());
    for (const auto& e : doc.at("edges")) {
      g.add(e.at(0).get<unsigned>(), e.at(1).get<unsigned>(), e.at(2).get<std::uint64_t>());
    }
    return g;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("adjacency: ") + e.what());
  }
}

void save_adjacency(const ClassAdjacencyGraph& graph, const std::filesystem::path& path) {
  write_text_file(path, adjacency_to_json(graph));
}

ClassAdjacencyGraph load_adjacency(const std::filesystem::path& path) {
  return adjacency_from_json(read_text_file(path));
}

}  // namespace compactseg
