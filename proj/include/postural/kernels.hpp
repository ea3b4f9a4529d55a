#pragma once

#include <cstddef>
#include <vector>

#include "postural/semantics.hpp"

// Data-parallel hot loops. Each kernel has a serial reference kept for tests
// and benchmarks; the OpenMP variant must produce identical output.

namespace postural::kernels {

/// Phrase vectors of one node port, L2 norms precomputed.
struct PortVectors {
  std::vector<PhraseVector> phrases;
  std::vector<double> norms;
};

PortVectors make_port_vectors(const EmbeddingModel& model, const std::vector<std::string>& phrases);

/// Max over phrase pairs of max(0, cosine). Same arithmetic as
/// postural::port_similarity.
double port_similarity(const PortVectors& out, const PortVectors& in);

/// n x n row-major matrix, entry (a, b) = port_similarity(outs[a], ins[b]);
/// the diagonal is left at 0.
std::vector<double> similarity_matrix_serial(const std::vector<PortVectors>& outs,
                                             const std::vector<PortVectors>& ins);
std::vector<double> similarity_matrix(const std::vector<PortVectors>& outs,
                                      const std::vector<PortVectors>& ins);

/// Compressed out-adjacency of a DAG; edge ids index the caller's edge list.
struct Csr {
  std::size_t node_count = 0;
  std::vector<std::size_t> offsets;  // node_count + 1
  std::vector<std::size_t> targets;
  std::vector<std::size_t> edge_ids;
};

/// All paths from `source` ending at a node with is_sink set and using at
/// most `max_edges` edges, as edge-id sequences in depth-first order (out
/// edges visited in CSR order). Requires an acyclic graph.
std::vector<std::vector<std::size_t>> enumerate_paths_serial(const Csr& g, std::size_t source,
                                                             const std::vector<char>& is_sink,
                                                             std::size_t max_edges);

/// Same result and order; first-hop branches are explored in parallel.
std::vector<std::vector<std::size_t>> enumerate_paths(const Csr& g, std::size_t source,
                                                      const std::vector<char>& is_sink,
                                                      std::size_t max_edges);

}  // namespace postural::kernels
