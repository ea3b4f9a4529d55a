#include "postural/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace postural::kernels {

PortVectors make_port_vectors(const EmbeddingModel& model, const std::vector<std::string>& phrases) {
  PortVectors pv;
  for (const auto& p : phrases) {
    auto v = phrase_vector(model, p);
    double sq = 0.0;
    for (double x : v.values) sq += x * x;
    pv.norms.push_back(sq);
    pv.phrases.push_back(std::move(v));
  }
  return pv;
}

double port_similarity(const PortVectors& out, const PortVectors& in) {
  double best = 0.0;
  for (std::size_t i = 0; i < out.phrases.size(); ++i) {
    if (out.norms[i] == 0.0) continue;
    const auto& a = out.phrases[i].values;
    for (std::size_t j = 0; j < in.phrases.size(); ++j) {
      if (in.norms[j] == 0.0) continue;
      const auto& b = in.phrases[j].values;
      double ab = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) ab += a[k] * b[k];
      const double cos = std::clamp(ab / std::sqrt(out.norms[i] * in.norms[j]), -1.0, 1.0);
      best = std::max(best, cos);
    }
  }
  return best;
}

std::vector<double> similarity_matrix_serial(const std::vector<PortVectors>& outs,
                                             const std::vector<PortVectors>& ins) {
  const std::size_t n = outs.size();
  std::vector<double> m(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) m[a * n + b] = port_similarity(outs[a], ins[b]);
    }
  }
  return m;
}

std::vector<double> similarity_matrix(const std::vector<PortVectors>& outs,
                                      const std::vector<PortVectors>& ins) {
  const auto n = static_cast<std::ptrdiff_t>(outs.size());
  std::vector<double> m(outs.size() * outs.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t a = 0; a < n; ++a) {
    for (std::ptrdiff_t b = 0; b < n; ++b) {
      if (a != b) {
        m[static_cast<std::size_t>(a * n + b)] =
            port_similarity(outs[static_cast<std::size_t>(a)], ins[static_cast<std::size_t>(b)]);
      }
    }
  }
  return m;
}

namespace {

// Iterative DFS from the head of an already-started path.
void dfs_from(const Csr& g, std::size_t node, const std::vector<char>& is_sink,
              std::size_t max_edges, std::vector<std::size_t>& prefix,
              std::vector<std::vector<std::size_t>>& out) {
  if (is_sink[node]) {
    out.push_back(prefix);
    return;
  }
  if (prefix.size() >= max_edges) return;
  struct Frame {
    std::size_t node;
    std::size_t next;
  };
  std::vector<Frame> stack{{node, g.offsets[node]}};
  const std::size_t base = prefix.size();
  while (!stack.empty()) {
    auto& f = stack.back();
    if (f.next == g.offsets[f.node + 1]) {
      stack.pop_back();
      if (prefix.size() > base) prefix.pop_back();
      continue;
    }
    const std::size_t e = f.next++;
    const std::size_t to = g.targets[e];
    prefix.push_back(g.edge_ids[e]);
    if (is_sink[to]) {
      out.push_back(prefix);
      prefix.pop_back();
    } else if (prefix.size() < max_edges) {
      stack.push_back({to, g.offsets[to]});
    } else {
      prefix.pop_back();
    }
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> enumerate_paths_serial(const Csr& g, std::size_t source,
                                                             const std::vector<char>& is_sink,
                                                             std::size_t max_edges) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> prefix;
  dfs_from(g, source, is_sink, max_edges, prefix, out);
  return out;
}

std::vector<std::vector<std::size_t>> enumerate_paths(const Csr& g, std::size_t source,
                                                      const std::vector<char>& is_sink,
                                                      std::size_t max_edges) {
  if (is_sink[source] || max_edges == 0) return enumerate_paths_serial(g, source, is_sink, max_edges);
  const std::size_t first = g.offsets[source];
  const auto branches = static_cast<std::ptrdiff_t>(g.offsets[source + 1] - first);
  std::vector<std::vector<std::vector<std::size_t>>> per_branch(static_cast<std::size_t>(branches));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t b = 0; b < branches; ++b) {
    const std::size_t e = first + static_cast<std::size_t>(b);
    std::vector<std::size_t> prefix{g.edge_ids[e]};
    dfs_from(g, g.targets[e], is_sink, max_edges, prefix, per_branch[static_cast<std::size_t>(b)]);
  }
  std::size_t total = 0;
  for (const auto& v : per_branch) total += v.size();
  std::vector<std::vector<std::size_t>> out;
  out.reserve(total);
  for (auto& v : per_branch) {
    for (auto& p : v) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace postural::kernels
