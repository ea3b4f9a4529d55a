#include "doctest.h"
#include "postural/kernels.hpp"
#include "support.hpp"

using namespace postural;
using namespace postural::testing;

namespace {

kernels::Csr random_csr(std::mt19937_64& rng, std::size_t n, double p) {
  kernels::Csr g;
  g.node_count = n;
  g.offsets.push_back(0);
  std::size_t edge = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (coin(rng, p)) {
        g.targets.push_back(b);
        g.edge_ids.push_back(edge++);
      }
    }
    g.offsets.push_back(g.targets.size());
  }
  return g;
}

}  // namespace

TEST_CASE("parallel similarity matrix equals the serial reference") {
  const auto m = synonym_model(7);
  const std::vector<std::string> phrases = {"xss vulnerability", "cross site scripting flaw", "router packets",
                                            "lan interfaces", "session cookies", "unknown words"};
  std::mt19937_64 rng(5);
  std::vector<kernels::PortVectors> outs, ins;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::string> a, b;
    for (int j = 0; j < 3; ++j) {
      if (coin(rng, 0.6)) a.push_back(phrases[uniform_int(rng, 0, phrases.size() - 1)]);
      if (coin(rng, 0.6)) b.push_back(phrases[uniform_int(rng, 0, phrases.size() - 1)]);
    }
    outs.push_back(kernels::make_port_vectors(m, a));
    ins.push_back(kernels::make_port_vectors(m, b));
    CHECK(kernels::port_similarity(outs.back(), ins.back()) == port_similarity(m, a, b));
  }
  const auto serial = kernels::similarity_matrix_serial(outs, ins);
  CHECK(kernels::similarity_matrix(outs, ins) == serial);
  for (std::size_t i = 0; i < outs.size(); ++i) CHECK(serial[i * outs.size() + i] == 0.0);
}

TEST_CASE("parallel path enumeration equals the serial reference") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = uniform_int(rng, 1, 14);
    const auto g = random_csr(rng, n, 0.35);
    std::vector<char> sink(n, 0);
    for (auto& s : sink) s = coin(rng, 0.3) ? 1 : 0;
    for (std::size_t cutoff : {std::size_t{1}, std::size_t{3}, n}) {
      CHECK(kernels::enumerate_paths(g, 0, sink, cutoff) == kernels::enumerate_paths_serial(g, 0, sink, cutoff));
    }
  }
}

TEST_CASE("path enumeration on a diamond") {
  // 0 -> 1 -> 3, 0 -> 2 -> 3, 0 -> 3
  kernels::Csr g;
  g.node_count = 4;
  g.offsets = {0, 3, 4, 5, 5};
  g.targets = {1, 2, 3, 3, 3};
  g.edge_ids = {0, 1, 2, 3, 4};
  const std::vector<char> sink = {0, 0, 0, 1};
  const std::vector<std::vector<std::size_t>> all = {{0, 3}, {1, 4}, {2}};
  CHECK(kernels::enumerate_paths_serial(g, 0, sink, 8) == all);
  CHECK(kernels::enumerate_paths(g, 0, sink, 8) == all);
  CHECK(kernels::enumerate_paths(g, 0, sink, 1) == std::vector<std::vector<std::size_t>>{{2}});
}
