#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "xmed/grid.hpp"

using namespace xmed;

namespace {

// Brute-force edge enumeration used as the oracle for build_graph: two active
// nodes are adjacent iff their coordinates differ by 1 on exactly one axis.
std::set<std::pair<NodeIndex, NodeIndex>> enumerate_edges(
    const GridSpec& g, const ConductionMask& mask) {
  std::set<std::pair<NodeIndex, NodeIndex>> edges;
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    if (!mask.active(i)) continue;
    for (NodeIndex j = i + 1; j < g.node_count(); ++j) {
      if (!mask.active(j)) continue;
      auto ci = g.unflatten(i), cj = g.unflatten(j);
      int diff_axes = 0;
      bool adjacent = true;
      for (int k = 0; k < g.ndim(); ++k) {
        const auto d = std::abs(ci[k] - cj[k]);
        if (d == 1)
          ++diff_axes;
        else if (d != 0)
          adjacent = false;
      }
      if (adjacent && diff_axes == 1) edges.insert({i, j});
    }
  }
  return edges;
}

std::set<std::pair<NodeIndex, NodeIndex>> graph_edges(const LatticeGraph& g) {
  std::set<std::pair<NodeIndex, NodeIndex>> edges;
  for (NodeIndex i = 0; i < g.node_count; ++i) {
    for (auto e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const NodeIndex j = g.neighbor_indices[e];
      edges.insert({std::min(i, j), std::max(i, j)});
    }
  }
  return edges;
}

}  // namespace

TEST_CASE("flat_index maps row-major with last axis fastest") {
  GridSpec g33({3, 3}, 1.0);
  CHECK(g33.flat_index(std::vector<std::int64_t>{0, 0}) == 0);
  CHECK(g33.flat_index(std::vector<std::int64_t>{1, 2}) == 5);

  GridSpec g4({4, 4, 4, 4}, 1.0);
  CHECK(g4.flat_index(std::vector<std::int64_t>{1, 0, 0, 0}) == 64);

  CHECK_THROWS_AS(g33.flat_index(std::vector<std::int64_t>{3, 0}),
                  std::out_of_range);
  CHECK_THROWS_AS(g33.flat_index(std::vector<std::int64_t>{0, -1}),
                  std::out_of_range);
}

TEST_CASE("flat_index and unflatten round-trip on random coordinates") {
  GridSpec g({5, 3, 7, 4}, 0.5, {1.0, -2.0, 0.0, 3.0});
  std::mt19937 rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::int64_t> c(4);
    for (int k = 0; k < 4; ++k)
      c[k] = std::uniform_int_distribution<std::int64_t>(
          0, g.shape()[k] - 1)(rng);
    const NodeIndex idx = g.flat_index(c);
    CHECK(g.unflatten(idx) == c);
  }
  for (NodeIndex i = 0; i < g.node_count(); ++i)
    CHECK(g.flat_index(g.unflatten(i)) == i);
}

TEST_CASE("grid spec invariants are enforced") {
  CHECK_THROWS_AS(GridSpec({}, 1.0), ConfigError);
  CHECK_THROWS_AS(GridSpec({3, 1, 3}, 1.0), ConfigError);
  CHECK_THROWS_AS(GridSpec({2, 3}, 1.0), ConfigError);
  CHECK_THROWS_AS(GridSpec({3, 3}, 0.0), ConfigError);
  CHECK_THROWS_AS(GridSpec({3, 3}, 1.0, {0.0}), ConfigError);
  CHECK_NOTHROW(GridSpec({3, 3, 3}, 0.25));
}

TEST_CASE("neighbor counts match dimension") {
  SECTION("N=2 interior node has 4 neighbors") {
    GridSpec g({5, 5}, 1.0);
    auto mask = ConductionMask::all_active(g);
    auto n = neighbors(g, mask, g.flat_index(std::vector<std::int64_t>{2, 2}));
    CHECK(n.size() == 4);
  }
  SECTION("N=4 interior node has 8 neighbors") {
    GridSpec g({3, 3, 3, 3}, 1.0);
    auto mask = ConductionMask::all_active(g);
    auto n = neighbors(g, mask,
                       g.flat_index(std::vector<std::int64_t>{1, 1, 1, 1}));
    CHECK(n.size() == 8);
  }
  SECTION("N=2 corner has 2 neighbors") {
    GridSpec g({3, 3}, 1.0);
    auto mask = ConductionMask::all_active(g);
    auto n = neighbors(g, mask, 0);
    CHECK(n.size() == 2);
  }
  SECTION("inactive node is a contract violation") {
    GridSpec g({3, 3}, 1.0);
    std::vector<std::uint8_t> act(g.node_count(), 1);
    act[4] = 0;
    ConductionMask mask(g, act);
    CHECK_THROWS_AS(neighbors(g, mask, 4), ContractError);
  }
}

TEST_CASE("build_graph matches brute-force edge enumeration") {
  SECTION("3x3 all-active grid has 12 undirected edges") {
    GridSpec g({3, 3}, 1.0);
    auto mask = ConductionMask::all_active(g);
    auto graph = build_graph(g, mask);
    CHECK(graph.offsets.back() == 24);  // directed entries
    CHECK(graph_edges(graph) == enumerate_edges(g, mask));
    CHECK(graph_edges(graph).size() == 12);
    CHECK(graph.coupling_weight == 1.0);
  }
  SECTION("3^3 grid with center masked") {
    GridSpec g({3, 3, 3}, 0.5);
    std::vector<std::uint8_t> act(g.node_count(), 1);
    const NodeIndex center = g.flat_index(std::vector<std::int64_t>{1, 1, 1});
    act[center] = 0;
    ConductionMask mask(g, act);
    auto graph = build_graph(g, mask);
    CHECK(graph.offsets[center + 1] == graph.offsets[center]);  // empty row
    CHECK(graph_edges(graph) == enumerate_edges(g, mask));
    // each former neighbor of the center lost exactly one entry
    auto full = build_graph(g, ConductionMask::all_active(g));
    for (auto j : neighbors(g, ConductionMask::all_active(g), center)) {
      CHECK(graph.offsets[j + 1] - graph.offsets[j] ==
            full.offsets[j + 1] - full.offsets[j] - 1);
    }
    CHECK(graph.coupling_weight == 4.0);
  }
}

TEST_CASE("graph symmetry and degree bound on random masks") {
  GridSpec g({4, 5, 4}, 1.0);
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> act(g.node_count());
    for (auto& a : act) a = std::bernoulli_distribution(0.8)(rng) ? 1 : 0;
    act[0] = 1;  // keep at least one active
    ConductionMask mask(g, act);
    auto graph = build_graph(g, mask);
    auto edges = graph_edges(graph);
    // symmetry: j in row(i) <=> i in row(j)
    std::int64_t directed = 0;
    for (NodeIndex i = 0; i < graph.node_count; ++i)
      directed += graph.offsets[i + 1] - graph.offsets[i];
    CHECK(directed == static_cast<std::int64_t>(2 * edges.size()));
    CHECK(edges == enumerate_edges(g, mask));
    // degree bound, equality exactly for interior fully-active nodes
    for (NodeIndex i = 0; i < graph.node_count; ++i) {
      const auto deg = graph.offsets[i + 1] - graph.offsets[i];
      CHECK(deg <= 2 * g.ndim());
      if (!mask.active(i)) continue;
      auto c = g.unflatten(i);
      bool interior_all_active = true;
      for (int k = 0; k < g.ndim() && interior_all_active; ++k) {
        if (c[k] == 0 || c[k] + 1 == g.shape()[k]) interior_all_active = false;
        else {
          if (!mask.active(i - g.strides()[k]) ||
              !mask.active(i + g.strides()[k]))
            interior_all_active = false;
        }
      }
      if (interior_all_active) CHECK(deg == 2 * g.ndim());
    }
  }
}

TEST_CASE("region masks select by physical coordinate, closed boundaries") {
  SECTION("SIM3-style hypercylinder matches its defining inequality") {
    GridSpec g({7, 7, 17, 17}, 1.0);
    HypercylinderRegion cyl{2, 3, 8.0, 8.0, 5.0};
    auto m = region_mask(g, cyl);
    for (NodeIndex i = 0; i < g.node_count(); ++i) {
      auto p = g.position_mm(i);
      const double lhs = (p[2] - 8.0) / 5.0, rhs = (p[3] - 8.0) / 5.0;
      CHECK((m[i] != 0) == (lhs * lhs + rhs * rhs <= 1.0));
    }
    // boundary is closed: node at exactly radius distance included
    std::vector<std::int64_t> c{0, 0, 3, 8};  // z=3 -> (z-8)^2 = 25
    CHECK(m[g.flat_index(c)] == 1);
  }
  SECTION("ball accepts its boundary and respects the center") {
    GridSpec g({5, 5, 5, 5}, 1.0);
    BallRegion ball{{-20.0, -20.0, 31.0, 45.0}, 40.0};
    auto m = region_mask(g, ball);
    for (NodeIndex i = 0; i < g.node_count(); ++i) {
      auto p = g.position_mm(i);
      double d2 = 0;
      for (int k = 0; k < 4; ++k) {
        const double d = p[k] - ball.center[k];
        d2 += d * d;
      }
      CHECK((m[i] != 0) == (d2 <= 1600.0));
    }
  }
  SECTION("box covering whole domain is all-true") {
    GridSpec g({4, 4}, 0.5, {1.0, 1.0});
    BoxRegion box{{0.0, 0.0}, {10.0, 10.0}};
    auto m = region_mask(g, box);
    CHECK(std::count(m.begin(), m.end(), 1) == g.node_count());
  }
  SECTION("capsule contains the swept segment") {
    GridSpec g({11, 11}, 1.0);
    CapsuleRegion cap{{2.0, 2.0}, {8.0, 8.0}, 1.0};
    auto m = region_mask(g, cap);
    CHECK(m[g.flat_index(std::vector<std::int64_t>{5, 5})] == 1);
    CHECK(m[g.flat_index(std::vector<std::int64_t>{2, 2})] == 1);
    CHECK(m[g.flat_index(std::vector<std::int64_t>{10, 0})] == 0);
  }
  SECTION("invalid regions are rejected") {
    GridSpec g({4, 4}, 1.0);
    CHECK_THROWS_AS(region_mask(g, BallRegion{{0.0, 0.0}, 0.0}), ConfigError);
    CHECK_THROWS_AS(region_mask(g, BoxRegion{{1.0, 0.0}, {0.0, 1.0}}),
                    ConfigError);
    CHECK_THROWS_AS(
        region_mask(g, HypercylinderRegion{0, 0, 0.0, 0.0, 1.0}),
        ConfigError);
    CHECK_THROWS_AS(region_mask(g, BallRegion{{0.0}, 1.0}), ConfigError);
  }
}

TEST_CASE("ball mask is invariant under axis permutations fixing the center") {
  GridSpec g({6, 6, 6}, 1.0);
  BallRegion ball{{2.0, 2.0, 2.0}, 2.5};
  auto m = region_mask(g, ball);
  // permute axes (0,1,2) -> (2,0,1); center is symmetric so mask transposes
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    auto c = g.unflatten(i);
    std::vector<std::int64_t> cp{c[2], c[0], c[1]};
    CHECK(m[i] == m[g.flat_index(cp)]);
  }
}

TEST_CASE("conduction mask invariants") {
  GridSpec g({3, 3}, 1.0);
  CHECK_THROWS_AS(ConductionMask(g, std::vector<std::uint8_t>(5, 1)),
                  ConfigError);
  CHECK_THROWS_AS(
      ConductionMask(g, std::vector<std::uint8_t>(g.node_count(), 0)),
      ConfigError);
  auto all = ConductionMask::all_active(g);
  CHECK(all.all());
}
