#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fedia/error.hpp"
#include "fedia/graph.hpp"
#include "test_support.hpp"

using namespace fedia;
using fedia::test::TempDir;
using fedia::test::write_file;

namespace {

Graph cycle4() {
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  return build_graph(4, edges, Matrix(4, 1, 1.0), {0, 1, 0, 1}, 2, {0, 0, 0, 0});
}

}  // namespace

TEST_CASE("load_domain reads the smallest symmetric graph") {
  TempDir dir;
  write_file(dir / "n.csv", "id,f0,label,domain\n0,1.5,0,3\n1,-2,1,3\n");
  write_file(dir / "e.csv", "src,dst\n0,1\n");
  const Graph g = load_domain(dir / "n.csv", dir / "e.csv");
  CHECK(g.node_count == 2);
  CHECK(g.row_offsets == std::vector<std::size_t>{0, 1, 2});
  CHECK(g.col_indices == std::vector<std::size_t>{1, 0});
  CHECK(g.features(0, 0) == 1.5);
  CHECK(g.features(1, 0) == -2.0);
  CHECK(g.num_classes == 2);
  CHECK(g.domain_id == 3);

  SUBCASE("duplicate edges are deduplicated") {
    write_file(dir / "e2.csv", "src,dst\n0,1\n0,1\n1,0\n");
    const Graph dup = load_domain(dir / "n.csv", dir / "e2.csv");
    CHECK(dup.row_offsets == g.row_offsets);
    CHECK(dup.col_indices == g.col_indices);
  }
  SUBCASE("self-loops are preserved once") {
    write_file(dir / "e3.csv", "src,dst\n0,0\n0,1\n0,0\n");
    const Graph loop = load_domain(dir / "n.csv", dir / "e3.csv");
    CHECK(loop.col_indices == std::vector<std::size_t>{0, 1, 0});
    CHECK(loop.has_edge(0, 0));
  }
}

TEST_CASE("load_domain rejects bad input") {
  TempDir dir;
  write_file(dir / "n.csv", "id,f0,label,domain\n0,1,0,0\n1,2,1,0\n2,3,0,0\n");
  SUBCASE("edge to an unknown node") {
    write_file(dir / "e.csv", "src,dst\n0,5\n");
    CHECK_THROWS_AS(load_domain(dir / "n.csv", dir / "e.csv"), ValidationError);
  }
  SUBCASE("malformed row names its line") {
    write_file(dir / "bad.csv", "id,f0,label,domain\n0,1,0,0\n1,abc,1,0\n");
    write_file(dir / "e.csv", "src,dst\n");
    try {
      load_domain(dir / "bad.csv", dir / "e.csv");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
  }
  SUBCASE("wrong field count") {
    write_file(dir / "e.csv", "src,dst\n0,1,2\n");
    CHECK_THROWS_AS(load_domain(dir / "n.csv", dir / "e.csv"), ParseError);
  }
  SUBCASE("non-dense ids") {
    write_file(dir / "gap.csv", "id,f0,label,domain\n0,1,0,0\n2,2,1,0\n");
    write_file(dir / "e.csv", "src,dst\n");
    CHECK_THROWS_AS(load_domain(dir / "gap.csv", dir / "e.csv"), ValidationError);
  }
}

TEST_CASE("save_domain round-trips through load_domain") {
  TempDir dir;
  const Graph g = test::random_graph(12, 3, 3, 0.3, 5);
  save_domain(g, dir / "n.csv", dir / "e.csv");
  const Graph back = load_domain(dir / "n.csv", dir / "e.csv", 3);
  CHECK(back.row_offsets == g.row_offsets);
  CHECK(back.col_indices == g.col_indices);
  CHECK(back.features == g.features);
  CHECK(back.labels == g.labels);
}

TEST_CASE("split_nodes sizes follow the floor rule") {
  const auto sizes = [](const Graph& g) {
    return std::array{g.count_in(Split::Train), g.count_in(Split::Val), g.count_in(Split::Test)};
  };
  const Graph ten = split_nodes(test::random_graph(10, 2, 2, 0.2, 1), {}, 7);
  CHECK(sizes(ten) == std::array<std::size_t, 3>{6, 2, 2});
  // 11 nodes: floor(2.2) = 2 for val and test, the remaining 7 go to train.
  const Graph eleven = split_nodes(test::random_graph(11, 2, 2, 0.2, 1), {}, 7);
  CHECK(sizes(eleven) == std::array<std::size_t, 3>{7, 2, 2});

  const Graph again = split_nodes(test::random_graph(10, 2, 2, 0.2, 1), {}, 7);
  CHECK(again.split == ten.split);
  const Graph other = split_nodes(test::random_graph(10, 2, 2, 0.2, 1), {}, 8);
  CHECK(sizes(other) == sizes(ten));

  CHECK_THROWS_AS(split_nodes(test::random_graph(2, 1, 2, 1.0, 1), {}, 1), ValidationError);
  CHECK_THROWS_AS(split_nodes(test::random_graph(5, 1, 2, 1.0, 1), {0.5, 0.5, 0.5}, 1),
                  ValidationError);
}

TEST_CASE("split sizes do not depend on node order") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 3 + seed * 7;
    const Graph g = test::random_graph(n, 1, 2, 0.1, seed);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed + 100);
    rng.shuffle(std::span(perm));
    const Graph a = split_nodes(g, {}, seed);
    const Graph b = split_nodes(induced_subgraph(g, perm), {}, seed);
    CHECK(a.count_in(Split::Train) == b.count_in(Split::Train));
    CHECK(a.count_in(Split::Val) == b.count_in(Split::Val));
    CHECK(a.count_in(Split::Test) == b.count_in(Split::Test));
  }
}

TEST_CASE("induced subgraph of a 4-cycle keeps one edge per half") {
  const Graph g = cycle4();
  const std::vector<std::size_t> left{0, 1};
  const std::vector<std::size_t> right{2, 3};
  const Graph a = induced_subgraph(g, left);
  const Graph b = induced_subgraph(g, right);
  // Induced edges by enumeration: {0,1} and {2,3}; the cross edges 1-2, 3-0 drop.
  CHECK(a.edge_count() == 2);  // one undirected edge stored both ways
  CHECK(b.edge_count() == 2);
  CHECK(a.has_edge(0, 1));
  CHECK(b.has_edge(0, 1));
  CHECK(b.source_ids == std::vector<std::size_t>{2, 3});
}

TEST_CASE("partition_domain is a partition into induced subgraphs") {
  const Graph g = test::random_graph(53, 2, 3, 0.15, 11);
  for (std::size_t k : {1u, 2u, 5u, 53u}) {
    const auto parts = partition_domain(g, k, 99);
    REQUIRE(parts.size() == k);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    std::size_t induced_edges = 0;
    for (const auto& p : parts) {
      validate(p);
      total += p.node_count;
      CHECK(p.node_count >= 53 / k);
      CHECK(p.node_count <= 53 / k + 1);
      for (auto id : p.source_ids) CHECK(seen.insert(id).second);
      for (std::size_t u = 0; u < p.node_count; ++u) {
        for (std::size_t v : p.neighbors(u)) {
          CHECK(g.has_edge(p.source_ids[u], p.source_ids[v]));
          ++induced_edges;
        }
      }
    }
    CHECK(total == 53);
    CHECK(induced_edges <= g.edge_count());
    if (k == 1) {
      CHECK(parts[0].col_indices == g.col_indices);
      CHECK(parts[0].features == g.features);
      CHECK(induced_edges == g.edge_count());
    }
  }
  CHECK_THROWS_AS(partition_domain(g, 54, 1), ValidationError);
  CHECK_THROWS_AS(partition_domain(g, 0, 1), ValidationError);

  const auto again = partition_domain(g, 5, 99);
  const auto first = partition_domain(g, 5, 99);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(again[i].source_ids == first[i].source_ids);
    CHECK(again[i].split == first[i].split);
  }
}

TEST_CASE("partition plans") {
  const PartitionPlan p = parse_plan("1:10:1:1:1:1@2", 5);
  CHECK(p.domain_ratios == std::vector<int>{1, 10, 1, 1, 1, 1});
  CHECK(p.clients_per_unit == 2);
  CHECK(p.total_clients() == 30);
  CHECK(parse_plan("1:5:1:1:1:1@2", 0).total_clients() == 20);
  CHECK(parse_plan("1:1:1:1:1:1@2", 0).total_clients() == 12);
  CHECK(parse_plan("3", 0).total_clients() == 3);
  CHECK_THROWS_AS(parse_plan("1:0", 0), ParseError);
  CHECK_THROWS_AS(parse_plan("1:x", 0), ParseError);
  CHECK_THROWS_AS(parse_plan("1:1@0", 0), ParseError);

  auto domains = generate_synthetic_domains(2, 40, 3, 2, 1.0, 4);
  // Merge the two domains into one multi-domain graph.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  Matrix x(80, 3);
  std::vector<int> labels;
  std::vector<int> tags;
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t v = 0; v < 40; ++v) {
      std::copy(domains[d].features.row(v).begin(), domains[d].features.row(v).end(),
                x.row(d * 40 + v).begin());
      labels.push_back(domains[d].labels[v]);
      tags.push_back(static_cast<int>(d));
      for (auto u : domains[d].neighbors(v)) edges.emplace_back(d * 40 + v, d * 40 + u);
    }
  }
  edges.emplace_back(0, 40);  // a cross-domain edge, dropped by the split
  const Graph merged = build_graph(80, edges, x, labels, 2, tags);
  const auto clients = partition_by_plan(merged, parse_plan("1:1@2", 3));
  REQUIRE(clients.size() == 4);
  CHECK(clients[0].domain_id == 0);
  CHECK(clients[3].domain_id == 1);
  std::size_t total = 0;
  for (const auto& c : clients) total += c.node_count;
  CHECK(total == 80);
  CHECK_THROWS_AS(partition_by_plan(merged, parse_plan("1:1:1", 3)), ValidationError);
}

TEST_CASE("synthetic domains") {
  const auto a = generate_synthetic_domains(2, 60, 4, 3, 2.0, 17);
  const auto b = generate_synthetic_domains(2, 60, 4, 3, 2.0, 17);
  REQUIRE(a.size() == 2);
  for (std::size_t d = 0; d < 2; ++d) {
    validate(a[d]);
    CHECK(a[d].domain_id == static_cast<int>(d));
    CHECK(a[d].features == b[d].features);
    CHECK(a[d].col_indices == b[d].col_indices);
    CHECK(a[d].labels == b[d].labels);
  }

  SUBCASE("zero skew draws every domain from one distribution") {
    // Identical class means and zero offsets: per-coordinate sample means
    // agree within 4 sigma / sqrt(n) once class composition is removed.
    const std::size_t n = 4000;
    const auto doms = generate_synthetic_domains(3, n, 5, 2, 0.0, 3);
    std::vector<std::vector<double>> means;
    for (const auto& g : doms) {
      std::vector<double> m(5, 0.0);
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < 5; ++j) m[j] += g.features(v, j);
      }
      for (double& x : m) x /= static_cast<double>(n);
      means.push_back(m);
    }
    // Feature variance is 1 (noise) plus the class-mean spread; bound it by
    // 1 + separation^2 for sigma.
    const double sigma = std::sqrt(1.0 + 1.5 * 1.5);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(std::abs(means[0][j] - means[1][j]) < 4.0 * sigma * std::sqrt(2.0 / n));
      CHECK(std::abs(means[0][j] - means[2][j]) < 4.0 * sigma * std::sqrt(2.0 / n));
    }
  }

  SUBCASE("intra-class edges dominate") {
    const auto doms = generate_synthetic_domains(1, 400, 2, 4, 0.0, 8);
    std::size_t same = 0;
    std::size_t diff = 0;
    for (std::size_t u = 0; u < 400; ++u) {
      for (auto v : doms[0].neighbors(u)) (doms[0].labels[u] == doms[0].labels[v] ? same : diff)++;
    }
    CHECK(same > 2 * diff);
  }

  SUBCASE("label histograms match the uniform prior") {
    // chi-square with 3 degrees of freedom; 11.3449 is the 0.99 quantile.
    constexpr double kCritical = 11.344866730144373;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      for (const auto& g : generate_synthetic_domains(3, 500, 2, 4, 1.0, seed)) {
        std::array<double, 4> counts{};
        for (int y : g.labels) counts[static_cast<std::size_t>(y)] += 1.0;
        double stat = 0.0;
        for (double c : counts) stat += (c - 125.0) * (c - 125.0) / 125.0;
        CHECK(stat < kCritical);
      }
    }
  }

  CHECK_THROWS_AS(generate_synthetic_domains(0, 10, 2, 2, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(generate_synthetic_domains(1, 10, 2, 2, -1.0, 1), ValidationError);
}
