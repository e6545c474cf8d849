#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "omahgnn/error.hpp"
#include "omahgnn/hgnn.hpp"
#include "omahgnn/rng.hpp"
#include "omahgnn/verify.hpp"
#include "test_util.hpp"

using namespace omahgnn;
using testutil::random_edges;
using testutil::random_tensor;

namespace {

HgnnParams single_layer(const Tensor& w) {
  HgnnParams p;
  p.layers.push_back({w, Tensor(2 * w.cols(), 1)});
  return p;
}

}  // namespace

TEST(Aggregate, IdenticalMembersGiveThatRow) {
  const auto g = Hypergraph::from_hyperedges(2, {{0, 1}});
  const Tensor x(2, 2, std::vector<double>{0.5, -3, 0.5, -3});
  const Tensor e = aggregate_hyperedges(g, x);
  EXPECT_EQ(e(0, 0), 0.5);
  EXPECT_EQ(e(0, 1), -3.0);
}

TEST(Aggregate, MeanOfTwo) {
  const auto g = Hypergraph::from_hyperedges(2, {{0, 1}});
  EXPECT_EQ(aggregate_hyperedges(g, Tensor::column({0.0, 2.0}))[0], 1.0);
}

TEST(Aggregate, FigureOneHotMeans) {
  const auto ds = testutil::figure_dataset();
  const Tensor e = aggregate_hyperedges(ds.graph, ds.features);
  const auto edges = testutil::figure_edges();
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t c = 0; c < 7; ++c) {
      const bool member = std::find(edges[k].begin(), edges[k].end(), c) != edges[k].end();
      EXPECT_EQ(e(k, c), member ? 0.25 : 0.0);
    }
  }
}

TEST(StructuralCoefficients, DirectFormula) {
  // Node 0 has degree 2; hyperedge {0,1} has member degrees 2 and 4, so d_e = 3.
  const auto g = Hypergraph::from_hyperedges(6, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {1, 5}});
  EXPECT_EQ(ss_coefficients(g)[0], 1.0 / 6.0);
}

TEST(StructuralCoefficients, SingleHyperedge) {
  const auto g = Hypergraph::from_hyperedges(2, {{0, 1}});
  EXPECT_EQ(ss_coefficients(g), (std::vector<double>{1.0, 1.0}));
}

TEST(StructuralCoefficients, FigureNode) {
  // d = 3 for the shared node; every hyperedge has member degrees summing to 8.
  const auto s = ss_coefficients(testutil::figure_graph());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s[i], 1.0 / 6.0);
}

TEST(FeatureCoefficients, SingletonIsOne) {
  const auto g = Hypergraph::from_hyperedges(2, {{0, 1}});
  auto gen = make_stream(1, "t");
  const auto c = fs_coefficients(g, random_tensor(2, 3, gen), random_tensor(1, 3, gen), random_tensor(6, 1, gen));
  EXPECT_EQ(c, (std::vector<double>{1.0, 1.0}));
}

TEST(FeatureCoefficients, ZeroAttentionIsUniform) {
  const Hypergraph g = testutil::figure_graph();
  auto gen = make_stream(2, "t");
  const auto c = fs_coefficients(g, random_tensor(7, 3, gen), random_tensor(3, 3, gen), Tensor(6, 1));
  const HgnnStructure s(g);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_DOUBLE_EQ(c[i], 1.0 / static_cast<double>(node_degree(g, s.pair_node()[i])));
  }
}

TEST(FeatureCoefficients, SoftmaxArithmetic) {
  // Scores 0 and ln 3 for node 0's two hyperedges.
  const auto g = Hypergraph::from_hyperedges(3, {{0, 1}, {0, 2}});
  const Tensor node_hidden(3, 1);
  const Tensor edge_hidden = Tensor::column({0.0, std::log(3.0)});
  const Tensor a = Tensor::column({0.0, 1.0});
  const auto c = fs_coefficients(g, node_hidden, edge_hidden, a);
  EXPECT_NEAR(c[0], 0.25, 1e-15);
  EXPECT_NEAR(c[1], 0.75, 1e-15);
}

TEST(FeatureCoefficients, AttentionWidthChecked) {
  const Hypergraph g = testutil::figure_graph();
  EXPECT_THROW(fs_coefficients(g, Tensor(7, 2), Tensor(3, 2), Tensor(3, 1)), ContractError);
}

TEST(NodeUpdate, IsolatedNodeKeepsOwnTransform) {
  const auto g = Hypergraph::from_hyperedges(3, {{0, 1}});
  const Tensor x(3, 2, std::vector<double>{1, 2, 3, 4, -0.5, 2});
  const Tensor e = aggregate_hyperedges(g, x);
  const Tensor out = node_update(g, x, e, std::vector<double>{0.5, 0.5}, Tensor::identity(2), true);
  EXPECT_DOUBLE_EQ(out(2, 0), std::expm1(-0.5));
  EXPECT_EQ(out(2, 1), 2.0);
}

TEST(NodeUpdate, ZeroCoefficients) {
  const auto g = Hypergraph::from_hyperedges(2, {{0, 1}});
  const Tensor x(2, 2, std::vector<double>{1, -1, 3, 4});
  const Tensor out = node_update(g, x, aggregate_hyperedges(g, x), std::vector<double>{0, 0}, Tensor::identity(2), true);
  EXPECT_EQ(out(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out(0, 1), std::expm1(-1.0));
  EXPECT_EQ(out(1, 1), 4.0);
}

TEST(NodeUpdate, TwoNodeHandComputation) {
  // x_e = [0.5, 1]; s = 1 for both nodes.
  const auto g = Hypergraph::from_hyperedges(2, {{0, 1}});
  const Tensor x(2, 2, std::vector<double>{1, 0, 0, 2});
  const Tensor out = node_update(g, x, aggregate_hyperedges(g, x), ss_coefficients(g), Tensor::identity(2), false);
  EXPECT_EQ(out, Tensor(2, 2, std::vector<double>{1.5, 1.0, 0.5, 3.0}));
}

TEST(Forward, SingleLayerMatchesNodeUpdate) {
  const auto g = Hypergraph::from_hyperedges(2, {{0, 1}});
  const Tensor x(2, 2, std::vector<double>{1, 0, 0, 2});
  const HgnnStructure s(g);
  const std::vector<NodeId> ids{0, 1};
  for (Branch b : {Branch::kStructural, Branch::kFeature}) {
    EXPECT_EQ(forward(s, x, single_layer(Tensor::identity(2)), b, ids),
              Tensor(2, 2, std::vector<double>{1.5, 1.0, 0.5, 3.0}));
  }
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  const auto ds = testutil::figure_dataset();
  HgnnParams p = HgnnParams::init(7, 2, {.layers = 2, .hidden = 4}, 3);
  auto flat = p.flatten();
  std::fill(flat.begin(), flat.end(), 0.0);
  p.assign(flat);
  const HgnnStructure s(ds.graph);
  const std::vector<NodeId> ids{0, 3, 6};
  for (Branch b : {Branch::kStructural, Branch::kFeature}) {
    const Tensor logits = forward(s, ds.features, p, b, ids);
    for (double v : logits.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Forward, PermutingHyperedgesLeavesLogitsUnchanged) {
  auto gen = make_stream(4, "t");
  auto edges = random_edges(20, 15, gen);
  const Tensor x = random_tensor(20, 5, gen);
  const HgnnParams p = HgnnParams::init(5, 3, {.layers = 2, .hidden = 6}, 9);
  std::vector<NodeId> ids(20);
  std::iota(ids.begin(), ids.end(), 0);
  const HgnnStructure s1(Hypergraph::from_hyperedges(20, edges));
  std::reverse(edges.begin(), edges.end());
  std::swap(edges[0], edges[5]);
  const HgnnStructure s2(Hypergraph::from_hyperedges(20, edges));
  for (Branch b : {Branch::kStructural, Branch::kFeature}) {
    const Tensor a = forward(s1, x, p, b, ids), c = forward(s2, x, p, b, ids);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], c[i], 1e-12);
  }
}

TEST(CrossEntropy, UniformLogits) {
  const std::vector<double> z(4, 0.7);
  EXPECT_NEAR(ce_loss(z, 2), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, LargeMarginVanishes) {
  EXPECT_LT(ce_loss(std::vector<double>{60.0, 0.0, -5.0}, 0), 1e-20);
}

TEST(CrossEntropy, TwoClassScalarOracle) {
  const double oracle = std::log(1.0 + std::exp(-1.0));
  EXPECT_NEAR(ce_loss(std::vector<double>{1.0, 0.0}, 0), oracle, 1e-15);
  EXPECT_NEAR(oracle, 0.3133, 5e-5);
  Tape tape;
  const std::vector<std::uint32_t> y{0};
  Var l = per_sample_ce(tape, tape.constant(Tensor(1, 2, std::vector<double>{1.0, 0.0})), y);
  EXPECT_NEAR(tape.value(l).item(), oracle, 1e-15);
}

TEST(BranchLosses, RegularStructureWithZeroAttentionAgree) {
  // Disjoint hyperedges: every node has one hyperedge and d_e = 1, so both branches weight it by 1.
  const auto g = Hypergraph::from_hyperedges(6, {{0, 1}, {2, 3, 4}, {5}});
  auto gen = make_stream(5, "t");
  HgnnParams p = HgnnParams::init(3, 2, {.layers = 2, .hidden = 4}, 1);
  for (auto& l : p.layers) l.attention.fill(0.0);
  const std::vector<int> labels{0, 1, 0, 1, 1, 0};
  const std::vector<NodeId> ids{0, 1, 2, 3, 4, 5};
  const ForwardOutput out = branch_losses(HgnnStructure(g), random_tensor(6, 3, gen), labels, p, ids);
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_DOUBLE_EQ(out.loss_ss[i], out.loss_fs[i]);
}

TEST(BranchLosses, ZeroWeightsGiveLogC) {
  const auto ds = testutil::figure_dataset();
  HgnnParams p = HgnnParams::init(7, 2, {}, 0);
  for (auto& l : p.layers) {
    l.weight.fill(0.0);
    l.attention.fill(0.0);
  }
  const std::vector<NodeId> ids{0, 1, 2};
  const auto out = branch_losses(HgnnStructure(ds.graph), ds.features, ds.labels, p, ids);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.loss_ss[i], std::log(2.0), 1e-15);
    EXPECT_NEAR(out.loss_fs[i], std::log(2.0), 1e-15);
  }
}

TEST(BranchLosses, IrregularToyDiverges) {
  auto gen = make_stream(6, "t");
  const auto g = Hypergraph::from_hyperedges(15, random_edges(15, 12, gen));
  const HgnnParams p = HgnnParams::init(4, 3, {.layers = 2, .hidden = 8}, 2);
  std::vector<int> labels(15);
  for (std::size_t i = 0; i < 15; ++i) labels[i] = static_cast<int>(i % 3);
  std::vector<NodeId> ids(15);
  std::iota(ids.begin(), ids.end(), 0);
  const auto out = branch_losses(HgnnStructure(g), random_tensor(15, 4, gen), labels, p, ids);
  double diff = 0.0;
  for (std::size_t i = 0; i < 15; ++i) diff = std::max(diff, std::abs(out.loss_ss[i] - out.loss_fs[i]));
  EXPECT_GT(diff, 1e-3);
}

TEST(BranchLosses, LabelsChecked) {
  const auto ds = testutil::figure_dataset();
  const HgnnParams p = HgnnParams::init(7, 2, {}, 0);
  const std::vector<int> bad{0, 5, 0, 0, 0, 0, 0};
  const std::vector<NodeId> ids{1};
  EXPECT_THROW(branch_losses(HgnnStructure(ds.graph), ds.features, bad, p, ids), ContractError);
}

TEST(Params, InitIsDeterministicAndBounded) {
  const HgnnConfig cfg{.layers = 3, .hidden = 5};
  const HgnnParams a = HgnnParams::init(4, 3, cfg, 8), b = HgnnParams::init(4, 3, cfg, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, HgnnParams::init(4, 3, cfg, 9));
  ASSERT_EQ(a.layers.size(), 3u);
  EXPECT_EQ(a.layers[0].weight.rows(), 4u);
  EXPECT_EQ(a.layers[2].weight.cols(), 3u);
  EXPECT_EQ(a.layers[1].attention.rows(), 10u);
  const double limit = std::sqrt(6.0 / 9.0);
  for (double x : a.layers[0].weight.values()) EXPECT_LE(std::abs(x), limit);
  HgnnParams c = a;
  c.assign(a.flatten());
  EXPECT_EQ(c, a);
  EXPECT_THROW(c.assign(std::vector<double>(3)), ContractError);
}

// Random hypergraphs up to 50 nodes: FS coefficients are a distribution per node and
// SS coefficients equal 1/(d_i d_e) from independently counted degrees.
TEST(AttentionProperty, NormalizationOnRandomHypergraphs) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto gen = make_stream(seed, "test/attention");
    const std::size_t n = 2 + uniform_index(gen, 49);
    const auto edges = random_edges(n, 1 + uniform_index(gen, 40), gen);
    const auto g = Hypergraph::from_hyperedges(n, edges);
    const HgnnStructure s(g);
    const std::size_t width = 1 + uniform_index(gen, 4);
    const Tensor hidden = random_tensor(n, width, gen, -2.0, 2.0);
    const auto fs = fs_coefficients(g, hidden, aggregate_hyperedges(g, hidden), random_tensor(2 * width, 1, gen, -2.0, 2.0));
    std::vector<double> total(n, 0.0);
    for (std::size_t i = 0; i < fs.size(); ++i) total[s.pair_node()[i]] += fs[i];
    std::vector<std::size_t> deg(n, 0);
    for (const auto& e : edges) {
      for (NodeId v : e) ++deg[v];
    }
    for (NodeId v = 0; v < n; ++v) {
      if (deg[v] > 0) {
        EXPECT_NEAR(total[v], 1.0, 1e-9);
      }
    }
    const auto ss = ss_coefficients(g);
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const auto& members = edges[s.pair_edge()[i]];
      std::size_t sum = 0;
      for (NodeId u : members) sum += deg[u];
      const double d_e = static_cast<double>(sum) / static_cast<double>(members.size());
      EXPECT_EQ(ss[i], 1.0 / (static_cast<double>(deg[s.pair_node()[i]]) * d_e));
    }
  }
}

TEST(GradientCheck, BothBranchesWithinTolerance) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ToySpec spec;
    spec.seed = seed;
    EXPECT_LE(hgnn_gradient_check(spec, Branch::kStructural).max_rel_error, kHgnnGradTolerance);
    EXPECT_LE(hgnn_gradient_check(spec, Branch::kFeature).max_rel_error, kHgnnGradTolerance);
  }
}

TEST(GradientCheck, InjectedFaultIsCaught) {
  const auto r = hgnn_gradient_check({}, Branch::kFeature, {.inject_fault = true});
  EXPECT_GT(r.max_rel_error, kHgnnGradTolerance);
}
