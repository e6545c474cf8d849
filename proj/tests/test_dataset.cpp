#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "omahgnn/error.hpp"
#include "omahgnn/dataset.hpp"
#include "test_util.hpp"

using namespace omahgnn;
using testutil::TempDir;
using testutil::write_file;

namespace {

DataErrorCode load_error(const std::filesystem::path& dir) {
  try {
    load_dataset(dir);
  } catch (const DataError& e) {
    return e.code();
  }
  ADD_FAILURE() << "load succeeded";
  return DataErrorCode::kMalformed;
}

// A valid four-file dataset; individual files are then broken per test.
void write_small(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "hyperedges.txt", "0 1 2 3\n0 3 4 5\n0 5 6 1\n");
  write_file(dir / "features.csv", "1,0\n0,1\n1,1\n0.5,0\n0,0.5\n2,2\n-1,0\n");
  write_file(dir / "labels.csv", "0,0\n1,1\n2,0\n3,1\n4,0\n5,1\n6,0\n");
  write_file(dir / "splits.json", R"({"train": [0, 1, 2], "meta": [3, 4], "test": [5, 6]})");
}

}  // namespace

TEST(LoadDataset, FigureFileGivesTwelveSevenths) {
  TempDir tmp("figure");
  write_small(tmp.path());
  const Dataset ds = load_dataset(tmp.path());
  EXPECT_EQ(ds.num_nodes(), 7u);
  EXPECT_EQ(ds.feature_dim(), 2u);
  EXPECT_EQ(ds.num_classes, 2u);
  EXPECT_NEAR(*overlapness(ds.graph, 0), 12.0 / 7.0, 1e-12);
}

TEST(LoadDataset, RoundTrip) {
  TempDir tmp("roundtrip");
  const Dataset ds = generate_synthetic({}, 3);
  save_dataset(ds, tmp / "a");
  const Dataset back = load_dataset(tmp / "a");
  EXPECT_TRUE(same_content(ds, back));
  EXPECT_EQ(back.features, ds.features);
  save_dataset(back, tmp / "b");
  for (const char* f : {"hyperedges.txt", "features.csv", "labels.csv", "splits.json"}) {
    EXPECT_EQ(testutil::read_file(tmp / "a" / f), testutil::read_file(tmp / "b" / f)) << f;
  }
}

TEST(LoadDataset, RoundTripProperty) {
  TempDir tmp("roundtrip-prop");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.num_nodes = 20 + 13 * seed;
    spec.num_classes = 2 + seed % 3;
    spec.num_hyperedges = 5 + 7 * seed;
    spec.feature_dim = spec.num_classes + seed % 4;
    spec.bias = static_cast<BiasInjection>(seed % 3);
    spec.bias_fraction = 0.3;
    const Dataset ds = generate_synthetic(spec, seed);
    const auto dir = tmp / std::to_string(seed);
    save_dataset(ds, dir);
    EXPECT_TRUE(same_content(ds, load_dataset(dir))) << seed;
  }
}

TEST(LoadDataset, BlankLinesAreSkippedAndRecorded) {
  TempDir tmp("blank");
  write_small(tmp.path());
  write_file(tmp / "hyperedges.txt", "0 1 2 3\n\n0 3 4 5\n   \n0 5 6 1\n");
  const Dataset ds = load_dataset(tmp.path());
  EXPECT_EQ(ds.graph.num_hyperedges(), 3u);
  EXPECT_EQ(ds.hyperedge_lines, (std::vector<std::size_t>{0, 2, 4}));
}

TEST(LoadDataset, UnlabeledNodesAreAllowedOutsideSplits) {
  TempDir tmp("unlabeled");
  write_small(tmp.path());
  write_file(tmp / "labels.csv", "0,0\n1,1\n2,0\n3,1\n4,0\n5,1\n6,0\n");
  write_file(tmp / "features.csv", "1,0\n0,1\n1,1\n0.5,0\n0,0.5\n2,2\n-1,0\n3,3\n");
  const Dataset ds = load_dataset(tmp.path());
  EXPECT_EQ(ds.num_nodes(), 8u);
  EXPECT_FALSE(ds.is_labeled(7));
}

TEST(LoadDataset, ErrorCodes) {
  TempDir tmp("errors");
  auto fresh = [&](const std::string& name) {
    const auto dir = tmp / name;
    write_small(dir);
    return dir;
  };
  {
    const auto d = fresh("missing");
    std::filesystem::remove(d / "labels.csv");
    EXPECT_EQ(load_error(d), DataErrorCode::kMissingFile);
  }
  {
    const auto d = fresh("ragged");
    write_file(d / "features.csv", "1,0\n0,1,3\n1,1\n0.5,0\n0,0.5\n2,2\n-1,0\n");
    EXPECT_EQ(load_error(d), DataErrorCode::kRaggedFeatures);
  }
  {
    const auto d = fresh("overlap");
    write_file(d / "splits.json", R"({"train": [0, 1, 2], "meta": [2, 4], "test": [5, 6]})");
    EXPECT_EQ(load_error(d), DataErrorCode::kSplitOverlap);
  }
  {
    const auto d = fresh("label");
    write_file(d / "labels.csv", "0,0\n1,-1\n2,0\n3,1\n4,0\n5,1\n6,0\n");
    EXPECT_EQ(load_error(d), DataErrorCode::kLabelOutOfRange);
  }
  {
    const auto d = fresh("node");
    write_file(d / "hyperedges.txt", "0 1 2 9\n");
    EXPECT_EQ(load_error(d), DataErrorCode::kNodeOutOfRange);
  }
  {
    const auto d = fresh("duplicate");
    write_file(d / "hyperedges.txt", "0 1 1\n");
    EXPECT_EQ(load_error(d), DataErrorCode::kDuplicateMembership);
  }
  {
    const auto d = fresh("unlabeled-split");
    write_file(d / "labels.csv", "0,0\n1,1\n2,0\n3,1\n4,0\n5,1\n");
    EXPECT_EQ(load_error(d), DataErrorCode::kUnlabeledSplitNode);
  }
  {
    const auto d = fresh("json");
    write_file(d / "splits.json", R"({"train": [0, 1, 2], "meta": [3, 4]})");
    EXPECT_EQ(load_error(d), DataErrorCode::kMalformed);
  }
  {
    const auto d = fresh("number");
    write_file(d / "features.csv", "1,0\n0,x\n1,1\n0.5,0\n0,0.5\n2,2\n-1,0\n");
    EXPECT_EQ(load_error(d), DataErrorCode::kMalformed);
  }
}

TEST(SaveDataset, UnwritablePath) {
  TempDir tmp("unwritable");
  write_file(tmp / "file", "x");
  try {
    save_dataset(generate_synthetic({.num_nodes = 10, .num_hyperedges = 4}, 0), tmp / "file" / "sub");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.code(), DataErrorCode::kUnwritable);
  }
}

TEST(Synthetic, SameSeedSameDataset) {
  const SyntheticSpec spec;
  EXPECT_TRUE(same_content(generate_synthetic(spec, 7), generate_synthetic(spec, 7)));
  EXPECT_FALSE(same_content(generate_synthetic(spec, 7), generate_synthetic(spec, 8)));
}

TEST(Synthetic, ShapesAndSplits) {
  const Dataset ds = generate_synthetic({}, 0);
  EXPECT_EQ(ds.num_nodes(), 200u);
  EXPECT_EQ(ds.graph.num_hyperedges(), 150u);
  EXPECT_EQ(ds.num_classes, 3u);
  EXPECT_EQ(ds.feature_dim(), 16u);
  EXPECT_EQ(ds.splits.train.size(), 40u);
  EXPECT_EQ(ds.splits.meta.size(), 40u);
  EXPECT_EQ(ds.splits.test.size(), 120u);
  std::set<NodeId> all;
  for (const auto* s : {&ds.splits.train, &ds.splits.meta, &ds.splits.test}) {
    EXPECT_TRUE(std::is_sorted(s->begin(), s->end()));
    all.insert(s->begin(), s->end());
  }
  EXPECT_EQ(all.size(), 200u);
  for (EdgeId e = 0; e < ds.graph.num_hyperedges(); ++e) {
    EXPECT_GE(ds.graph.members(e).size(), 2u);
    EXPECT_LE(ds.graph.members(e).size(), 6u);
  }
}

TEST(Synthetic, NoiselessFeaturesSeparateClasses) {
  const Dataset ds = generate_synthetic({.homophily = 1.0, .feature_noise = 0.0}, 4);
  // Zero-hidden-layer classifier: the class is the argmax over the first C coordinates.
  std::size_t correct = 0;
  for (NodeId v : ds.splits.train) {
    const auto row = ds.features.row(v);
    const auto best = std::max_element(row.begin(), row.begin() + static_cast<long>(ds.num_classes)) - row.begin();
    correct += best == ds.labels[v];
  }
  EXPECT_EQ(correct, ds.splits.train.size());
}

TEST(Synthetic, FullHomophilyGivesPureHyperedges) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_EQ(impure_hyperedge_fraction(generate_synthetic({.homophily = 1.0}, seed)), 0.0);
  }
}

TEST(Synthetic, StructureNoiseRaisesImpurity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double clean = impure_hyperedge_fraction(generate_synthetic({}, seed));
    SyntheticSpec biased;
    biased.bias = BiasInjection::kStructureNoise;
    biased.bias_fraction = 0.5;
    EXPECT_GT(impure_hyperedge_fraction(generate_synthetic(biased, seed)), clean) << seed;
  }
}

TEST(Synthetic, BiasOnlyTouchesItsComponent) {
  const Dataset clean = generate_synthetic({}, 2);
  SyntheticSpec s;
  s.bias = BiasInjection::kStructureNoise;
  s.bias_fraction = 0.5;
  const Dataset rewired = generate_synthetic(s, 2);
  EXPECT_EQ(rewired.features, clean.features);
  EXPECT_EQ(rewired.labels, clean.labels);
  EXPECT_EQ(rewired.splits, clean.splits);
  EXPECT_NE(rewired.graph, clean.graph);

  s.bias = BiasInjection::kFeatureNoise;
  s.bias_fraction = 0.25;
  const Dataset noisy = generate_synthetic(s, 2);
  EXPECT_EQ(noisy.graph, clean.graph);
  std::size_t changed = 0;
  for (std::size_t v = 0; v < 200; ++v) {
    const auto a = noisy.features.row(v), b = clean.features.row(v);
    changed += !std::equal(a.begin(), a.end(), b.begin());
  }
  // Each row is replaced independently with probability 0.25: 50 expected, sd about 6.
  EXPECT_GT(changed, 25u);
  EXPECT_LT(changed, 75u);
}

TEST(Synthetic, InfeasibleSpecs) {
  EXPECT_THROW(generate_synthetic({.num_nodes = 4, .num_classes = 2, .num_hyperedges = 3, .min_size = 2, .max_size = 6}, 0),
               ContractError);
  EXPECT_THROW(generate_synthetic({.homophily = 1.5}, 0), ContractError);
  EXPECT_THROW(generate_synthetic({.feature_dim = 2}, 0), ContractError);
  EXPECT_THROW(generate_synthetic({.train_fraction = 0.7, .meta_fraction = 0.2, .test_fraction = 0.6}, 0), ContractError);
}
