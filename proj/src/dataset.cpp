#include "omahgnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "json.hpp"

#include "omahgnn/error.hpp"
#include "omahgnn/rng.hpp"

namespace omahgnn {

namespace fs = std::filesystem;

const char* to_string(DataErrorCode code) {
  switch (code) {
    case DataErrorCode::kMissingFile: return "missing file";
    case DataErrorCode::kMalformed: return "malformed input";
    case DataErrorCode::kRaggedFeatures: return "ragged feature rows";
    case DataErrorCode::kSplitOverlap: return "split overlap";
    case DataErrorCode::kLabelOutOfRange: return "label out of range";
    case DataErrorCode::kNodeOutOfRange: return "node out of range";
    case DataErrorCode::kDuplicateMembership: return "duplicate membership";
    case DataErrorCode::kEmptyHyperedge: return "empty hyperedge";
    case DataErrorCode::kUnlabeledSplitNode: return "unlabeled split node";
    case DataErrorCode::kShapeMismatch: return "shape mismatch";
    case DataErrorCode::kUnwritable: return "unwritable path";
  }
  return "data error";
}

const char* to_string(BiasInjection b) {
  switch (b) {
    case BiasInjection::kNone: return "none";
    case BiasInjection::kStructureNoise: return "structure-noise";
    case BiasInjection::kFeatureNoise: return "feature-noise";
  }
  return "none";
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(std::string_view token, const fs::path& file, std::size_t line) {
  const std::string t = trim(token);
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw DataError(DataErrorCode::kMalformed, file.filename().string() + " line " +
                                                   std::to_string(line + 1) + ": cannot parse '" +
                                                   t + "'");
  }
  return value;
}

std::ifstream open_input(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError(DataErrorCode::kMissingFile, file.string());
  return in;
}

std::ofstream open_output(const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorCode::kUnwritable, file.string());
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_splits(const Dataset& ds) {
  std::vector<int> owner(ds.num_nodes(), -1);
  const std::vector<NodeId>* lists[] = {&ds.splits.train, &ds.splits.meta, &ds.splits.test};
  for (int s = 0; s < 3; ++s) {
    for (NodeId v : *lists[s]) {
      if (v >= ds.num_nodes()) {
        throw DataError(DataErrorCode::kNodeOutOfRange,
                        "split references node " + std::to_string(v));
      }
      if (owner[v] != -1) {
        throw DataError(DataErrorCode::kSplitOverlap,
                        "node " + std::to_string(v) + " appears in more than one split entry");
      }
      owner[v] = s;
      if (!ds.is_labeled(v)) {
        throw DataError(DataErrorCode::kUnlabeledSplitNode,
                        "split node " + std::to_string(v) + " has no label");
      }
    }
  }
}

}  // namespace

void validate(const Dataset& ds) {
  if (ds.graph.num_nodes() != ds.num_nodes()) {
    throw DataError(DataErrorCode::kShapeMismatch, "hypergraph and feature rows disagree");
  }
  if (ds.labels.size() != ds.num_nodes()) {
    throw DataError(DataErrorCode::kShapeMismatch, "one label slot per node required");
  }
  for (int y : ds.labels) {
    if (y != kUnlabeled && (y < 0 || static_cast<std::size_t>(y) >= ds.num_classes)) {
      throw DataError(DataErrorCode::kLabelOutOfRange, "class " + std::to_string(y));
    }
  }
  if (!ds.features.all_finite()) {
    throw DataError(DataErrorCode::kMalformed, "features contain NaN or Inf");
  }
  check_splits(ds);
}

bool same_content(const Dataset& a, const Dataset& b) {
  return a.graph == b.graph && a.features == b.features && a.labels == b.labels &&
         a.num_classes == b.num_classes && a.splits == b.splits;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();

  // Features first: they fix the node count.
  {
    const fs::path file = dir / "features.csv";
    auto in = open_input(file);
    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::string line;
    for (std::size_t ln = 0; std::getline(in, line); ++ln) {
      if (trim(line).empty()) continue;
      std::size_t n = 0;
      std::string_view rest(line);
      while (true) {
        const auto comma = rest.find(',');
        data.push_back(parse_number<double>(rest.substr(0, comma), file, ln));
        ++n;
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (rows == 0) {
        cols = n;
      } else if (n != cols) {
        throw DataError(DataErrorCode::kRaggedFeatures, "features.csv line " + std::to_string(ln + 1) +
                                                            " has " + std::to_string(n) +
                                                            " values, expected " + std::to_string(cols));
      }
      ++rows;
    }
    ds.features = Tensor(rows, cols, std::move(data));
  }
  const std::size_t n = ds.features.rows();

  {
    const fs::path file = dir / "hyperedges.txt";
    auto in = open_input(file);
    std::vector<std::vector<NodeId>> edges;
    std::string line;
    for (std::size_t ln = 0; std::getline(in, line); ++ln) {
      std::istringstream tokens(line);
      std::vector<NodeId> members;
      std::string tok;
      while (tokens >> tok) {
        const auto id = parse_number<long long>(tok, file, ln);
        if (id < 0 || static_cast<std::size_t>(id) >= n) {
          throw DataError(DataErrorCode::kNodeOutOfRange, "hyperedges.txt line " + std::to_string(ln + 1) +
                                                              ": node " + std::to_string(id));
        }
        members.push_back(static_cast<NodeId>(id));
      }
      if (members.empty()) continue;
      edges.push_back(std::move(members));
      ds.hyperedge_lines.push_back(ln);
    }
    ds.graph = Hypergraph::from_hyperedges(n, std::move(edges));
  }

  {
    const fs::path file = dir / "labels.csv";
    auto in = open_input(file);
    ds.labels.assign(n, kUnlabeled);
    std::string line;
    int max_class = -1;
    for (std::size_t ln = 0; std::getline(in, line); ++ln) {
      if (trim(line).empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw DataError(DataErrorCode::kMalformed, "labels.csv line " + std::to_string(ln + 1));
      }
      const auto node = parse_number<long long>(std::string_view(line).substr(0, comma), file, ln);
      const auto cls = parse_number<long long>(std::string_view(line).substr(comma + 1), file, ln);
      if (node < 0 || static_cast<std::size_t>(node) >= n) {
        throw DataError(DataErrorCode::kNodeOutOfRange, "labels.csv node " + std::to_string(node));
      }
      if (cls < 0 || cls > 1'000'000) {
        throw DataError(DataErrorCode::kLabelOutOfRange, "labels.csv class " + std::to_string(cls));
      }
      if (ds.labels[node] != kUnlabeled) {
        throw DataError(DataErrorCode::kMalformed, "labels.csv labels node " + std::to_string(node) + " twice");
      }
      ds.labels[node] = static_cast<int>(cls);
      max_class = std::max(max_class, static_cast<int>(cls));
    }
    ds.num_classes = static_cast<std::size_t>(max_class + 1);
  }

  {
    const fs::path file = dir / "splits.json";
    auto in = open_input(file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(DataErrorCode::kMalformed, "splits.json: " + std::string(e.what()));
    }
    auto read = [&](const char* key) {
      std::vector<NodeId> out;
      if (!j.is_object() || !j.contains(key) || !j[key].is_array()) {
        throw DataError(DataErrorCode::kMalformed, std::string("splits.json: missing array '") + key + "'");
      }
      for (const auto& v : j[key]) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
          throw DataError(DataErrorCode::kMalformed, std::string("splits.json: bad id in '") + key + "'");
        }
        out.push_back(v.get<NodeId>());
      }
      return out;
    };
    ds.splits = {read("train"), read("meta"), read("test")};
  }

  validate(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  validate(ds);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorCode::kUnwritable, dir.string() + ": " + ec.message());

  {
    auto out = open_output(dir / "hyperedges.txt");
    for (EdgeId e = 0; e < ds.graph.num_hyperedges(); ++e) {
      auto m = ds.graph.members(e);
      for (std::size_t k = 0; k < m.size(); ++k) out << (k ? " " : "") << m[k];
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "features.csv");
    for (std::size_t r = 0; r < ds.features.rows(); ++r) {
      auto row = ds.features.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "labels.csv");
    for (std::size_t v = 0; v < ds.labels.size(); ++v) {
      if (ds.labels[v] != kUnlabeled) out << v << ',' << ds.labels[v] << '\n';
    }
  }
  {
    auto out = open_output(dir / "splits.json");
    nlohmann::json j = {{"train", ds.splits.train}, {"meta", ds.splits.meta}, {"test", ds.splits.test}};
    out << j.dump() << '\n';
  }
}

void check_synthetic(const SyntheticSpec& spec) {
  const std::size_t n = spec.num_nodes;
  const std::size_t c = spec.num_classes;
  if (n == 0 || c == 0 || c > n) throw ContractError("synthetic: need 1 <= classes <= nodes");
  if (spec.min_size == 0 || spec.min_size > spec.max_size || spec.max_size > n) {
    throw ContractError("synthetic: hyperedge size range must satisfy 1 <= min <= max <= nodes");
  }
  if (spec.feature_dim < c) throw ContractError("synthetic: feature_dim must be at least the class count");
  if (spec.homophily < 0.0 || spec.homophily > 1.0) throw ContractError("synthetic: homophily must lie in [0, 1]");
  if (spec.feature_noise < 0.0) throw ContractError("synthetic: feature_noise must be nonnegative");
  if (spec.bias_fraction < 0.0 || spec.bias_fraction > 1.0) {
    throw ContractError("synthetic: bias_fraction must lie in [0, 1]");
  }
  const double fsum = spec.train_fraction + spec.meta_fraction + spec.test_fraction;
  if (spec.train_fraction < 0.0 || spec.meta_fraction < 0.0 || spec.test_fraction < 0.0 ||
      fsum > 1.0 + 1e-12) {
    throw ContractError("synthetic: split fractions must be nonnegative and sum to at most 1");
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  check_synthetic(spec);
  const std::size_t n = spec.num_nodes;
  const std::size_t c = spec.num_classes;

  Dataset ds;
  ds.name = "synthetic";
  ds.num_classes = c;

  auto gen_class = make_stream(seed, "synth/classes");
  ds.labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) ds.labels[v] = static_cast<int>(v % c);
  shuffle(ds.labels, gen_class);
  std::vector<std::vector<NodeId>> pools(c);
  for (std::size_t v = 0; v < n; ++v) pools[ds.labels[v]].push_back(static_cast<NodeId>(v));

  auto gen_edges = make_stream(seed, "synth/structure");
  std::vector<std::vector<NodeId>> edges(spec.num_hyperedges);
  for (auto& members : edges) {
    const std::size_t anchor = uniform_index(gen_edges, c);
    const std::size_t size = spec.min_size + uniform_index(gen_edges, spec.max_size - spec.min_size + 1);
    std::set<NodeId> chosen;
    std::size_t attempts = 0;
    while (chosen.size() < size) {
      NodeId v;
      if (attempts++ > 64 * size) {
        // Anchor pool exhausted; fill uniformly from the remaining nodes.
        std::vector<NodeId> rest;
        for (NodeId u = 0; u < n; ++u)
          if (!chosen.count(u)) rest.push_back(u);
        v = rest[uniform_index(gen_edges, rest.size())];
      } else if (uniform(gen_edges, 0.0, 1.0) < spec.homophily) {
        v = pools[anchor][uniform_index(gen_edges, pools[anchor].size())];
      } else {
        v = static_cast<NodeId>(uniform_index(gen_edges, n));
      }
      chosen.insert(v);
    }
    members.assign(chosen.begin(), chosen.end());
  }

  if (spec.bias == BiasInjection::kStructureNoise) {
    auto gen_rewire = make_stream(seed, "synth/rewire");
    for (auto& members : edges) {
      for (auto& slot : members) {
        if (uniform(gen_rewire, 0.0, 1.0) >= spec.bias_fraction) continue;
        if (members.size() >= n) break;
        NodeId v;
        do {
          v = static_cast<NodeId>(uniform_index(gen_rewire, n));
        } while (std::find(members.begin(), members.end(), v) != members.end() && v != slot);
        slot = v;
      }
    }
  }
  ds.graph = Hypergraph::from_hyperedges(n, std::move(edges));
  ds.hyperedge_lines.resize(ds.graph.num_hyperedges());
  for (std::size_t e = 0; e < ds.hyperedge_lines.size(); ++e) ds.hyperedge_lines[e] = e;

  auto gen_feat = make_stream(seed, "synth/features");
  ds.features = Tensor(n, spec.feature_dim);
  for (std::size_t v = 0; v < n; ++v) {
    auto row = ds.features.row(v);
    for (auto& x : row) x = spec.feature_noise * standard_normal(gen_feat);
    row[ds.labels[v]] += spec.signal;
  }
  if (spec.bias == BiasInjection::kFeatureNoise) {
    auto gen_corrupt = make_stream(seed, "synth/corrupt");
    for (std::size_t v = 0; v < n; ++v) {
      if (uniform(gen_corrupt, 0.0, 1.0) >= spec.bias_fraction) continue;
      for (auto& x : ds.features.row(v)) x = spec.signal * standard_normal(gen_corrupt);
    }
  }

  auto gen_split = make_stream(seed, "synth/splits");
  std::vector<NodeId> order(n);
  for (std::size_t v = 0; v < n; ++v) order[v] = static_cast<NodeId>(v);
  shuffle(order, gen_split);
  const auto count = [n](double f) {
    return static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
  };
  const std::size_t n_train = std::min(n, count(spec.train_fraction));
  const std::size_t n_meta = std::min(n - n_train, count(spec.meta_fraction));
  const std::size_t n_test = std::min(n - n_train - n_meta, count(spec.test_fraction));
  auto it = order.begin();
  ds.splits.train.assign(it, it + n_train);
  it += n_train;
  ds.splits.meta.assign(it, it + n_meta);
  it += n_meta;
  ds.splits.test.assign(it, it + n_test);
  for (auto* s : {&ds.splits.train, &ds.splits.meta, &ds.splits.test}) std::sort(s->begin(), s->end());

  validate(ds);
  return ds;
}

double impure_hyperedge_fraction(const Dataset& ds) {
  if (ds.graph.num_hyperedges() == 0) return 0.0;
  std::size_t impure = 0;
  for (EdgeId e = 0; e < ds.graph.num_hyperedges(); ++e) {
    int seen = kUnlabeled;
    bool mixed = false;
    for (NodeId v : ds.graph.members(e)) {
      const int y = ds.labels[v];
      if (y == kUnlabeled) continue;
      if (seen == kUnlabeled) {
        seen = y;
      } else if (y != seen) {
        mixed = true;
      }
    }
    impure += mixed;
  }
  return static_cast<double>(impure) / static_cast<double>(ds.graph.num_hyperedges());
}

}  // namespace omahgnn
