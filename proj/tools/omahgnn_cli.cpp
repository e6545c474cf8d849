// omahgnn: generate, train, eval, analyze-overlap, emit-losses, grad-check.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "omahgnn/artifact.hpp"
#include "omahgnn/config.hpp"
#include "omahgnn/error.hpp"
#include "omahgnn/partition.hpp"
#include "omahgnn/trainer.hpp"
#include "omahgnn/verify.hpp"

using namespace omahgnn;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kTraining = 4, kTolerance = 5 };

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorCode::kUnwritable, path);
  return out;
}

PredictMode parse_mode(const std::string& s) {
  if (s == "ss") return PredictMode::kStructural;
  if (s == "fs") return PredictMode::kFeature;
  if (s == "blend") return PredictMode::kBlend;
  throw ConfigError("mode must be ss, fs or blend");
}

// The artifact's dataset unless a directory is given.
Dataset dataset_for(const RunArtifact& a, const std::string& dir) {
  if (!dir.empty()) return load_dataset(dir);
  const RunConfig rc = parse_run_config(a.config);
  return materialize(rc.dataset, rc.train.seed);
}

void print_alpha(const TrainState& s) {
  std::cout << "mean alpha per task:";
  for (std::size_t k = 0; k < s.level_alpha.size(); ++k) {
    std::cout << " level" << k << "=" << fixed6(s.level_alpha[k]);
  }
  std::cout << "\n";
}

int cmd_generate(const std::string& spec_file, const std::string& out, std::uint64_t seed,
                 const std::string& bias, double bias_fraction) {
  nlohmann::json j = nlohmann::json::object();
  if (!spec_file.empty()) {
    std::ifstream in(spec_file);
    if (!in) throw ConfigError("cannot open " + spec_file);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(spec_file + ": " + e.what());
    }
  }
  if (!bias.empty()) j["bias"] = bias;
  if (bias_fraction >= 0.0) j["bias_fraction"] = bias_fraction;
  const SyntheticSpec spec = parse_synthetic(j);
  const Dataset ds = generate_synthetic(spec, seed);
  save_dataset(ds, out);
  std::cout << "wrote " << out << ": " << ds.num_nodes() << " nodes, " << ds.graph.num_hyperedges()
            << " hyperedges, " << ds.num_classes << " classes\n";
  return kOk;
}

int cmd_train(const std::string& config_file, const std::string& output) {
  RunConfig rc = load_run_config(config_file);
  if (!output.empty()) rc.output = output;
  const Dataset ds = materialize(rc.dataset, rc.train.seed);
  Trainer trainer(ds, rc.train);
  trainer.train();
  RunArtifact a;
  a.config = to_json(rc);
  a.dataset = {ds.name, ds.num_nodes(), ds.feature_dim(), ds.num_classes};
  a.state = trainer.state();
  a.accuracy = trainer.test_accuracy();
  save_run_artifact(a, rc.output);
  std::cout << "steps " << a.state.step << "\n";
  std::cout << "test accuracy ss=" << fixed6(a.accuracy.ss) << " fs=" << fixed6(a.accuracy.fs)
            << " blend=" << fixed6(a.accuracy.blend) << "\n";
  print_alpha(a.state);
  std::cout << "artifact " << rc.output.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& artifact, const std::string& dir, const std::string& mode_name) {
  const PredictMode mode = parse_mode(mode_name);
  const RunArtifact a = load_run_artifact(artifact);
  const Dataset ds = dataset_for(a, dir);
  const auto& test = ds.splits.test;
  const Prediction p = predict(a.state, ds, test, mode);
  std::vector<int> truth;
  for (NodeId v : test) truth.push_back(ds.labels[v]);
  const ClassMetrics m = classification_metrics(p.labels, truth, ds.num_classes);
  std::cout << "mode " << to_string(mode) << "\n";
  std::cout << "test accuracy " << fixed6(m.accuracy) << " (" << m.count << " nodes)\n";
  std::cout << "class precision recall\n";
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    std::cout << c << " " << fixed6(m.precision[c]) << " " << fixed6(m.recall[c]) << "\n";
  }
  return kOk;
}

int cmd_analyze(const std::string& dir, const std::string& csv, std::size_t k) {
  const Dataset ds = load_dataset(dir);
  std::vector<NodeId> all(ds.num_nodes());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<NodeId>(v);
  const OverlapVector p = overlap_vector(ds.graph, all);
  std::vector<double> defined;
  for (const auto& x : p.values)
    if (x) defined.push_back(*x);
  std::vector<double> centroids{1.0};
  if (!defined.empty()) centroids = kmeans_1d(defined, {.k = k}).centroids;

  std::vector<std::size_t> level(all.size());
  std::vector<std::size_t> per_level(centroids.size(), 0);
  std::size_t undefined = 0;
  for (std::size_t v = 0; v < all.size(); ++v) {
    level[v] = assign_level(p.values[v], centroids);
    ++per_level[level[v]];
    undefined += !p.valid(v);
  }

  std::cout << "node_id p level\n";
  for (std::size_t v = 0; v < all.size(); ++v) {
    std::cout << v << " " << (p.valid(v) ? fixed6(*p.values[v]) : std::string("undefined")) << " " << level[v]
              << "\n";
  }
  std::cout << "levels " << centroids.size() << " (requested " << k << ")\n";
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    std::cout << "level " << i << " centroid " << fixed6(centroids[i]) << " nodes " << per_level[i] << "\n";
  }
  if (undefined) std::cout << "undefined " << undefined << " (assigned level 0)\n";

  if (!csv.empty()) {
    auto out = open_csv(csv);
    out << "node_id,p,level\n";
    for (std::size_t v = 0; v < all.size(); ++v) {
      out << v << "," << (p.valid(v) ? fixed6(*p.values[v]) : std::string()) << "," << level[v] << "\n";
    }
  }
  return kOk;
}

int cmd_emit_losses(const std::string& artifact, const std::string& dir, const std::string& losses_csv,
                    const std::string& history_csv) {
  const RunArtifact a = load_run_artifact(artifact);
  const Dataset ds = dataset_for(a, dir);
  if (ds.feature_dim() != a.state.hgnn.input_dim() || ds.num_classes != a.state.hgnn.output_dim()) {
    throw DataError(DataErrorCode::kShapeMismatch, "dataset does not match the checkpoint");
  }
  const HgnnStructure s(ds.graph);
  const ForwardOutput out = branch_losses(s, ds.features, ds.labels, a.state.hgnn, a.state.train_ids);
  {
    auto f = open_csv(losses_csv);
    f << "node_id,loss_ss,loss_fs\n";
    char buf[96];
    for (std::size_t j = 0; j < a.state.train_ids.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g\n", a.state.train_ids[j], out.loss_ss[j], out.loss_fs[j]);
      f << buf;
    }
  }
  if (!history_csv.empty()) {
    auto f = open_csv(history_csv);
    f << "step,train_loss,meta_loss";
    for (std::size_t k = 0; k < a.state.mwn.num_tasks(); ++k) f << ",mean_alpha_" << k;
    f << "\n";
    char buf[64];
    for (const auto& r : a.state.history) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g", r.step, r.train_loss, r.meta_loss);
      f << buf;
      for (const auto& x : r.mean_alpha) {
        f << ",";
        if (x) {
          std::snprintf(buf, sizeof buf, "%.17g", *x);
          f << buf;
        }
      }
      f << "\n";
    }
  }
  std::cout << "wrote " << a.state.train_ids.size() << " loss rows to " << losses_csv << "\n";
  return kOk;
}

int cmd_grad_check(const ToySpec& spec, bool inject_fault) {
  CheckOptions opts;
  opts.inject_fault = inject_fault;
  const GradCheckSummary g = run_grad_check(spec, opts);
  char buf[160];
  std::snprintf(buf, sizeof buf, "hgnn ss max relative error %.3e (tolerance %.0e)\n", g.hgnn_ss, kHgnnGradTolerance);
  std::cout << buf;
  std::snprintf(buf, sizeof buf, "hgnn fs max relative error %.3e (tolerance %.0e)\n", g.hgnn_fs, kHgnnGradTolerance);
  std::cout << buf;
  std::snprintf(buf, sizeof buf, "meta-gradient max relative error %.3e (tolerance %.0e)\n", g.meta, kMetaGradTolerance);
  std::cout << buf;
  if (g.meta_max_abs == 0.0) {
    std::cout << "meta-gradient is exactly 0\n";
  } else {
    std::snprintf(buf, sizeof buf, "meta-gradient max |entry| %.3e\n", g.meta_max_abs);
    std::cout << buf;
  }
  std::cout << (g.passed ? "PASS" : "FAIL") << "\n";
  return g.passed ? kOk : kTolerance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overlap-aware meta-learned attention for hypergraph node classification"};
  app.require_subcommand(1);

  std::string spec_file, out_dir, bias;
  std::uint64_t gen_seed = 0;
  double bias_fraction = -1.0;
  auto* gen = app.add_subcommand("generate", "Write a planted synthetic dataset");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--spec", spec_file, "JSON synthetic spec (unset fields take defaults)");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--bias", bias, "none, structure-noise or feature-noise");
  gen->add_option("--bias-fraction", bias_fraction, "Fraction corrupted by the bias");

  std::string config_file, output;
  auto* train = app.add_subcommand("train", "Run the meta-training loop and write a run artifact");
  train->add_option("--config", config_file, "JSON run config")->required();
  train->add_option("--output", output, "Artifact path (overrides the config)");

  std::string artifact, dataset_dir, mode = "blend";
  auto* eval = app.add_subcommand("eval", "Test-split metrics of a run artifact");
  eval->add_option("--artifact", artifact)->required();
  eval->add_option("--dataset", dataset_dir, "Dataset directory (default: the artifact's own dataset)");
  eval->add_option("--mode", mode, "ss, fs or blend");

  std::string analyze_dir, csv;
  std::size_t k = 3;
  auto* analyze = app.add_subcommand("analyze-overlap", "Per-node overlapness and overlap levels");
  analyze->add_option("--dataset", analyze_dir)->required();
  analyze->add_option("--csv", csv, "Also write node_id,p,level");
  analyze->add_option("--k", k, "Number of levels")->check(CLI::PositiveNumber);

  std::string losses_csv, history_csv, losses_dataset, losses_artifact;
  auto* emit = app.add_subcommand("emit-losses", "Per-sample branch losses and step history as CSV");
  emit->add_option("--artifact", losses_artifact)->required();
  emit->add_option("--dataset", losses_dataset, "Dataset directory (default: the artifact's own dataset)");
  emit->add_option("--out", losses_csv, "node_id,loss_ss,loss_fs")->required();
  emit->add_option("--history", history_csv, "step,train_loss,meta_loss,mean_alpha_*");

  ToySpec toy;
  bool inject_fault = false;
  auto* gc = app.add_subcommand("grad-check", "Backward and meta-gradient against finite differences");
  gc->add_option("--nodes", toy.nodes);
  gc->add_option("--hyperedges", toy.hyperedges);
  gc->add_option("--classes", toy.classes);
  gc->add_option("--features", toy.features);
  gc->add_option("--hidden", toy.hidden);
  gc->add_option("--mwn-hidden", toy.mwn_hidden);
  gc->add_option("--k", toy.k);
  gc->add_option("--lr1", toy.lr_external, "External learning rate of the inner step");
  gc->add_option("--seed", toy.seed);
  gc->add_flag("--inject-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*gen) return cmd_generate(spec_file, out_dir, gen_seed, bias, bias_fraction);
    if (*train) return cmd_train(config_file, output);
    if (*eval) return cmd_eval(artifact, dataset_dir, mode);
    if (*analyze) return cmd_analyze(analyze_dir, csv, k);
    if (*emit) return cmd_emit_losses(losses_artifact, losses_dataset, losses_csv, history_csv);
    if (*gc) return cmd_grad_check(toy, inject_fault);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kTraining;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kTraining;
  } catch (const ContractError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IndexError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
