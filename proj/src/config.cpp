#include "omahgnn/config.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>

#include "omahgnn/error.hpp"

namespace omahgnn {

using nlohmann::json;

namespace {

// Reads the fields of one JSON object and rejects whatever was not read.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const char* key, std::uint64_t& out) {
    if (const json* v = child(key)) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<long long>() < 0)) {
        fail(key, "a nonnegative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = child(key)) {
      if (!v->is_number() || !std::isfinite(v->get<double>())) fail(key, "a finite number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = child(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = child(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }

  template <typename Enum, std::size_t N>
  void read_enum(const char* key, Enum& out, const Enum (&options)[N]) {
    std::string name = to_string(out);
    read(key, name);
    for (Enum e : options) {
      if (name == to_string(e)) {
        out = e;
        return;
      }
    }
    std::string allowed;
    for (Enum e : options) allowed += std::string(allowed.empty() ? "" : ", ") + to_string(e);
    fail(key, "one of " + allowed);
  }

  void require(bool ok, const char* key, const std::string& what) const {
    if (!ok) fail(key, what);
  }

  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + path(it.key().c_str()) + "'");
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError("'" + path(key) + "' must be " + what);
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ScheduleSpec parse_schedule(const json& j, const std::string& where, ScheduleSpec s) {
  Fields f(j, where);
  f.read_enum("kind", s.kind, {ScheduleKind::kConstant, ScheduleKind::kInverseSqrt});
  f.read("c", s.base);
  f.read("m_hat", s.m_hat);
  f.require(s.base >= 0.0, "c", "nonnegative");
  f.require(s.m_hat > 0.0, "m_hat", "positive");
  f.finish();
  return s;
}

json schedule_json(const ScheduleSpec& s) {
  return {{"kind", to_string(s.kind)}, {"c", s.base}, {"m_hat", s.m_hat}};
}

}  // namespace

SyntheticSpec parse_synthetic(const json& j) {
  SyntheticSpec s;
  Fields f(j, "dataset.synthetic");
  f.read("num_nodes", s.num_nodes);
  f.read("num_classes", s.num_classes);
  f.read("num_hyperedges", s.num_hyperedges);
  f.read("min_size", s.min_size);
  f.read("max_size", s.max_size);
  f.read("homophily", s.homophily);
  f.read("feature_dim", s.feature_dim);
  f.read("feature_noise", s.feature_noise);
  f.read("signal", s.signal);
  f.read_enum("bias", s.bias, {BiasInjection::kNone, BiasInjection::kStructureNoise, BiasInjection::kFeatureNoise});
  f.read("bias_fraction", s.bias_fraction);
  f.read("train_fraction", s.train_fraction);
  f.read("meta_fraction", s.meta_fraction);
  f.read("test_fraction", s.test_fraction);
  f.finish();
  try {
    check_synthetic(s);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("dataset.") + e.what());
  }
  return s;
}

json to_json(const SyntheticSpec& s) {
  return {{"num_nodes", s.num_nodes},
          {"num_classes", s.num_classes},
          {"num_hyperedges", s.num_hyperedges},
          {"min_size", s.min_size},
          {"max_size", s.max_size},
          {"homophily", s.homophily},
          {"feature_dim", s.feature_dim},
          {"feature_noise", s.feature_noise},
          {"signal", s.signal},
          {"bias", to_string(s.bias)},
          {"bias_fraction", s.bias_fraction},
          {"train_fraction", s.train_fraction},
          {"meta_fraction", s.meta_fraction},
          {"test_fraction", s.test_fraction}};
}

RunConfig parse_run_config(const json& j) {
  RunConfig rc;
  TrainConfig& t = rc.train;
  Fields f(j, "");

  if (const json* d = f.child("dataset")) {
    Fields df(*d, "dataset");
    const bool has_path = df.has("path");
    const bool has_synth = df.has("synthetic");
    if (has_path == has_synth) throw ConfigError("'dataset' needs exactly one of 'path' or 'synthetic'");
    if (has_path) {
      std::string p;
      df.read("path", p);
      df.require(!p.empty(), "path", "a nonempty string");
      rc.dataset.path = p;
    } else {
      rc.dataset.synthetic = parse_synthetic(*df.child("synthetic"));
    }
    df.finish();
  }

  if (const json* m = f.child("model")) {
    Fields mf(*m, "model");
    mf.read("layers", t.hgnn.layers);
    mf.read("hidden", t.hgnn.hidden);
    mf.read("leaky_slope", t.hgnn.leaky_slope);
    mf.require(t.hgnn.layers >= 1, "layers", "at least 1");
    mf.require(t.hgnn.hidden >= 1, "hidden", "at least 1");
    mf.finish();
  }

  f.read("k", t.kmeans.k);
  f.require(t.kmeans.k >= 1, "k", "at least 1");
  if (const json* p = f.child("kmeans")) {
    Fields pf(*p, "kmeans");
    pf.read("max_iter", t.kmeans.max_iter);
    pf.read("tol", t.kmeans.tol);
    pf.require(t.kmeans.tol >= 0.0, "tol", "nonnegative");
    pf.finish();
  }

  if (const json* m = f.child("mwn")) {
    Fields mf(*m, "mwn");
    mf.read("hidden", t.mwn.hidden);
    mf.read_enum("output_mode", t.mwn.mode, {MwnOutputMode::kComplementary, MwnOutputMode::kIndependent});
    mf.read("log1p_inputs", t.mwn.log1p_inputs);
    mf.require(t.mwn.hidden >= 1, "hidden", "at least 1");
    mf.finish();
  }

  if (const json* s = f.child("schedules")) {
    Fields sf(*s, "schedules");
    if (const json* e = sf.child("external")) t.external = parse_schedule(*e, "schedules.external", t.external);
    if (const json* i = sf.child("internal")) t.internal = parse_schedule(*i, "schedules.internal", t.internal);
    sf.finish();
  }

  f.read("steps", t.steps);
  f.read("seed", t.seed);
  t.kmeans.seed = t.seed;
  f.read_enum("meta_split", t.meta_split, {MetaSplitPolicy::kDisjoint, MetaSplitPolicy::kFromTest});
  f.read("batch_size", t.batch_size);
  f.read_enum("optimizer", t.optimizer, {ExternalOptimizer::kGradientDescent, ExternalOptimizer::kAdam});
  f.read("weight_decay", t.weight_decay);
  f.require(t.weight_decay >= 0.0, "weight_decay", "nonnegative");
  if (const json* a = f.child("alpha_pin"); a && !a->is_null()) {
    f.require(a->is_number(), "alpha_pin", "null or a number in [0, 1]");
    const double pin = a->get<double>();
    f.require(pin >= 0.0 && pin <= 1.0, "alpha_pin", "null or a number in [0, 1]");
    t.alpha_pin = pin;
  }
  std::string out = rc.output.string();
  f.read("output", out);
  f.require(!out.empty(), "output", "a nonempty path");
  rc.output = out;
  f.finish();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& rc) {
  const TrainConfig& t = rc.train;
  json dataset = rc.dataset.path ? json{{"path", rc.dataset.path->string()}}
                                 : json{{"synthetic", to_json(rc.dataset.synthetic)}};
  return {{"dataset", dataset},
          {"model", {{"layers", t.hgnn.layers}, {"hidden", t.hgnn.hidden}, {"leaky_slope", t.hgnn.leaky_slope}}},
          {"k", t.kmeans.k},
          {"kmeans", {{"max_iter", t.kmeans.max_iter}, {"tol", t.kmeans.tol}}},
          {"mwn",
           {{"hidden", t.mwn.hidden}, {"output_mode", to_string(t.mwn.mode)}, {"log1p_inputs", t.mwn.log1p_inputs}}},
          {"schedules", {{"external", schedule_json(t.external)}, {"internal", schedule_json(t.internal)}}},
          {"steps", t.steps},
          {"seed", t.seed},
          {"meta_split", to_string(t.meta_split)},
          {"batch_size", t.batch_size},
          {"optimizer", to_string(t.optimizer)},
          {"weight_decay", t.weight_decay},
          {"alpha_pin", t.alpha_pin ? json(*t.alpha_pin) : json(nullptr)},
          {"output", rc.output.string()}};
}

Dataset materialize(const DatasetSource& source, std::uint64_t seed) {
  if (source.path) return load_dataset(*source.path);
  return generate_synthetic(source.synthetic, seed);
}

}  // namespace omahgnn
