// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any gating criterion fails.
//
// Criterion 9 runs only when OMAHGNN_CA_CORA names a converted CA-Cora
// dataset directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <regex>
#include <string>
#include <vector>

#include "hand_reference.hpp"
#include "omahgnn/artifact.hpp"
#include "omahgnn/config.hpp"
#include "omahgnn/hgnn.hpp"
#include "omahgnn/trainer.hpp"
#include "omahgnn/verify.hpp"
#include "test_util.hpp"

using namespace omahgnn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

Outcome judge(bool ok, std::string detail) { return {ok ? Verdict::kPass : Verdict::kFail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Fraction of consecutive 10-step moving-average windows that do not increase.
std::pair<std::size_t, std::size_t> non_increasing_windows(const std::vector<StepRecord>& h) {
  std::vector<double> avg;
  for (std::size_t i = 0; i + 10 <= h.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = i; k < i + 10; ++k) s += h[k].train_loss;
    avg.push_back(s / 10.0);
  }
  std::size_t ok = 0;
  for (std::size_t i = 1; i < avg.size(); ++i) ok += avg[i] <= avg[i - 1];
  return {ok, avg.empty() ? 0 : avg.size() - 1};
}

Outcome overlapness_exactness() {
  testutil::TempDir tmp("acceptance-figure");
  save_dataset(testutil::figure_dataset(), tmp / "figure");
  const auto t0 = Clock::now();
  const Dataset ds = load_dataset(tmp / "figure");
  const auto r = overlapness_ratio(ds.graph, 0);
  const double elapsed = seconds_since(t0);
  if (!r) return judge(false, "overlapness undefined");
  const double err = std::abs(r->value() - 12.0 / 7.0);
  return judge(err <= 1e-12 && elapsed < 1.0,
               fmt("p = %llu/%llu = %.12f, |err| %.1e, %.3f s", static_cast<unsigned long long>(r->size_sum),
                   static_cast<unsigned long long>(r->union_size), r->value(), err, elapsed));
}

Outcome attention_normalization() {
  double worst_fs = 0.0;
  std::size_t ss_mismatch = 0, pairs = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto gen = make_stream(seed, "acceptance/attention");
    const std::size_t n = 2 + uniform_index(gen, 49);
    const auto edges = testutil::random_edges(n, 1 + uniform_index(gen, 40), gen);
    const auto g = Hypergraph::from_hyperedges(n, edges);
    const HgnnStructure s(g);
    const std::size_t width = 1 + uniform_index(gen, 4);
    const Tensor hidden = testutil::random_tensor(n, width, gen, -2.0, 2.0);
    const auto fs =
        fs_coefficients(g, hidden, aggregate_hyperedges(g, hidden), testutil::random_tensor(2 * width, 1, gen, -2.0, 2.0));
    std::vector<double> total(n, 0.0);
    for (std::size_t i = 0; i < fs.size(); ++i) total[s.pair_node()[i]] += fs[i];
    std::vector<std::size_t> deg(n, 0);
    for (const auto& e : edges)
      for (NodeId v : e) ++deg[v];
    for (NodeId v = 0; v < n; ++v)
      if (deg[v] > 0) worst_fs = std::max(worst_fs, std::abs(total[v] - 1.0));
    const auto ss = ss_coefficients(g);
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const auto& members = edges[s.pair_edge()[i]];
      std::size_t sum = 0;
      for (NodeId u : members) sum += deg[u];
      const double d_e = static_cast<double>(sum) / static_cast<double>(members.size());
      ss_mismatch += ss[i] != 1.0 / (static_cast<double>(deg[s.pair_node()[i]]) * d_e);
      ++pairs;
    }
  }
  return judge(worst_fs <= 1e-9 && ss_mismatch == 0,
               fmt("max |sum FS - 1| %.1e, SS mismatches %zu of %zu pairs", worst_fs, ss_mismatch, pairs));
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto r = testutil::run(testutil::quote(OMAHGNN_CLI) + " grad-check");
  const double elapsed = seconds_since(t0);
  auto error_of = [&](const std::string& branch) {
    std::smatch m;
    const std::regex re("hgnn " + branch + " max relative error ([0-9.e+-]+)");
    return std::regex_search(r.output, m, re) ? std::stod(m[1]) : INFINITY;
  };
  const double ss = error_of("ss"), fs = error_of("fs");
  return judge(r.exit_code == 0 && ss <= kHgnnGradTolerance && fs <= kHgnnGradTolerance && elapsed < 10.0,
               fmt("ss %.2e, fs %.2e, exit %d, %.2f s", ss, fs, r.exit_code, elapsed));
}

Outcome meta_fidelity() {
  const auto t0 = Clock::now();
  const MetaCheckReport r = meta_gradient_check(ToySpec{});
  const double elapsed = seconds_since(t0);
  return judge(r.fd.max_rel_error <= kMetaGradTolerance && r.max_abs_analytic > 0.0 && elapsed < 30.0,
               fmt("relative error %.2e, max |grad| %.2e, %.2f s", r.fd.max_rel_error, r.max_abs_analytic, elapsed));
}

Outcome degenerate_identities() {
  using namespace handref;
  const Dataset ds = tiny();
  bool ok = true;
  std::string notes;

  TrainConfig frozen = width_two_config();
  frozen.external = {ScheduleKind::kConstant, 0.0, 10.0};
  {
    Trainer tr(ds, frozen);
    const auto w = tr.state().hgnn.flatten();
    const StepCache c = tr.intermediate_update(tr.state().train_ids);
    const MetaGradient mg = tr.meta_gradient(c);
    const bool zero_grad = std::all_of(mg.theta.begin(), mg.theta.end(), [](double g) { return g == 0.0; });
    tr.step();
    const bool same_w = c.w_hat == w && tr.state().hgnn.flatten() == w;
    ok = ok && zero_grad && same_w;
    notes += fmt("lr1=0: w unchanged %s, grad Theta zero %s", same_w ? "yes" : "no", zero_grad ? "yes" : "no");
  }

  Trainer tr(ds, width_two_config());
  const auto& ids = tr.state().train_ids;
  const StepCache c = tr.intermediate_update(ids);
  const bool halves =
      std::all_of(c.weights.begin(), c.weights.end(), [](const SampleWeights& w) { return w.alpha == 0.5 && w.beta == 0.5; });
  std::vector<double> w = tr.state().hgnn.flatten(), sum(w.size(), 0.0), hand = w;
  for (NodeId v : ids) {
    const auto g1 = tape_gradient(tr, v, Branch::kStructural), g2 = tape_gradient(tr, v, Branch::kFeature);
    for (std::size_t i = 0; i < w.size(); ++i) sum[i] += 0.5 * g1[i] + 0.5 * g2[i];
    const auto h1 = hand_gradient(ds, tr.state().hgnn, v, Branch::kStructural);
    const auto h2 = hand_gradient(ds, tr.state().hgnn, v, Branch::kFeature);
    for (std::size_t i = 0; i < w.size(); ++i) hand[i] -= 0.3 * 0.5 * (h1[i] + h2[i]);
  }
  std::vector<double> ref = w;
  for (std::size_t i = 0; i < w.size(); ++i) ref[i] -= 0.3 * sum[i];
  double hand_err = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) hand_err = std::max(hand_err, std::abs(c.w_hat[i] - hand[i]));
  const bool bitwise = c.w_hat == ref;
  ok = ok && halves && bitwise && hand_err <= 1e-13;
  notes += fmt("; alpha=beta=0.5 %s; step 1 bitwise %s; hand width-2 |err| %.1e", halves ? "yes" : "no",
               bitwise ? "yes" : "no", hand_err);
  return judge(ok, notes);
}

Outcome desk_scale_learning() {
  const RunConfig rc = parse_run_config(nlohmann::json::object());
  const Dataset ds = materialize(rc.dataset, rc.train.seed);
  const auto t0 = Clock::now();
  Trainer tr(ds, rc.train);
  tr.train();
  const TestAccuracy acc = tr.test_accuracy();
  const double elapsed = seconds_since(t0);
  const auto [ok, total] = non_increasing_windows(tr.state().history);
  const bool mono = total > 0 && static_cast<double>(ok) >= 0.9 * static_cast<double>(total);
  return judge(acc.blend >= 0.90 && mono && elapsed < 60.0,
               fmt("blend %.3f (ss %.3f fs %.3f), windows %zu/%zu, %.1f s", acc.blend, acc.ss, acc.fs, ok, total,
                   elapsed));
}

Outcome bias_adaptivity() {
  const RunConfig base = parse_run_config(nlohmann::json::object());
  double blend_sum = 0.0, best_sum = 0.0;
  std::size_t lower = 0;
  std::string rows;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec clean = base.dataset.synthetic, biased = clean;
    biased.bias = BiasInjection::kStructureNoise;
    biased.bias_fraction = 0.5;
    const Dataset dc = generate_synthetic(clean, seed), db = generate_synthetic(biased, seed);
    auto fit = [&](const Dataset& ds, std::optional<double> pin) {
      TrainConfig cfg = base.train;
      cfg.seed = cfg.kmeans.seed = seed;
      cfg.alpha_pin = pin;
      Trainer tr(ds, cfg);
      tr.train();
      return std::pair{tr.state().mean_alpha, tr.test_accuracy()};
    };
    const auto [alpha_clean, acc_clean] = fit(dc, std::nullopt);
    const auto [alpha_biased, acc_biased] = fit(db, std::nullopt);
    const double best = std::max(fit(db, 1.0).second.blend, fit(db, 0.0).second.blend);
    lower += alpha_biased < alpha_clean;
    blend_sum += acc_biased.blend;
    best_sum += best;
    rows += fmt("\n    seed %llu: alpha biased %.4f vs unbiased %.4f; blend %.3f, best pinned %.3f",
                static_cast<unsigned long long>(seed), alpha_biased, alpha_clean, acc_biased.blend, best);
  }
  const double mean_blend = blend_sum / 5.0, mean_best = best_sum / 5.0;
  return judge(lower == 5 && mean_blend >= mean_best - 0.02,
               fmt("alpha lower on %zu/5 seeds; mean blend %.3f vs mean best pinned %.3f", lower, mean_blend,
                   mean_best) +
                   rows);
}

Outcome scaling_smoke() {
  auto per_step = [](std::size_t hyperedges, std::size_t& nnz) {
    SyntheticSpec spec;
    spec.num_hyperedges = hyperedges;
    const Dataset ds = generate_synthetic(spec, 0);
    nnz = ds.graph.nnz();
    TrainConfig cfg;
    Trainer tr(ds, cfg);
    tr.step();
    std::vector<double> times;
    for (int i = 0; i < 5; ++i) {
      const auto t0 = Clock::now();
      tr.step();
      times.push_back(seconds_since(t0));
    }
    std::nth_element(times.begin(), times.begin() + 2, times.end());
    return times[2];
  };
  std::size_t nnz1 = 0, nnz2 = 0;
  const double t1 = per_step(150, nnz1), t2 = per_step(300, nnz2);
  const double ratio = t2 / t1;
  const double nnz_ratio = static_cast<double>(nnz2) / static_cast<double>(nnz1);
  return judge(ratio <= 2.5 && nnz_ratio >= 1.8,
               fmt("nnz %zu -> %zu (x%.2f), median step %.4f s -> %.4f s (x%.2f)", nnz1, nnz2, nnz_ratio, t1, t2,
                   ratio));
}

Outcome ca_cora_advisory() {
  const char* dir = std::getenv("OMAHGNN_CA_CORA");
  if (!dir || !*dir) return {Verdict::kSkip, "advisory; set OMAHGNN_CA_CORA to a converted dataset directory"};
  const Dataset ds = load_dataset(dir);
  const RunConfig base = parse_run_config(nlohmann::json::object());
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = base.train;
    cfg.seed = cfg.kmeans.seed = seed;
    Trainer tr(ds, cfg);
    tr.train();
    sum += tr.test_accuracy().blend;
  }
  const double mean = 100.0 * sum / 5.0;
  return judge(std::abs(mean - 78.5) <= 5.0,
               fmt("advisory; mean test accuracy %.2f%% over 5 seeds (train size %zu)", mean, ds.splits.train.size()));
}

Outcome determinism() {
  testutil::TempDir tmp("acceptance-determinism");
  testutil::write_file(tmp / "config.json", R"({"output": "run.json"})");
  auto train_in = [&](const std::string& sub) {
    testutil::fs::create_directories(tmp / sub);
    return testutil::run("cd " + testutil::quote(tmp / sub) + " && " + testutil::quote(OMAHGNN_CLI) +
                         " train --config " + testutil::quote(tmp / "config.json"));
  };
  const auto a = train_in("a"), b = train_in("b");
  const std::string ja = testutil::read_file(tmp / "a" / "run.json"), jb = testutil::read_file(tmp / "b" / "run.json");
  return judge(a.exit_code == 0 && b.exit_code == 0 && !ja.empty() && ja == jb,
               fmt("exit %d/%d, %zu bytes, identical %s", a.exit_code, b.exit_code, ja.size(), ja == jb ? "yes" : "no"));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"overlapness exactness", overlapness_exactness},
      {"attention normalization", attention_normalization},
      {"HGNN gradient fidelity", gradient_fidelity},
      {"meta-gradient fidelity", meta_fidelity},
      {"degenerate identities", degenerate_identities},
      {"desk-scale learning", desk_scale_learning},
      {"bias adaptivity", bias_adaptivity},
      {"scaling smoke", scaling_smoke},
      {"CA-Cora reference accuracy", ca_cora_advisory},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    const bool advisory = i + 1 == 9;
    if (o.verdict == Verdict::kFail && !advisory) ++failures;
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, tag, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d gating criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
