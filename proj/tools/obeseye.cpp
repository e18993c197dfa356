/*
 * Copyright 2026 The ObesEye Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// obeseye: cohort generation, training, benchmarking, explanation,
// plot-data emission and serving from a single binary.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <pthread.h>

#include "CLI11.hpp"
#include "obeseye/bundle.hpp"
#include "obeseye/cohort.hpp"
#include "obeseye/evaluate.hpp"
#include "obeseye/explain.hpp"
#include "obeseye/http_server.hpp"
#include "obeseye/service.hpp"

namespace {

using namespace obeseye;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Writes to `path`, or stdout when empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write(out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Target require_target(const std::string& name) {
  auto t = parse_target(name);
  if (!t) throw ValidationError("target", "unknown target '" + name + "'");
  return *t;
}

std::vector<Target> targets_from(const std::string& name) {
  if (name == "all") return {kAllTargets.begin(), kAllTargets.end()};
  return {require_target(name)};
}

struct GenArgs {
  std::size_t n = 146;
  std::uint64_t seed = 0;
  std::string out = "cohort.csv";
};

int run_gen(const GenArgs& a) {
  const auto cohort = generate_synthetic_cohort(a.seed, a.n);
  emit(a.out, [&](std::ostream& os) { write_cohort(cohort, os); });
  return 0;
}

struct TrainArgs {
  std::string cohort = "cohort.csv";
  std::uint64_t seed = 0;
  std::string out = "model.obeseye.json";
  std::size_t threads = 1;
  bool no_tune = false;
};

int run_train(const TrainArgs& a) {
  const auto cohort = parse_cohort_csv(a.cohort);
  TrainOptions opts;
  opts.threads = a.threads;
  opts.tune_selected = !a.no_tune;
  const auto bundle = train_bundle(cohort, a.seed, opts);
  save_bundle(bundle, a.out);
  for (const auto& tm : bundle.models) {
    std::cerr << target_name(tm.target) << ": " << family_name(tm.model.family) << '\n';
  }
  return 0;
}

struct BenchArgs {
  std::string bundle;
  std::string cohort;
  std::optional<std::uint64_t> seed;
  std::string format = "md";
  std::string out;
  std::size_t threads = 1;
};

int run_bench(const BenchArgs& a) {
  std::vector<BenchmarkReport> reports;
  if (!a.cohort.empty()) {
    if (!a.bundle.empty()) throw ValidationError("bench", "give either --bundle or --cohort, not both");
    const auto cohort = parse_cohort_csv(a.cohort);
    BenchmarkOptions opts;
    opts.threads = a.threads;
    for (auto t : kAllTargets) reports.push_back(run_benchmark(cohort, t, a.seed.value_or(0), opts));
  } else {
    if (a.seed) throw ValidationError("seed", "--seed applies only with --cohort; a bundle carries its own");
    reports = load_bundle(a.bundle.empty() ? "model.obeseye.json" : a.bundle).training.reports;
  }
  emit(a.out, [&](std::ostream& os) {
    if (a.format == "csv") {
      write_report_csv(reports, os);
    } else {
      write_report_markdown(reports, os);
    }
  });
  return 0;
}

struct ExplainArgs {
  std::string bundle = "model.obeseye.json";
  std::string record;
  std::string cohort;
  std::optional<std::size_t> row;
  std::string target = "fluid";
  std::string method = "shap";
  std::uint64_t lime_seed = 0;
  bool global = false;
  std::string out;
};

nlohmann::ordered_json summary_json(const SummaryData& s, const EncodingSchema& schema, Target t,
                                    const TrainedModel& model, std::size_t samples) {
  nlohmann::ordered_json j;
  j["method"] = "shap";
  j["target"] = target_name(t);
  j["family"] = family_name(model.family);
  j["samples"] = samples;
  auto& ranking = j["ranking"] = nlohmann::ordered_json::array();
  for (auto f : s.ranking) ranking.push_back({{"name", schema.features[f].name}, {"mean_abs_phi", s.mean_abs_phi[f]}});
  auto& points = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : s.points) {
    points.push_back({{"sample", p.sample}, {"name", schema.features[p.feature].name}, {"phi", p.phi},
                      {"value", p.value}});
  }
  return j;
}

int run_explain(const ExplainArgs& a) {
  const auto bundle = load_bundle(a.bundle);
  const auto target = require_target(a.target);
  if (a.method != "shap" && a.method != "lime") throw ValidationError("method", "expected shap or lime");
  const auto& model = bundle.model(target).model;

  if (a.global) {
    if (a.cohort.empty()) throw ValidationError("cohort", "--global needs --cohort");
    if (a.method != "shap") throw ValidationError("method", "--global summarises Shapley values; use --method shap");
    const auto cohort = parse_cohort_csv(a.cohort);
    const Matrix x = cohort.features();
    std::vector<ShapExplanation> all;
    for (std::size_t i = 0; i < x.rows(); ++i) all.push_back(shap_for(model, x.row(i), bundle.background, true));
    const auto summary = global_summary(all, x);
    emit(a.out, [&](std::ostream& os) {
      os << summary_json(summary, bundle.schema, target, model, x.rows()).dump(2) << '\n';
    });
    return 0;
  }

  nlohmann::ordered_json record;
  if (!a.record.empty()) {
    std::ifstream in(a.record, std::ios::binary);
    if (!in) throw ValidationError("record", "cannot open " + a.record);
    try {
      record = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("record", "malformed JSON at byte " + std::to_string(e.byte));
    }
  } else if (!a.cohort.empty() && a.row) {
    const auto cohort = parse_cohort_csv(a.cohort);
    if (*a.row >= cohort.size()) throw ValidationError("row", "out of range");
    for (const auto& [k, v] : record_to_fields(cohort.records()[*a.row])) record[k] = v;
  } else {
    throw ValidationError("record", "give --record FILE or --cohort FILE --row N");
  }

  ServiceConfig cfg;
  cfg.lime_seed = a.lime_seed;
  DietService service(cfg);
  service.install(std::make_shared<const ModelBundle>(bundle));
  const auto r = service.explain({{"record", record}, {"target", a.target}, {"method", a.method}});
  if (r.status != 200) {
    std::cerr << r.body.dump(2) << '\n';
    return r.status == 422 || r.status == 400 || r.status == 409 ? kExitValidation : kExitRuntime;
  }
  emit(a.out, [&](std::ostream& os) { os << r.body.dump(2) << '\n'; });
  return 0;
}

struct PlotArgs {
  std::string bundle = "model.obeseye.json";
  std::string cohort = "cohort.csv";
  std::string target = "all";
  std::string out;
};

// Test-split (actual, predicted) pairs under the bundle's training seed.
int run_plot_data(const PlotArgs& a) {
  const auto bundle = load_bundle(a.bundle);
  const auto cohort = parse_cohort_csv(a.cohort);
  const auto split = train_test_split(cohort, bundle.training.seed);
  if (split.train.size() != bundle.training.n_train) {
    throw ValidationError("cohort", "cohort size does not match the bundle's training cohort");
  }
  const Matrix x_test = cohort.features().select_rows(split.test);
  const auto targets = targets_from(a.target);
  emit(a.out, [&](std::ostream& os) {
    os << "target,actual,predicted\n";
    for (auto t : targets) {
      const auto actual = select(cohort.targets(t), split.test);
      const auto pred = bundle.model(t).model.predict(x_test);
      for (std::size_t i = 0; i < actual.size(); ++i) {
        os << target_name(t) << ',' << format_double(actual[i]) << ',' << format_double(pred[i]) << '\n';
      }
    }
  });
  return 0;
}

struct ServeArgs {
  std::string bundle;
  std::string bind;
  std::optional<std::uint64_t> lime_seed;
  std::string cors_origin;
};

// SIGHUP reloads the bundle from disk; SIGINT/SIGTERM stop the server.
int run_serve(const ServeArgs& a) {
  ServerConfig cfg;
  apply_environment(cfg);
  if (!a.bind.empty()) parse_bind(a.bind, cfg);
  if (!a.bundle.empty()) cfg.bundle_path = a.bundle;
  if (a.lime_seed) cfg.lime_seed = *a.lime_seed;
  if (!a.cors_origin.empty()) cfg.cors_origin = a.cors_origin;

  ServiceConfig scfg;
  scfg.lime_seed = cfg.lime_seed;
  DietService service(scfg);
  if (!cfg.bundle_path.empty()) service.load(cfg.bundle_path);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGHUP);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto server = make_http_server(service, cfg.cors_origin);
  if (!server->bind_to_port(cfg.host, cfg.port)) {
    throw std::runtime_error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  }
  std::thread listener([&] { server->listen_after_bind(); });
  std::cerr << "serving on " << cfg.host << ":" << cfg.port
            << (cfg.bundle_path.empty() ? " (no bundle loaded)" : " with " + cfg.bundle_path) << '\n';
  for (;;) {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig != SIGHUP) break;
    if (cfg.bundle_path.empty()) continue;
    try {
      service.load(cfg.bundle_path);
      std::cerr << "reloaded " << cfg.bundle_path << '\n';
    } catch (const std::exception& e) {
      std::cerr << "reload failed, keeping previous bundle: " << e.what() << '\n';
    }
  }
  server->stop();
  listener.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable diet-target prediction for NCD patients"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic cohort CSV");
  gen_cmd->add_option("--n", gen.n, "Number of patients")->check(CLI::Range(10, 1000000));
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen.out, "Output CSV ('-' for stdout)")->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Benchmark, select, tune and save a model bundle");
  train_cmd->add_option("--cohort", train.cohort, "Cohort CSV")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Split, CV and forest seed");
  train_cmd->add_option("--out", train.out, "Bundle path")->capture_default_str();
  train_cmd->add_option("--threads", train.threads, "Worker threads (0 = all cores)");
  train_cmd->add_flag("--no-tune", train.no_tune, "Skip grid-search tuning of the selected models");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Write the per-target metric tables");
  bench_cmd->add_option("--bundle", bench.bundle, "Report the benchmarks stored in a bundle (default)");
  bench_cmd->add_option("--cohort", bench.cohort, "Recompute benchmarks on a cohort CSV");
  bench_cmd->add_option("--seed", bench.seed, "Split seed when recomputing");
  bench_cmd->add_option("--format", bench.format, "md or csv")->check(CLI::IsMember({"md", "csv"}));
  bench_cmd->add_option("--out", bench.out, "Output path (default stdout)");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (0 = all cores)");

  ExplainArgs explain;
  auto* explain_cmd = app.add_subcommand("explain", "Explain one prediction, or summarise a cohort");
  explain_cmd->add_option("--bundle", explain.bundle, "Bundle path")->capture_default_str();
  explain_cmd->add_option("--record", explain.record, "JSON file holding one patient record");
  explain_cmd->add_option("--cohort", explain.cohort, "Cohort CSV (with --row, or --global)");
  explain_cmd->add_option("--row", explain.row, "Zero-based cohort row");
  explain_cmd->add_option("--target", explain.target, "fluid, carbohydrate, protein or fat")->capture_default_str();
  explain_cmd->add_option("--method", explain.method, "shap or lime")->capture_default_str();
  explain_cmd->add_option("--lime-seed", explain.lime_seed, "LIME perturbation seed");
  explain_cmd->add_flag("--global", explain.global, "Mean |phi| ranking over every cohort row");
  explain_cmd->add_option("--out", explain.out, "Output path (default stdout)");

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot-data", "Write test-split actual/predicted pairs as CSV");
  plot_cmd->add_option("--bundle", plot.bundle, "Bundle path")->capture_default_str();
  plot_cmd->add_option("--cohort", plot.cohort, "Cohort the bundle was trained on")->capture_default_str();
  plot_cmd->add_option("--target", plot.target, "A target name or 'all'")->capture_default_str();
  plot_cmd->add_option("--out", plot.out, "Output path (default stdout)");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--bundle", serve.bundle, "Bundle path (env OBESEYE_BUNDLE)");
  serve_cmd->add_option("--bind", serve.bind, "host:port (env OBESEYE_BIND, default 127.0.0.1:8080)");
  serve_cmd->add_option("--lime-seed", serve.lime_seed, "LIME seed (env OBESEYE_LIME_SEED)");
  serve_cmd->add_option("--cors-origin", serve.cors_origin, "Allowed CORS origin (env OBESEYE_CORS_ORIGIN)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train);
    if (*bench_cmd) return run_bench(bench);
    if (*explain_cmd) return run_explain(explain);
    if (*plot_cmd) return run_plot_data(plot);
    if (*serve_cmd) return run_serve(serve);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const BundleVersionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
