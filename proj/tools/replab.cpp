#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "replab/trainer.hpp"

namespace fs = std::filesystem;
using namespace replab;

namespace {

// Default root for run output and ingested fixtures.
std::string data_root() {
  const char* env = std::getenv("REPLAB_DATA_DIR");
  return (env && *env) ? env : "runs";
}

int cmd_train(const std::string& config_path, const std::string& preset,
              bool has_seed, uint64_t seed, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path, preset);
  if (has_seed) cfg.run.seed = seed;
  if (!out.empty()) cfg.run.out_dir = out;
  if (cfg.run.out_dir.empty()) {
    std::string run_id = config_hash(cfg) + "-s" + std::to_string(cfg.run.seed);
    cfg.run.out_dir = (fs::path(data_root()) / run_id).string();
  }

  TrainState state(cfg);
  std::printf("train %s on %s (%s preset), %lld env steps, seed %llu\n",
              state.method().c_str(), cfg.env.task.c_str(),
              cfg.run.preset.c_str(),
              static_cast<long long>(cfg.run.total_steps),
              static_cast<unsigned long long>(cfg.run.seed));
  std::printf("run %s -> %s\n", state.run_id().c_str(),
              cfg.run.out_dir.c_str());

  TrainCallbacks cb;
  cb.on_record = [](const RunRecord& r) {
    std::printf("  step %8lld  return %10.2f  normalized %6.3f\n",
                static_cast<long long>(r.step), r.episode_return,
                r.normalized_score);
    std::fflush(stdout);
  };
  state.run(cb);

  std::string ckpt = (fs::path(cfg.run.out_dir) / "checkpoint").string();
  state.save_checkpoint(ckpt);
  std::printf("done: %lld env steps, %lld updates, checkpoint %s\n",
              static_cast<long long>(state.counters().env_steps),
              static_cast<long long>(state.counters().critic_updates),
              ckpt.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, uint64_t seed) {
  EvalSummary s = evaluate_checkpoint(checkpoint, episodes, seed);
  for (size_t i = 0; i < s.returns.size(); ++i)
    std::printf("  episode %2zu  return %10.2f  normalized %6.3f\n", i + 1,
                s.returns[i], s.normalized[i]);
  std::printf("mean over %zu episodes: return %.2f, normalized %.3f\n",
              s.returns.size(), s.mean_return, s.mean_normalized);
  return 0;
}

int cmd_report(const std::string& runs, const std::string& taxonomy_path,
               const std::string& format) {
  std::vector<RunRecord> records = read_records_dir(runs);
  Taxonomy taxonomy = load_taxonomy(taxonomy_path);
  AggregateReport agg = aggregate(records, taxonomy);
  for (const std::string& w : agg.warnings)
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::cout << report_by_category(records, taxonomy, format);
  return 0;
}

int cmd_plot(const std::string& runs, const std::string& out,
             const std::string& taxonomy_path) {
  std::vector<RunRecord> records = read_records_dir(runs);
  Taxonomy taxonomy;
  if (!taxonomy_path.empty()) taxonomy = load_taxonomy(taxonomy_path);
  std::vector<std::string> written = emit_plots(records, taxonomy, out);
  for (const std::string& p : written) std::printf("wrote %s\n", p.c_str());
  if (written.empty()) std::printf("no records under %s\n", runs.c_str());
  return 0;
}

int cmd_ingest(const std::string& file) {
  FixtureData fx = ingest_fixture(file);
  for (const std::string& w : fx.warnings)
    std::fprintf(stderr, "warning: %s\n", w.c_str());

  std::map<std::string, int> per_method;
  for (const RunRecord& r : fx.records) ++per_method[r.method];

  fs::path out_dir = data_root();
  fs::create_directories(out_dir);
  std::string out = (out_dir / (fs::path(file).stem().string() + ".jsonl"))
                        .string();
  append_records(out, fx.records);
  std::printf("ingested %zu records (%zu methods) -> %s\n", fx.records.size(),
              per_method.size(), out.c_str());
  for (const auto& [method, n] : per_method)
    std::printf("  %-12s %d\n", method.c_str(), n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixel-control representation learning experiments"};
  app.require_subcommand(1);

  std::string config_path, preset = "desk", out_dir;
  uint64_t seed = 0;
  CLI::App* train = app.add_subcommand("train", "run one training job");
  train->add_option("--config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* seed_opt =
      train->add_option("--seed", seed, "override the config seed");
  train->add_option("--preset", preset, "defaults for keys the file omits")
      ->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--out", out_dir, "output directory");

  std::string checkpoint;
  int episodes = 10;
  uint64_t eval_seed = 0;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a saved checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")
      ->required();
  eval->add_option("--episodes", episodes, "evaluation episodes")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");

  std::string runs_dir, taxonomy_path, format = "csv";
  CLI::App* report = app.add_subcommand("report", "aggregate runs by category");
  report->add_option("--runs", runs_dir, "directory of .jsonl record files")
      ->required()
      ->check(CLI::ExistingDirectory);
  report->add_option("--taxonomy", taxonomy_path, "category definitions")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--format", format, "csv or md")
      ->check(CLI::IsMember({"csv", "md"}));

  std::string plot_runs, plot_out, plot_taxonomy;
  CLI::App* plot = app.add_subcommand("plot", "render curves and bars");
  plot->add_option("--runs", plot_runs, "directory of .jsonl record files")
      ->required()
      ->check(CLI::ExistingDirectory);
  plot->add_option("--out", plot_out, "output directory")->required();
  plot->add_option("--taxonomy", plot_taxonomy, "category definitions")
      ->check(CLI::ExistingFile);

  std::string fixture_file;
  CLI::App* fixtures = app.add_subcommand("fixtures", "published-score tools");
  fixtures->require_subcommand(1);
  CLI::App* ingest =
      fixtures->add_subcommand("ingest", "convert a score CSV to records");
  ingest->add_option("--file", fixture_file, "score CSV with group sidecar")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train)
      return cmd_train(config_path, preset, seed_opt->count() > 0, seed,
                       out_dir);
    if (*eval) return cmd_eval(checkpoint, episodes, eval_seed);
    if (*report) return cmd_report(runs_dir, taxonomy_path, format);
    if (*plot) return cmd_plot(plot_runs, plot_out, plot_taxonomy);
    if (*ingest) return cmd_ingest(fixture_file);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const RuntimeAbort& e) {
    std::fprintf(stderr, "abort: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "abort: %s\n", e.what());
    return 3;
  }
  return 0;
}
