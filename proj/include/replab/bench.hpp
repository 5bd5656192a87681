#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace replab {

inline const char* kUncategorized = "uncategorized";

struct CategoryDescriptor {
  std::string id;                // C1..C8 or custom
  std::string env_family;        // ALE | DMC | synthetic
  std::string reward_structure;  // dense | dense_plus | sparse
  bool distractors = false;
  std::vector<std::string> augmentations;  // sorted kinds; empty = none
};

struct Taxonomy {
  std::vector<CategoryDescriptor> categories;
};

// Text format: one category per line, `id env_family reward_structure
// distractors augmentations`, augmentations '+'-joined or "none"; '#' starts
// a comment.  Duplicate ids or duplicate match tuples refuse to load.
Taxonomy parse_taxonomy(const std::string& text);
Taxonomy load_taxonomy(const std::string& path);

// The unique matching category id, or the uncategorized marker.
std::string classify(const std::string& env_family,
                     const std::string& reward_structure, bool distractors,
                     std::vector<std::string> augmentations,
                     const Taxonomy& taxonomy);

struct RunRecord {
  std::string run_id;
  std::string method;
  std::string env;
  uint64_t seed = 0;
  int64_t step = 0;
  double episode_return = 0;
  double normalized_score = 0;
  std::map<std::string, double> losses;
  int64_t timestamp = 0;  // logical index within the producing stream
  std::string config_hash;
  // self-description consumed by classify()
  std::string env_family = "synthetic";
  std::string reward_structure = "dense";
  bool distractors = false;
  std::vector<std::string> augmentations;
  std::string group;   // fixture group label; empty for live runs
  std::string preset;  // desk | paper; empty for fixtures
};

std::string record_to_json(const RunRecord& r);
RunRecord record_from_json(const std::string& line);
void append_records(const std::string& path, const std::vector<RunRecord>& rs);
std::vector<RunRecord> read_records(const std::string& path);
// every *.jsonl under dir (non-recursive), lexicographic file order
std::vector<RunRecord> read_records_dir(const std::string& dir);

struct EnvScoreSpec {
  std::string env;
  std::string style = "synthetic";  // synthetic | ale
  double max_return = 1.0;
  double random_score = 0.0;
  double human_score = 1.0;
};

// synthetic: raw / max_return clipped to [0,1]; ale: human-normalized,
// unclipped.
double normalize_score(double raw, const EnvScoreSpec& spec);

struct AggregateStats {
  std::string method;
  std::string category;
  int n_runs = 0;
  double mean = 0;
  double median = 0;
  double std_err = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  uint64_t bootstrap_seed = 0;
};

inline constexpr uint64_t kBootstrapSeed = 2718281828459045235ull;
inline constexpr int kBootstrapResamples = 10000;

// mean/median/sample std error (n-1; zero for n = 1) plus a percentile
// bootstrap 95% CI over resampled means.  Input order never matters.
AggregateStats aggregate_scores(std::vector<double> scores,
                                uint64_t bootstrap_seed = kBootstrapSeed);

struct AggregateReport {
  std::vector<AggregateStats> rows;  // category id ascending, then method
  std::vector<std::string> warnings;
};

// Groups by (method, classify(record)) over normalized_score.
AggregateReport aggregate(const std::vector<RunRecord>& records,
                          const Taxonomy& taxonomy,
                          uint64_t bootstrap_seed = kBootstrapSeed);

struct FixtureData {
  std::vector<RunRecord> records;
  std::vector<std::string> warnings;
};

// CSV with header game,method,score plus a <stem>_groups.csv sidecar mapping
// games to published group names.  Scores survive a byte round trip.
FixtureData ingest_fixture(const std::string& csv_path);
std::string serialize_fixture(const std::vector<RunRecord>& records);

// One row per (method, category with any runs); missing combinations render
// as blanks, never zeros.  format: "csv" or "md"/"markdown".
std::string report_by_category(const std::vector<RunRecord>& records,
                               const Taxonomy& taxonomy,
                               const std::string& format,
                               uint64_t bootstrap_seed = kBootstrapSeed);

// Pure plot geometry: per (method, env), mean and std error across seeds at
// each logged step.  The emitted band half-width is exactly std_err[i].
struct CurveSeries {
  std::string method;
  std::string env;
  std::vector<int64_t> steps;
  std::vector<double> mean;
  std::vector<double> std_err;
  int n_seeds = 0;
};
std::vector<CurveSeries> make_curve_data(const std::vector<RunRecord>& records);

// Bar chart per category plus one curve chart per (method, env), each as
// .png + .svg.  Returns the written paths, sorted.  Empty input writes
// nothing.
std::vector<std::string> emit_plots(const std::vector<RunRecord>& records,
                                    const Taxonomy& taxonomy,
                                    const std::string& out_dir,
                                    uint64_t bootstrap_seed = kBootstrapSeed);

}  // namespace replab
