#include "replab/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <set>

#include "replab/common.hpp"
#include "replab/plot.hpp"
#include "replab/rng.hpp"

namespace replab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.pop_back();
  size_t b = s.find_first_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t p = text.find('\n', start);
    if (p == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, p - start));
    start = p + 1;
  }
  return lines;
}

bool known_family(const std::string& s) {
  return s == "ALE" || s == "DMC" || s == "synthetic";
}

bool known_reward(const std::string& s) {
  return s == "dense" || s == "dense_plus" || s == "sparse";
}

std::string aug_key(std::vector<std::string> augs) {
  std::sort(augs.begin(), augs.end());
  std::string k;
  for (const auto& a : augs) k += a + "+";
  return k;
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  double h = q * static_cast<double>(sorted.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(h));
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double f = h - static_cast<double>(lo);
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : lower(s)) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
      out.push_back(c);
    else if (!out.empty() && out.back() != '_')
      out.push_back('_');
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "x" : out;
}

std::string group_to_reward(const std::string& group) {
  if (group == "Human Optimal" || group == "Score Exploit") return "dense_plus";
  if (group == "Dense Reward") return "dense";
  if (group == "Sparse Reward") return "sparse";
  return "";
}

}  // namespace

Taxonomy parse_taxonomy(const std::string& text) {
  Taxonomy tax;
  std::set<std::string> ids;
  std::set<std::string> tuples;
  auto lines = split_lines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> tok;
    for (const auto& t : split(line, ' '))
      if (!t.empty()) tok.push_back(t);
    if (tok.size() != 5)
      throw ValidationError("taxonomy line " + std::to_string(i + 1) +
                            ": expected 5 fields, got " +
                            std::to_string(tok.size()));
    CategoryDescriptor cat;
    cat.id = tok[0];
    cat.env_family = tok[1];
    cat.reward_structure = tok[2];
    if (!known_family(cat.env_family))
      throw ValidationError("taxonomy line " + std::to_string(i + 1) +
                            ": unknown env family '" + cat.env_family + "'");
    if (!known_reward(cat.reward_structure))
      throw ValidationError("taxonomy line " + std::to_string(i + 1) +
                            ": unknown reward structure '" +
                            cat.reward_structure + "'");
    if (tok[3] == "yes" || tok[3] == "true")
      cat.distractors = true;
    else if (tok[3] == "no" || tok[3] == "false")
      cat.distractors = false;
    else
      throw ValidationError("taxonomy line " + std::to_string(i + 1) +
                            ": distractors must be yes/no");
    if (tok[4] != "none")
      for (const auto& a : split(tok[4], '+'))
        cat.augmentations.push_back(a);
    std::sort(cat.augmentations.begin(), cat.augmentations.end());
    if (!ids.insert(cat.id).second)
      throw ValidationError("taxonomy line " + std::to_string(i + 1) +
                            ": duplicate category id '" + cat.id + "'");
    std::string tuple = cat.env_family + "|" + cat.reward_structure + "|" +
                        (cat.distractors ? "y" : "n") + "|" +
                        aug_key(cat.augmentations);
    if (!tuples.insert(tuple).second)
      throw ValidationError("taxonomy line " + std::to_string(i + 1) +
                            ": category '" + cat.id +
                            "' duplicates another row's match tuple");
    tax.categories.push_back(std::move(cat));
  }
  return tax;
}

Taxonomy load_taxonomy(const std::string& path) {
  return parse_taxonomy(read_text_file(path));
}

std::string classify(const std::string& env_family,
                     const std::string& reward_structure, bool distractors,
                     std::vector<std::string> augmentations,
                     const Taxonomy& taxonomy) {
  std::sort(augmentations.begin(), augmentations.end());
  for (const auto& cat : taxonomy.categories) {
    if (cat.env_family == env_family &&
        cat.reward_structure == reward_structure &&
        cat.distractors == distractors &&
        cat.augmentations == augmentations)
      return cat.id;
  }
  return kUncategorized;
}

std::string record_to_json(const RunRecord& r) {
  json j;
  j["run_id"] = r.run_id;
  j["method"] = r.method;
  j["env"] = r.env;
  j["seed"] = r.seed;
  j["step"] = r.step;
  j["episode_return"] = r.episode_return;
  j["normalized_score"] = r.normalized_score;
  j["losses"] = r.losses;
  j["timestamp"] = r.timestamp;
  j["config_hash"] = r.config_hash;
  j["env_family"] = r.env_family;
  j["reward_structure"] = r.reward_structure;
  j["distractors"] = r.distractors;
  j["augmentations"] = r.augmentations;
  j["group"] = r.group;
  j["preset"] = r.preset;
  return j.dump();
}

RunRecord record_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("run record is not valid JSON: ") +
                          e.what());
  }
  if (!j.is_object()) throw ValidationError("run record must be an object");
  RunRecord r;
  auto str = [&](const char* k, std::string& out, bool required) {
    auto it = j.find(k);
    if (it == j.end()) {
      if (required)
        throw ValidationError(std::string("run record missing field ") + k);
      return;
    }
    if (!it->is_string())
      throw ValidationError(std::string("run record field ") + k +
                            " must be a string");
    out = it->get<std::string>();
  };
  str("run_id", r.run_id, true);
  str("method", r.method, true);
  str("env", r.env, true);
  str("config_hash", r.config_hash, true);
  str("env_family", r.env_family, false);
  str("reward_structure", r.reward_structure, false);
  str("group", r.group, false);
  str("preset", r.preset, false);
  auto num = [&](const char* k, double& out, bool required) {
    auto it = j.find(k);
    if (it == j.end()) {
      if (required)
        throw ValidationError(std::string("run record missing field ") + k);
      return;
    }
    if (!it->is_number())
      throw ValidationError(std::string("run record field ") + k +
                            " must be a number");
    out = it->get<double>();
  };
  num("episode_return", r.episode_return, true);
  num("normalized_score", r.normalized_score, true);
  if (auto it = j.find("seed"); it != j.end()) r.seed = it->get<uint64_t>();
  if (auto it = j.find("step"); it != j.end()) r.step = it->get<int64_t>();
  if (auto it = j.find("timestamp"); it != j.end())
    r.timestamp = it->get<int64_t>();
  if (auto it = j.find("distractors"); it != j.end())
    r.distractors = it->get<bool>();
  if (auto it = j.find("losses"); it != j.end()) {
    if (!it->is_object())
      throw ValidationError("run record field losses must be an object");
    for (auto& [k, v] : it->items()) r.losses[k] = v.get<double>();
  }
  if (auto it = j.find("augmentations"); it != j.end())
    for (const auto& a : *it) r.augmentations.push_back(a.get<std::string>());
  return r;
}

void append_records(const std::string& path,
                    const std::vector<RunRecord>& rs) {
  std::string body;
  for (const auto& r : rs) body += record_to_json(r) + "\n";
  std::string existing;
  if (fs::exists(path)) existing = read_text_file(path);
  write_text_file(path, existing + body);
}

std::vector<RunRecord> read_records(const std::string& path) {
  std::vector<RunRecord> out;
  auto lines = split_lines(read_text_file(path));
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      out.push_back(record_from_json(lines[i]));
    } catch (const ValidationError& e) {
      throw ValidationError(path + " line " + std::to_string(i + 1) + ": " +
                            e.what());
    }
  }
  return out;
}

std::vector<RunRecord> read_records_dir(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw IoError("run record directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> out;
  for (const auto& f : files) {
    auto part = read_records(f);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

double normalize_score(double raw, const EnvScoreSpec& spec) {
  if (spec.style == "synthetic") {
    if (!(spec.max_return > 0))
      throw ValidationError("normalize_score: max_return must be positive (" +
                            spec.env + ")");
    return std::clamp(raw / spec.max_return, 0.0, 1.0);
  }
  if (spec.style == "ale") {
    if (spec.human_score == spec.random_score)
      throw ValidationError(
          "normalize_score: human and random reference scores coincide (" +
          spec.env + ")");
    return (raw - spec.random_score) / (spec.human_score - spec.random_score);
  }
  throw ConfigError("normalize_score: unknown style '" + spec.style + "'");
}

AggregateStats aggregate_scores(std::vector<double> scores,
                                uint64_t bootstrap_seed) {
  if (scores.empty()) throw UsageError("aggregate_scores: empty group");
  std::sort(scores.begin(), scores.end());
  size_t n = scores.size();
  AggregateStats st;
  st.n_runs = static_cast<int>(n);
  st.bootstrap_seed = bootstrap_seed;
  double sum = 0;
  for (double s : scores) sum += s;
  st.mean = sum / static_cast<double>(n);
  st.median = n % 2 == 1 ? scores[n / 2]
                         : 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
  if (n > 1) {
    double ss = 0;
    for (double s : scores) ss += (s - st.mean) * (s - st.mean);
    st.std_err = std::sqrt(ss / static_cast<double>(n - 1)) /
                 std::sqrt(static_cast<double>(n));
  }
  if (n == 1) {
    st.ci_lo = scores[0];
    st.ci_hi = scores[0];
    return st;
  }
  // Resample indices depend only on (seed, n), which is what makes the CI
  // endpoints exactly scale-covariant.
  Rng rng(bootstrap_seed);
  std::vector<double> means(kBootstrapResamples);
  for (auto& m : means) {
    double acc = 0;
    for (size_t i = 0; i < n; ++i)
      acc += scores[rng.uniform_int(static_cast<uint64_t>(n))];
    m = acc / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  st.ci_lo = percentile(means, 0.025);
  st.ci_hi = percentile(means, 0.975);
  return st;
}

AggregateReport aggregate(const std::vector<RunRecord>& records,
                          const Taxonomy& taxonomy, uint64_t bootstrap_seed) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : records) {
    std::string cat = classify(r.env_family, r.reward_structure,
                               r.distractors, r.augmentations, taxonomy);
    groups[{cat, r.method}].push_back(r.normalized_score);
  }
  AggregateReport rep;
  for (auto& [key, scores] : groups) {
    AggregateStats st = aggregate_scores(scores, bootstrap_seed);
    st.category = key.first;
    st.method = key.second;
    rep.rows.push_back(std::move(st));
  }
  return rep;
}

FixtureData ingest_fixture(const std::string& csv_path) {
  std::string text = read_text_file(csv_path);

  fs::path p(csv_path);
  fs::path sidecar = p.parent_path() / (p.stem().string() + "_groups.csv");
  std::string gtext = read_text_file(sidecar.string());

  std::map<std::string, std::string> game_group;
  {
    auto lines = split_lines(gtext);
    if (lines.empty() || trim(lines[0]) != "game,group")
      throw ValidationError(sidecar.string() +
                            " line 1: expected header game,group");
    for (size_t i = 1; i < lines.size(); ++i) {
      std::string line = trim(lines[i]);
      if (line.empty()) continue;
      auto f = split(line, ',');
      if (f.size() != 2)
        throw ValidationError(sidecar.string() + " line " +
                              std::to_string(i + 1) + ": expected 2 fields");
      if (group_to_reward(f[1]).empty())
        throw ValidationError(sidecar.string() + " line " +
                              std::to_string(i + 1) + ": unknown group '" +
                              f[1] + "'");
      if (!game_group.emplace(f[0], f[1]).second)
        throw ValidationError(sidecar.string() + " line " +
                              std::to_string(i + 1) + ": duplicate game '" +
                              f[0] + "'");
    }
  }

  FixtureData out;
  auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != "game,method,score")
    throw ValidationError(csv_path +
                          " line 1: expected header game,method,score");
  for (size_t i = 1; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 3)
      throw ValidationError(csv_path + " line " + std::to_string(i + 1) +
                            ": expected 3 fields, got " +
                            std::to_string(f.size()));
    double score = 0;
    if (!parse_double(f[2], score))
      throw ValidationError(csv_path + " line " + std::to_string(i + 1) +
                            ": bad score '" + f[2] + "'");
    RunRecord r;
    r.env = f[0];
    r.method = f[1];
    r.run_id = "fixture/" + f[0] + "/" + f[1];
    r.episode_return = score;
    r.normalized_score = score;  // raw-score aggregation for fixtures
    r.timestamp = static_cast<int64_t>(out.records.size());
    r.config_hash = "fixture";
    r.env_family = "ALE";
    auto it = game_group.find(f[0]);
    if (it == game_group.end()) {
      r.reward_structure = "";
      out.warnings.push_back(csv_path + " line " + std::to_string(i + 1) +
                             ": game '" + f[0] +
                             "' missing from groups sidecar; uncategorized");
    } else {
      r.group = it->second;
      r.reward_structure = group_to_reward(it->second);
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

std::string serialize_fixture(const std::vector<RunRecord>& records) {
  std::string out = "game,method,score\n";
  for (const auto& r : records)
    out += r.env + "," + r.method + "," + format_double(r.episode_return) +
           "\n";
  return out;
}

std::string report_by_category(const std::vector<RunRecord>& records,
                               const Taxonomy& taxonomy,
                               const std::string& format,
                               uint64_t bootstrap_seed) {
  bool md = format == "md" || format == "markdown";
  if (!md && format != "csv")
    throw UsageError("report format must be csv or md, got '" + format + "'");

  AggregateReport rep = aggregate(records, taxonomy, bootstrap_seed);
  std::map<std::pair<std::string, std::string>, const AggregateStats*> cell;
  std::set<std::string> cats, methods;
  for (const auto& st : rep.rows) {
    cell[{st.category, st.method}] = &st;
    cats.insert(st.category);
    methods.insert(st.method);
  }

  const char* cols[] = {"method",  "category", "n_runs", "mean",
                        "median",  "std_err",  "ci_lo",  "ci_hi"};
  std::string out;
  if (md) {
    out += "|";
    for (const char* c : cols) out += std::string(" ") + c + " |";
    out += "\n|";
    for (size_t i = 0; i < 8; ++i) out += " --- |";
    out += "\n";
  } else {
    for (size_t i = 0; i < 8; ++i)
      out += std::string(cols[i]) + (i + 1 < 8 ? "," : "\n");
  }
  for (const auto& cat : cats) {
    for (const auto& m : methods) {
      auto it = cell.find({cat, m});
      std::vector<std::string> fields{m, cat};
      if (it == cell.end()) {
        for (int i = 0; i < 6; ++i) fields.push_back(md ? "-" : "");
      } else {
        const AggregateStats* st = it->second;
        fields.push_back(std::to_string(st->n_runs));
        fields.push_back(format_double(st->mean));
        fields.push_back(format_double(st->median));
        fields.push_back(format_double(st->std_err));
        fields.push_back(format_double(st->ci_lo));
        fields.push_back(format_double(st->ci_hi));
      }
      if (md) {
        out += "|";
        for (const auto& f : fields) out += " " + f + " |";
        out += "\n";
      } else {
        for (size_t i = 0; i < fields.size(); ++i)
          out += fields[i] + (i + 1 < fields.size() ? "," : "\n");
      }
    }
  }
  return out;
}

std::vector<CurveSeries> make_curve_data(
    const std::vector<RunRecord>& records) {
  std::map<std::pair<std::string, std::string>,
           std::map<int64_t, std::vector<double>>>
      buckets;
  std::map<std::pair<std::string, std::string>, std::set<uint64_t>> seeds;
  for (const auto& r : records) {
    std::pair<std::string, std::string> key{r.method, r.env};
    buckets[key][r.step].push_back(r.normalized_score);
    seeds[key].insert(r.seed);
  }
  std::vector<CurveSeries> out;
  for (auto& [key, steps] : buckets) {
    CurveSeries cs;
    cs.method = key.first;
    cs.env = key.second;
    cs.n_seeds = static_cast<int>(seeds[key].size());
    for (auto& [step, scores] : steps) {
      std::sort(scores.begin(), scores.end());
      double sum = 0;
      for (double s : scores) sum += s;
      double mean = sum / static_cast<double>(scores.size());
      double se = 0;
      if (scores.size() > 1) {
        double ss = 0;
        for (double s : scores) ss += (s - mean) * (s - mean);
        se = std::sqrt(ss / static_cast<double>(scores.size() - 1)) /
             std::sqrt(static_cast<double>(scores.size()));
      }
      cs.steps.push_back(step);
      cs.mean.push_back(mean);
      cs.std_err.push_back(se);
    }
    out.push_back(std::move(cs));
  }
  return out;
}

std::vector<std::string> emit_plots(const std::vector<RunRecord>& records,
                                    const Taxonomy& taxonomy,
                                    const std::string& out_dir,
                                    uint64_t bootstrap_seed) {
  if (records.empty()) return {};
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create plot directory: " + out_dir);

  std::vector<std::string> written;
  AggregateReport rep = aggregate(records, taxonomy, bootstrap_seed);
  std::map<std::string, std::vector<const AggregateStats*>> per_cat;
  for (const auto& st : rep.rows) per_cat[st.category].push_back(&st);
  for (const auto& [cat, rows] : per_cat) {
    PlotSpec spec;
    spec.title = cat;
    spec.ylabel = "score";
    for (const AggregateStats* st : rows) {
      spec.bar_labels.push_back(st->method);
      spec.bar_values.push_back(st->mean);
      spec.bar_err.push_back(st->std_err);
    }
    std::string base = (fs::path(out_dir) / ("bar_" + sanitize(cat))).string();
    write_plot(spec, base);
    written.push_back(base + ".png");
    written.push_back(base + ".svg");
  }

  for (const auto& cs : make_curve_data(records)) {
    PlotSpec spec;
    spec.title = cs.method + " on " + cs.env;
    spec.xlabel = "env steps";
    spec.ylabel = "score";
    PlotSeries s;
    s.label = cs.method;
    for (size_t i = 0; i < cs.steps.size(); ++i) {
      s.x.push_back(static_cast<double>(cs.steps[i]));
      s.y.push_back(cs.mean[i]);
      s.band.push_back(cs.std_err[i]);
    }
    spec.series.push_back(std::move(s));
    std::string base =
        (fs::path(out_dir) /
         ("curve_" + sanitize(cs.method) + "_" + sanitize(cs.env)))
            .string();
    write_plot(spec, base);
    written.push_back(base + ".png");
    written.push_back(base + ".svg");
  }
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace replab
