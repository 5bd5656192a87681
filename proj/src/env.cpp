#include "replab/env.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "replab/common.hpp"

namespace replab {
namespace {

using nlohmann::json;

constexpr Rgb kAgentColor{214, 58, 46};  // controlled sprite
constexpr Rgb kGoalColor{52, 200, 88};   // target sprite
constexpr double kRoot8 = 2.8284271247461903;

double clampd(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

double effective_scale(const EmissionConfig& e) {
  return e.agent_scale * (e.layout == Layout::centered ? 1.0 : 0.5);
}

int map_x(double x, const EmissionConfig& e) {
  int span = e.layout == Layout::off_center ? e.render_size / 3 : e.render_size;
  return static_cast<int>(std::lround((x + 1.0) / 2.0 * (span - 1)));
}

int map_y(double y, const EmissionConfig& e) {
  return static_cast<int>(std::lround((y + 1.0) / 2.0 * (e.render_size - 1)));
}

void validate_emission(const EmissionConfig& e) {
  if (e.render_size < 16) throw ConfigError("render_size must be >= 16");
  if (e.frame_stack < 1) throw ConfigError("frame_stack must be >= 1");
  if (e.action_repeat < 1) throw ConfigError("action_repeat must be >= 1");
  if (!(e.agent_scale > 0) || e.agent_scale > 1.0)
    throw ConfigError("agent_scale must be in (0,1]");
  if (e.distractor_mode == DistractorMode::frame_directory &&
      e.frame_directory.empty())
    throw ConfigError("frame_directory required for frame_directory mode");
}

void validate_action(const Eigen::VectorXd& a, int dim) {
  if (a.size() != dim)
    throw ValidationError("action has dimension " + std::to_string(a.size()) +
                          ", expected " + std::to_string(dim));
  for (int i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || std::abs(a[i]) > 1.0)
      throw ValidationError("action component out of [-1,1]");
  }
}

json ground_to_json(const GroundState& g) {
  return json{{"position", {g.position[0], g.position[1]}},
              {"velocity", {g.velocity[0], g.velocity[1]}},
              {"goal", {g.goal[0], g.goal[1]}},
              {"step_index", g.step_index}};
}

GroundState ground_from_json(const json& j) {
  GroundState g;
  g.position << j.at("position")[0].get<double>(),
      j.at("position")[1].get<double>();
  g.velocity << j.at("velocity")[0].get<double>(),
      j.at("velocity")[1].get<double>();
  g.goal << j.at("goal")[0].get<double>(), j.at("goal")[1].get<double>();
  g.step_index = j.at("step_index").get<int>();
  return g;
}

std::string frames_to_hex(const std::deque<std::shared_ptr<const Image8>>& st,
                          json& meta) {
  std::string blob;
  std::vector<const Image8*> uniq;
  meta["order"] = json::array();
  for (const auto& f : st) {
    int id = -1;
    for (size_t i = 0; i < uniq.size(); ++i)
      if (uniq[i] == f.get()) id = static_cast<int>(i);
    if (id < 0) {
      id = static_cast<int>(uniq.size());
      uniq.push_back(f.get());
      blob.append(reinterpret_cast<const char*>(f->px.data()), f->px.size());
    }
    meta["order"].push_back(id);
  }
  if (!st.empty()) {
    meta["w"] = st.front()->w;
    meta["h"] = st.front()->h;
    meta["c"] = st.front()->c;
  }
  return bytes_to_hex(blob);
}

std::deque<std::shared_ptr<const Image8>> frames_from_hex(
    const std::string& hex, const json& meta) {
  std::string blob = hex_to_bytes(hex);
  std::deque<std::shared_ptr<const Image8>> st;
  if (!meta.contains("w")) return st;
  int w = meta.at("w"), h = meta.at("h"), c = meta.at("c");
  size_t frame_bytes = static_cast<size_t>(w) * h * c;
  if (frame_bytes == 0 || blob.size() % frame_bytes != 0)
    throw ValidationError("corrupt frame blob in env state");
  std::vector<std::shared_ptr<const Image8>> uniq;
  for (size_t off = 0; off + frame_bytes <= blob.size(); off += frame_bytes) {
    auto img = std::make_shared<Image8>(w, h, c);
    std::copy(blob.begin() + off, blob.begin() + off + frame_bytes,
              img->px.begin());
    uniq.push_back(img);
  }
  for (const auto& idx : meta.at("order")) {
    size_t i = idx.get<size_t>();
    if (i >= uniq.size()) throw ValidationError("corrupt frame order");
    st.push_back(uniq[i]);
  }
  return st;
}

}  // namespace

std::string to_string(DistractorMode m) {
  switch (m) {
    case DistractorMode::none: return "none";
    case DistractorMode::procedural: return "procedural";
    case DistractorMode::frame_directory: return "frame_directory";
  }
  return "none";
}

std::string to_string(Layout l) {
  switch (l) {
    case Layout::centered: return "centered";
    case Layout::off_center: return "off_center";
    case Layout::zoomed_out: return "zoomed_out";
  }
  return "centered";
}

DistractorMode distractor_mode_from_string(const std::string& s) {
  if (s == "none") return DistractorMode::none;
  if (s == "procedural") return DistractorMode::procedural;
  if (s == "frame_directory") return DistractorMode::frame_directory;
  throw ConfigError("unknown distractor mode: " + s);
}

Layout layout_from_string(const std::string& s) {
  if (s == "centered") return Layout::centered;
  if (s == "off_center") return Layout::off_center;
  if (s == "zoomed_out") return Layout::zoomed_out;
  throw ConfigError("unknown layout: " + s);
}

DistractorStream DistractorStream::make_none(int size) {
  DistractorStream d;
  d.mode_ = DistractorMode::none;
  d.size_ = size;
  return d;
}

DistractorStream DistractorStream::make_procedural(int size, uint64_t seed) {
  DistractorStream d;
  d.mode_ = DistractorMode::procedural;
  d.size_ = size;
  Rng rng(seed);
  int lo = std::max(2, size / 8), hi = std::max(lo, size / 3);
  for (int k = 0; k < 3; ++k) {
    Rect r;
    r.w = lo + static_cast<int>(rng.uniform_int(hi - lo + 1));
    r.h = lo + static_cast<int>(rng.uniform_int(hi - lo + 1));
    r.x = static_cast<int>(rng.uniform_int(size));
    r.y = static_cast<int>(rng.uniform_int(size));
    r.vx = (rng.uniform_int(2) ? 1 : -1) * (1 + static_cast<int>(rng.uniform_int(3)));
    r.vy = (rng.uniform_int(2) ? 1 : -1) * (1 + static_cast<int>(rng.uniform_int(3)));
    for (int ch = 0; ch < 3; ++ch)
      r.color[ch] = static_cast<uint8_t>(40 + rng.uniform_int(216));
    d.rects_.push_back(r);
  }
  return d;
}

DistractorStream DistractorStream::make_directory(
    std::shared_ptr<const std::vector<Image8>> frames, uint64_t seed) {
  if (!frames || frames->empty())
    throw ConfigError("frame directory stream has no frames");
  DistractorStream d;
  d.mode_ = DistractorMode::frame_directory;
  d.size_ = frames->front().w;
  d.frames_ = std::move(frames);
  d.cursor_ = splitmix64(seed) % d.frames_->size();
  return d;
}

Image8 DistractorStream::next() {
  switch (mode_) {
    case DistractorMode::none: {
      ++cursor_;
      return Image8(size_, size_, 3);
    }
    case DistractorMode::procedural: {
      Image8 img(size_, size_, 3);
      for (auto& r : rects_) {
        // draw with torus wraparound so motion stays continuous at edges
        for (int dx : {0, -size_})
          for (int dy : {0, -size_})
            draw_rect(img, r.x + dx, r.y + dy, r.x + dx + r.w, r.y + dy + r.h,
                      r.color);
        r.x = ((r.x + r.vx) % size_ + size_) % size_;
        r.y = ((r.y + r.vy) % size_ + size_) % size_;
      }
      ++cursor_;
      return img;
    }
    case DistractorMode::frame_directory: {
      const Image8& f = (*frames_)[cursor_];
      cursor_ = (cursor_ + 1) % frames_->size();
      return f;
    }
  }
  throw RuntimeAbort("unreachable distractor mode");
}

std::string DistractorStream::serialize() const {
  json j;
  j["mode"] = to_string(mode_);
  j["size"] = size_;
  j["cursor"] = cursor_;
  j["rects"] = json::array();
  for (const auto& r : rects_)
    j["rects"].push_back({{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h},
                          {"vx", r.vx}, {"vy", r.vy},
                          {"color", {r.color[0], r.color[1], r.color[2]}}});
  return j.dump();
}

DistractorStream DistractorStream::deserialize(
    const std::string& s, std::shared_ptr<const std::vector<Image8>> frames) {
  json j = json::parse(s);
  DistractorStream d;
  d.mode_ = distractor_mode_from_string(j.at("mode").get<std::string>());
  d.size_ = j.at("size").get<int>();
  d.cursor_ = j.at("cursor").get<size_t>();
  for (const auto& jr : j.at("rects")) {
    Rect r;
    r.x = jr.at("x");
    r.y = jr.at("y");
    r.w = jr.at("w");
    r.h = jr.at("h");
    r.vx = jr.at("vx");
    r.vy = jr.at("vy");
    for (int ch = 0; ch < 3; ++ch)
      r.color[ch] = jr.at("color")[ch].get<uint8_t>();
    d.rects_.push_back(r);
  }
  if (d.mode_ == DistractorMode::frame_directory) {
    if (!frames || frames->empty())
      throw ValidationError("directory stream state needs loaded frames");
    d.frames_ = std::move(frames);
    d.cursor_ %= d.frames_->size();
  }
  return d;
}

Image8 render(const GroundState& ground, const EmissionConfig& emission,
              const Image8& frame, bool catch_task) {
  if (frame.w != emission.render_size || frame.h != emission.render_size ||
      frame.c != 3)
    throw ValidationError("distractor frame does not match render size");
  Image8 img = frame;
  double s = effective_scale(emission);
  int radius = static_cast<int>(std::lround(4 * s));
  int side = static_cast<int>(std::lround(6 * s));
  int ax = map_x(ground.position[0], emission);
  int ay = map_y(ground.position[1], emission);
  int gx = map_x(ground.goal[0], emission);
  int gy = map_y(ground.goal[1], emission);
  if (catch_task) {
    draw_square(img, ax, ay, side, kAgentColor);  // cup
    draw_disc(img, gx, gy, radius, kGoalColor);   // ball
  } else {
    draw_square(img, gx, gy, side, kGoalColor);
    draw_disc(img, ax, ay, radius, kAgentColor);
  }
  return img;
}

Image8 relevance_mask(const GroundState& ground, const EmissionConfig& emission,
                      bool catch_task) {
  Image8 mask(emission.render_size, emission.render_size, 1);
  double s = effective_scale(emission);
  int radius = static_cast<int>(std::lround(4 * s));
  int side = static_cast<int>(std::lround(6 * s));
  Rgb on{255, 255, 255};
  int ax = map_x(ground.position[0], emission);
  int ay = map_y(ground.position[1], emission);
  int gx = map_x(ground.goal[0], emission);
  int gy = map_y(ground.goal[1], emission);
  if (catch_task) {
    draw_square(mask, ax, ay, side, on);
    draw_disc(mask, gx, gy, radius, on);
  } else {
    draw_square(mask, gx, gy, side, on);
    draw_disc(mask, ax, ay, radius, on);
  }
  return mask;
}

PointMassEnv::PointMassEnv(EmissionConfig emission, int episode_length)
    : emission_(std::move(emission)),
      episode_length_(episode_length),
      stream_(DistractorStream::make_none(emission_.render_size)) {
  validate_emission(emission_);
  if (episode_length_ < 1) throw ConfigError("episode_length must be >= 1");
  if (emission_.distractor_mode == DistractorMode::frame_directory)
    dir_frames_ =
        load_frame_directory(emission_.frame_directory, emission_.render_size);
}

DistractorStream PointMassEnv::make_stream(uint64_t seed) const {
  switch (emission_.distractor_mode) {
    case DistractorMode::none:
      return DistractorStream::make_none(emission_.render_size);
    case DistractorMode::procedural:
      return DistractorStream::make_procedural(emission_.render_size, seed);
    case DistractorMode::frame_directory:
      return DistractorStream::make_directory(dir_frames_, seed);
  }
  throw RuntimeAbort("unreachable distractor mode");
}

StepResult PointMassEnv::observe(double reward) {
  StepResult r;
  r.obs.h = emission_.render_size;
  r.obs.w = emission_.render_size;
  r.obs.stack = emission_.frame_stack;
  r.obs.layout = emission_.layout;
  r.obs.frames.assign(stack_.begin(), stack_.end());
  r.reward = reward;
  r.done = done_;
  r.mask = relevance_mask(ground_, emission_);
  r.ground = ground_;
  return r;
}

StepResult PointMassEnv::reset(uint64_t seed) {
  Rng rng(derive_seed(seed, "pointmass_reset"));
  double c = rng.uniform_int(2) ? 0.93 : -0.93;
  ground_.position << -c + rng.uniform(-0.03, 0.03),
      -c + rng.uniform(-0.03, 0.03);
  ground_.goal << c + rng.uniform(-0.03, 0.03), c + rng.uniform(-0.03, 0.03);
  ground_.velocity.setZero();
  ground_.step_index = 0;
  stream_ = make_stream(derive_seed(seed, "distractor"));
  auto first = std::make_shared<Image8>(render(ground_, emission_, stream_.next()));
  stack_.clear();
  for (int i = 0; i < emission_.frame_stack; ++i) stack_.push_back(first);
  done_ = false;
  return observe(0.0);
}

StepResult PointMassEnv::step(const Eigen::VectorXd& action) {
  if (done_) throw UsageError("step called on a finished episode");
  validate_action(action, 2);
  double reward = 0;
  Image8 frame(emission_.render_size, emission_.render_size, 3);
  for (int k = 0; k < emission_.action_repeat; ++k) {
    frame = stream_.next();
    for (int i = 0; i < 2; ++i)
      ground_.position[i] = clampd(ground_.position[i] + 0.1 * action[i], -1, 1);
    reward += 1.0 - (ground_.position - ground_.goal).norm() / kRoot8;
  }
  ground_.velocity = 0.1 * action;
  ground_.step_index += 1;
  done_ = ground_.step_index >= episode_length_;
  stack_.push_back(std::make_shared<Image8>(render(ground_, emission_, frame)));
  stack_.pop_front();
  return observe(reward);
}

std::string PointMassEnv::serialize_state() const {
  json j;
  j["task"] = name();
  j["ground"] = ground_to_json(ground_);
  j["stream"] = stream_.serialize();
  j["done"] = done_;
  json meta;
  j["frames"] = frames_to_hex(stack_, meta);
  j["frames_meta"] = meta;
  return j.dump();
}

void PointMassEnv::deserialize_state(const std::string& s) {
  json j = json::parse(s);
  if (j.at("task").get<std::string>() != name())
    throw ValidationError("env state belongs to task " +
                          j.at("task").get<std::string>());
  ground_ = ground_from_json(j.at("ground"));
  stream_ = DistractorStream::deserialize(j.at("stream").get<std::string>(),
                                          dir_frames_);
  done_ = j.at("done").get<bool>();
  stack_ = frames_from_hex(j.at("frames").get<std::string>(),
                           j.at("frames_meta"));
  if (static_cast<int>(stack_.size()) != emission_.frame_stack)
    throw ValidationError("env state frame stack does not match config");
}

SparseCatchEnv::SparseCatchEnv(EmissionConfig emission, int episode_length)
    : emission_(std::move(emission)),
      episode_length_(episode_length),
      stream_(DistractorStream::make_none(emission_.render_size)) {
  validate_emission(emission_);
  if (episode_length_ < 1) throw ConfigError("episode_length must be >= 1");
  if (emission_.distractor_mode == DistractorMode::frame_directory)
    dir_frames_ =
        load_frame_directory(emission_.frame_directory, emission_.render_size);
}

DistractorStream SparseCatchEnv::make_stream(uint64_t seed) const {
  switch (emission_.distractor_mode) {
    case DistractorMode::none:
      return DistractorStream::make_none(emission_.render_size);
    case DistractorMode::procedural:
      return DistractorStream::make_procedural(emission_.render_size, seed);
    case DistractorMode::frame_directory:
      return DistractorStream::make_directory(dir_frames_, seed);
  }
  throw RuntimeAbort("unreachable distractor mode");
}

StepResult SparseCatchEnv::observe(double reward) {
  StepResult r;
  r.obs.h = emission_.render_size;
  r.obs.w = emission_.render_size;
  r.obs.stack = emission_.frame_stack;
  r.obs.layout = emission_.layout;
  r.obs.frames.assign(stack_.begin(), stack_.end());
  r.reward = reward;
  r.done = done_;
  r.mask = relevance_mask(ground_, emission_, true);
  r.ground = ground_;
  return r;
}

StepResult SparseCatchEnv::reset(uint64_t seed) {
  Rng rng(derive_seed(seed, "catch_reset"));
  ground_.position << rng.uniform(-0.1, 0.1), -0.95;
  ground_.goal << rng.uniform(-0.9, 0.9), 0.95;
  ground_.velocity.setZero();
  ground_.step_index = 0;
  inner_step_ = 0;
  stream_ = make_stream(derive_seed(seed, "distractor"));
  auto first = std::make_shared<Image8>(
      render(ground_, emission_, stream_.next(), true));
  stack_.clear();
  for (int i = 0; i < emission_.frame_stack; ++i) stack_.push_back(first);
  done_ = false;
  return observe(0.0);
}

StepResult SparseCatchEnv::step(const Eigen::VectorXd& action) {
  if (done_) throw UsageError("step called on a finished episode");
  validate_action(action, 1);
  int total_inner = episode_length_ * emission_.action_repeat;
  double dy = 1.9 / total_inner;
  Image8 frame(emission_.render_size, emission_.render_size, 3);
  for (int k = 0; k < emission_.action_repeat; ++k) {
    frame = stream_.next();
    ground_.position[0] = clampd(ground_.position[0] + 0.2 * action[0], -1, 1);
    ground_.goal[1] = std::max(-0.95, ground_.goal[1] - dy);
    ++inner_step_;
  }
  ground_.velocity << 0.2 * action[0], 0.0;
  ground_.step_index += 1;
  done_ = ground_.step_index >= episode_length_;
  double reward = 0;
  if (done_ && std::abs(ground_.position[0] - ground_.goal[0]) <= 0.15)
    reward = 1.0;
  stack_.push_back(
      std::make_shared<Image8>(render(ground_, emission_, frame, true)));
  stack_.pop_front();
  return observe(reward);
}

std::string SparseCatchEnv::serialize_state() const {
  json j;
  j["task"] = name();
  j["ground"] = ground_to_json(ground_);
  j["stream"] = stream_.serialize();
  j["done"] = done_;
  j["inner_step"] = inner_step_;
  json meta;
  j["frames"] = frames_to_hex(stack_, meta);
  j["frames_meta"] = meta;
  return j.dump();
}

void SparseCatchEnv::deserialize_state(const std::string& s) {
  json j = json::parse(s);
  if (j.at("task").get<std::string>() != name())
    throw ValidationError("env state belongs to task " +
                          j.at("task").get<std::string>());
  ground_ = ground_from_json(j.at("ground"));
  stream_ = DistractorStream::deserialize(j.at("stream").get<std::string>(),
                                          dir_frames_);
  done_ = j.at("done").get<bool>();
  inner_step_ = j.at("inner_step").get<int>();
  stack_ = frames_from_hex(j.at("frames").get<std::string>(),
                           j.at("frames_meta"));
  if (static_cast<int>(stack_.size()) != emission_.frame_stack)
    throw ValidationError("env state frame stack does not match config");
}

std::unique_ptr<EnvAdapter> make_env(const std::string& task,
                                     const EmissionConfig& emission,
                                     int episode_length) {
  if (task == "pointmass")
    return std::make_unique<PointMassEnv>(emission, episode_length);
  if (task == "sparsecatch")
    return std::make_unique<SparseCatchEnv>(emission, episode_length);
  throw ConfigError("unknown task: " + task);
}

std::shared_ptr<const std::vector<Image8>> load_frame_directory(
    const std::string& dir, int render_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw ConfigError("frame directory not found: " + dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      names.push_back(entry.path().string());
  }
  if (names.empty()) throw ConfigError("no .png frames in " + dir);
  std::sort(names.begin(), names.end());
  auto frames = std::make_shared<std::vector<Image8>>();
  for (const auto& n : names) {
    Image8 img = read_png(n);
    if (img.w != render_size || img.h != render_size)
      throw ValidationError("frame " + n + " is " + std::to_string(img.w) +
                            "x" + std::to_string(img.h) + ", expected " +
                            std::to_string(render_size) + "x" +
                            std::to_string(render_size));
    frames->push_back(std::move(img));
  }
  return frames;
}

}  // namespace replab
