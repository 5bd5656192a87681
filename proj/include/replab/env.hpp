#pragma once

#include <Eigen/Dense>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "replab/image.hpp"
#include "replab/rng.hpp"

namespace replab {

enum class DistractorMode { none, procedural, frame_directory };
enum class Layout { centered, off_center, zoomed_out };

std::string to_string(DistractorMode m);
std::string to_string(Layout l);
DistractorMode distractor_mode_from_string(const std::string& s);
Layout layout_from_string(const std::string& s);

struct EmissionConfig {
  DistractorMode distractor_mode = DistractorMode::none;
  Layout layout = Layout::centered;
  int render_size = 64;
  double agent_scale = 1.0;
  int action_repeat = 2;
  int frame_stack = 3;
  std::string frame_directory;
};

struct GroundState {
  Eigen::Vector2d position{0, 0};
  Eigen::Vector2d velocity{0, 0};
  Eigen::Vector2d goal{0, 0};
  int step_index = 0;
};

struct PixelObservation {
  int h = 0, w = 0, stack = 0;
  Layout layout = Layout::centered;
  std::vector<std::shared_ptr<const Image8>> frames;  // oldest first
};

struct StepResult {
  PixelObservation obs;
  double reward = 0;
  bool done = false;
  Image8 mask;  // relevance mask of the post-step state (diagnostic)
  GroundState ground;
};

// Background frame source. Procedural mode animates three seeded rectangles
// with fixed per-episode velocities; directory mode walks a PNG list
// sequentially with wraparound; none yields black frames.
class DistractorStream {
 public:
  struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
    int vx = 0, vy = 0;
    Rgb color{0, 0, 0};
  };

  static DistractorStream make_none(int size);
  static DistractorStream make_procedural(int size, uint64_t seed);
  static DistractorStream make_directory(
      std::shared_ptr<const std::vector<Image8>> frames, uint64_t seed);

  // frame at the cursor; advances the cursor by one
  Image8 next();
  const std::vector<Rect>& rects() const { return rects_; }
  size_t cursor() const { return cursor_; }

  std::string serialize() const;
  static DistractorStream deserialize(
      const std::string& s,
      std::shared_ptr<const std::vector<Image8>> frames);

 private:
  DistractorMode mode_ = DistractorMode::none;
  int size_ = 0;
  std::vector<Rect> rects_;
  std::shared_ptr<const std::vector<Image8>> frames_;
  size_t cursor_ = 0;
};

// Pure emission: composites the task sprites over a background frame.
Image8 render(const GroundState& ground, const EmissionConfig& emission,
              const Image8& frame, bool catch_task = false);
// 1-channel image, 255 exactly on agent/goal sprite pixels.
Image8 relevance_mask(const GroundState& ground, const EmissionConfig& emission,
                      bool catch_task = false);

class EnvAdapter {
 public:
  virtual ~EnvAdapter() = default;
  virtual StepResult reset(uint64_t seed) = 0;
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
  virtual int action_dim() const = 0;
  virtual const EmissionConfig& emission() const = 0;
  virtual int episode_length() const = 0;
  virtual double max_return() const = 0;
  virtual std::string name() const = 0;
  virtual std::string reward_structure() const = 0;
  virtual bool has_distractors() const = 0;
  virtual const GroundState& ground() const = 0;
  virtual bool done() const = 0;
  virtual std::string serialize_state() const = 0;
  virtual void deserialize_state(const std::string& s) = 0;
};

// Dense reach task: the agent starts near one corner of a fixed diagonal and
// must reach the opposite corner. Which diagonal is active is sampled per
// episode, so the policy has to read it off the pixels.
class PointMassEnv : public EnvAdapter {
 public:
  PointMassEnv(EmissionConfig emission, int episode_length);

  StepResult reset(uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;
  int action_dim() const override { return 2; }
  const EmissionConfig& emission() const override { return emission_; }
  int episode_length() const override { return episode_length_; }
  double max_return() const override {
    return static_cast<double>(episode_length_) * emission_.action_repeat;
  }
  std::string name() const override { return "pointmass"; }
  std::string reward_structure() const override { return "dense"; }
  bool has_distractors() const override {
    return emission_.distractor_mode != DistractorMode::none;
  }
  const GroundState& ground() const override { return ground_; }
  bool done() const override { return done_; }
  std::string serialize_state() const override;
  void deserialize_state(const std::string& s) override;

 private:
  StepResult observe(double reward);
  DistractorStream make_stream(uint64_t seed) const;

  EmissionConfig emission_;
  int episode_length_;
  GroundState ground_;
  DistractorStream stream_;
  std::shared_ptr<const std::vector<Image8>> dir_frames_;
  std::deque<std::shared_ptr<const Image8>> stack_;
  bool done_ = true;
};

// Sparse task: a cup on a rail must be under a falling ball when it lands.
// Reward is 0 everywhere except the terminal step, where it is 0 or 1.
class SparseCatchEnv : public EnvAdapter {
 public:
  SparseCatchEnv(EmissionConfig emission, int episode_length);

  StepResult reset(uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;
  int action_dim() const override { return 1; }
  const EmissionConfig& emission() const override { return emission_; }
  int episode_length() const override { return episode_length_; }
  double max_return() const override { return 1.0; }
  std::string name() const override { return "sparsecatch"; }
  std::string reward_structure() const override { return "sparse"; }
  bool has_distractors() const override {
    return emission_.distractor_mode != DistractorMode::none;
  }
  const GroundState& ground() const override { return ground_; }
  bool done() const override { return done_; }
  std::string serialize_state() const override;
  void deserialize_state(const std::string& s) override;

 private:
  StepResult observe(double reward);
  DistractorStream make_stream(uint64_t seed) const;

  EmissionConfig emission_;
  int episode_length_;
  GroundState ground_;  // position = (cup_x, cup_y); goal = ball (x, y)
  DistractorStream stream_;
  std::shared_ptr<const std::vector<Image8>> dir_frames_;
  std::deque<std::shared_ptr<const Image8>> stack_;
  int inner_step_ = 0;
  bool done_ = true;
};

std::unique_ptr<EnvAdapter> make_env(const std::string& task,
                                     const EmissionConfig& emission,
                                     int episode_length);

// Loads *.png from a directory in lexicographic order; ConfigError when the
// directory is missing/empty, ValidationError on size mismatch.
std::shared_ptr<const std::vector<Image8>> load_frame_directory(
    const std::string& dir, int render_size);

}  // namespace replab
