#pragma once

#include <deque>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "replab/env.hpp"

namespace replab {

struct TransitionRecord {
  PixelObservation obs;
  PixelObservation next_obs;
  // optional single-channel relevance masks aligned with obs.frames;
  // empty when the run is not recording them
  std::vector<std::shared_ptr<const Image8>> obs_masks;
  Eigen::VectorXd action;
  double reward = 0;
  bool done = false;
  int64_t episode_id = -1;
};

struct TransitionBatch {
  std::vector<const TransitionRecord*> items;
};

// windows[b] holds `horizon` consecutive transitions from one episode;
// the h+1 observation chain is windows[b][0].obs followed by each next_obs.
struct SequenceBatch {
  int horizon = 0;
  std::vector<std::vector<const TransitionRecord*>> windows;
};

// Uniform-replay ring. Frames are shared_ptr so stacked observations that
// overlap cost one copy of each frame, not stack-many.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  size_t capacity() const { return capacity_; }
  size_t size() const { return data_.size(); }
  int64_t total_pushed() const { return total_pushed_; }
  const TransitionRecord& at(size_t i) const;  // 0 = oldest retained

  void push(TransitionRecord rec);

  // both sample with replacement; pointers stay valid until the next push
  TransitionBatch sample(size_t batch, uint64_t seed) const;
  SequenceBatch sample_sequences(size_t batch, int horizon,
                                 uint64_t seed) const;

  void save(const std::string& dir) const;
  void load(const std::string& dir);

 private:
  size_t capacity_;
  std::deque<TransitionRecord> data_;
  int64_t total_pushed_ = 0;
};

}  // namespace replab
