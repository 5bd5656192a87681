#pragma once

#include <string>
#include <vector>

#include "replab/autodiff.hpp"
#include "replab/buffer.hpp"
#include "replab/image.hpp"

namespace replab {

// Batch of stacked frames, sample-major: frames[b * stack + s], oldest first.
// All spatial ops draw one transform per sample and apply it to every frame
// in that sample's stack.
struct ImageBatch {
  int stack = 1;
  std::vector<Image8> frames;
  int batch() const {
    return frames.empty() ? 0 : static_cast<int>(frames.size()) / stack;
  }
  int h() const { return frames.empty() ? 0 : frames.front().h; }
  int w() const { return frames.empty() ? 0 : frames.front().w; }
  int c() const { return frames.empty() ? 0 : frames.front().c; }
};

struct AugmentationSpec {
  std::string kind = "none";  // none|crop|shift|flip|rotate|intensity
  int out = 0;                // crop output size
  int pad = 4;                // shift padding
  double p = 0.5;             // flip probability
  double scale = 0.1;         // intensity jitter scale
};

ImageBatch gather_obs(const TransitionBatch& batch, bool next);
// relevance masks aligned with each sample's current observation;
// usage error if any record was stored without them
ImageBatch gather_masks(const TransitionBatch& batch);
ImageBatch gather_seq_obs(const SequenceBatch& seq, int k);  // k in [0, horizon]
ImageBatch masks_to_batch(const std::vector<Image8>& masks);

// Per-sample draw order (one Rng seeded once for the whole batch, samples in
// order): crop dx,dy; shift dx,dy; flip u; rotate k; intensity z.
ImageBatch random_crop(const ImageBatch& in, int out, uint64_t seed);
ImageBatch random_shift(const ImageBatch& in, int pad, uint64_t seed);
ImageBatch random_flip(const ImageBatch& in, double p, uint64_t seed);
ImageBatch random_rotate(const ImageBatch& in, uint64_t seed);
ImageBatch intensity_jitter(const ImageBatch& in, double scale, uint64_t seed);
ImageBatch apply_augmentation(const ImageBatch& in, const AugmentationSpec& spec,
                              uint64_t seed);

Image8 replicate_pad(const Image8& img, int pad);
Image8 crop(const Image8& img, int x0, int y0, int w, int h);
Image8 rot90_ccw(const Image8& img);

// Fraction of nonzero mask pixels inside [x0,x0+w) x [y0,y0+h); 1.0 when the
// mask is empty.
double retention_metric(const Image8& mask, int x0, int y0, int w, int h);

// columns = samples; row index ((s*c + ch)*h + y)*w + x, values in [0,1]
template <typename T>
Mat<T> to_matrix(const ImageBatch& b) {
  int rows = b.stack * b.c() * b.h() * b.w();
  Mat<T> m(rows, b.batch());
  for (int col = 0; col < b.batch(); ++col) {
    int r = 0;
    for (int s = 0; s < b.stack; ++s) {
      const Image8& f = b.frames[static_cast<size_t>(col) * b.stack + s];
      for (int ch = 0; ch < f.c; ++ch)
        for (int y = 0; y < f.h; ++y)
          for (int x = 0; x < f.w; ++x)
            m(r++, col) = static_cast<T>(f.at(x, y, ch)) / T(255);
    }
  }
  return m;
}

template <typename T>
Mat<T> actions_to_matrix(const TransitionBatch& batch) {
  if (batch.items.empty()) return Mat<T>(0, 0);
  int d = static_cast<int>(batch.items.front()->action.size());
  Mat<T> m(d, static_cast<int>(batch.items.size()));
  for (size_t b = 0; b < batch.items.size(); ++b)
    for (int i = 0; i < d; ++i)
      m(i, static_cast<int>(b)) = static_cast<T>(batch.items[b]->action[i]);
  return m;
}

template <typename T>
Mat<T> rewards_to_row(const TransitionBatch& batch) {
  Mat<T> m(1, static_cast<int>(batch.items.size()));
  for (size_t b = 0; b < batch.items.size(); ++b)
    m(0, static_cast<int>(b)) = static_cast<T>(batch.items[b]->reward);
  return m;
}

template <typename T>
Mat<T> not_done_to_row(const TransitionBatch& batch) {
  Mat<T> m(1, static_cast<int>(batch.items.size()));
  for (size_t b = 0; b < batch.items.size(); ++b)
    m(0, static_cast<int>(b)) = batch.items[b]->done ? T(0) : T(1);
  return m;
}

}  // namespace replab
