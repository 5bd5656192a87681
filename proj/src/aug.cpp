#include "replab/aug.hpp"

#include <algorithm>
#include <cmath>

#include "replab/common.hpp"
#include "replab/rng.hpp"

namespace replab {
namespace {

void validate_batch(const ImageBatch& b) {
  if (b.stack < 1) throw ValidationError("image batch stack must be >= 1");
  if (b.frames.size() % b.stack != 0)
    throw ValidationError("image batch frame count not divisible by stack");
  for (const auto& f : b.frames)
    if (!f.same_shape(b.frames.front()))
      throw ValidationError("image batch frames differ in shape");
}

}  // namespace

ImageBatch gather_obs(const TransitionBatch& batch, bool next) {
  ImageBatch out;
  if (batch.items.empty()) return out;
  out.stack = batch.items.front()->obs.stack;
  for (const TransitionRecord* r : batch.items) {
    const PixelObservation& o = next ? r->next_obs : r->obs;
    if (o.stack != out.stack)
      throw ValidationError("mixed frame stacks in one batch");
    for (const auto& f : o.frames) out.frames.push_back(*f);
  }
  return out;
}

ImageBatch gather_masks(const TransitionBatch& batch) {
  ImageBatch out;
  if (batch.items.empty()) return out;
  out.stack = batch.items.front()->obs.stack;
  for (const TransitionRecord* r : batch.items) {
    if (r->obs_masks.empty())
      throw UsageError(
          "partial reconstruction requires relevance masks in the replay "
          "records");
    if (static_cast<int>(r->obs_masks.size()) != out.stack)
      throw ValidationError("mask count does not match frame stack");
    for (const auto& m : r->obs_masks) out.frames.push_back(*m);
  }
  return out;
}

ImageBatch gather_seq_obs(const SequenceBatch& seq, int k) {
  if (k < 0 || k > seq.horizon)
    throw UsageError("sequence offset outside [0, horizon]");
  ImageBatch out;
  if (seq.windows.empty()) return out;
  const PixelObservation& first = k < seq.horizon
                                      ? seq.windows.front()[k]->obs
                                      : seq.windows.front().back()->next_obs;
  out.stack = first.stack;
  for (const auto& win : seq.windows) {
    const PixelObservation& o =
        k < seq.horizon ? win[k]->obs : win.back()->next_obs;
    if (o.stack != out.stack)
      throw ValidationError("mixed frame stacks in one batch");
    for (const auto& f : o.frames) out.frames.push_back(*f);
  }
  return out;
}

ImageBatch masks_to_batch(const std::vector<Image8>& masks) {
  ImageBatch out;
  out.stack = 1;
  out.frames = masks;
  validate_batch(out);
  return out;
}

Image8 crop(const Image8& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.w || y0 + h > img.h || w < 1 || h < 1)
    throw ValidationError("crop window exceeds image bounds");
  Image8 out(w, h, img.c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < img.c; ++ch)
        out.at(x, y, ch) = img.at(x0 + x, y0 + y, ch);
  return out;
}

Image8 replicate_pad(const Image8& img, int pad) {
  if (pad < 0) throw ValidationError("pad must be non-negative");
  Image8 out(img.w + 2 * pad, img.h + 2 * pad, img.c);
  for (int y = 0; y < out.h; ++y) {
    int sy = std::clamp(y - pad, 0, img.h - 1);
    for (int x = 0; x < out.w; ++x) {
      int sx = std::clamp(x - pad, 0, img.w - 1);
      for (int ch = 0; ch < img.c; ++ch) out.at(x, y, ch) = img.at(sx, sy, ch);
    }
  }
  return out;
}

Image8 rot90_ccw(const Image8& img) {
  if (img.w != img.h)
    throw ValidationError("rotation requires square frames");
  Image8 out(img.w, img.h, img.c);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      for (int ch = 0; ch < img.c; ++ch)
        out.at(x, y, ch) = img.at(img.w - 1 - y, x, ch);
  return out;
}

ImageBatch random_crop(const ImageBatch& in, int out_size, uint64_t seed) {
  validate_batch(in);
  if (out_size < 1 || out_size > in.w() || out_size > in.h())
    throw ValidationError("crop size must fit inside the frame");
  Rng rng(seed);
  ImageBatch out;
  out.stack = in.stack;
  out.frames.reserve(in.frames.size());
  for (int b = 0; b < in.batch(); ++b) {
    int dx = static_cast<int>(rng.uniform_int(in.w() - out_size + 1));
    int dy = static_cast<int>(rng.uniform_int(in.h() - out_size + 1));
    for (int s = 0; s < in.stack; ++s)
      out.frames.push_back(crop(in.frames[static_cast<size_t>(b) * in.stack + s],
                                dx, dy, out_size, out_size));
  }
  return out;
}

ImageBatch random_shift(const ImageBatch& in, int pad, uint64_t seed) {
  validate_batch(in);
  if (pad < 0) throw ValidationError("pad must be non-negative");
  Rng rng(seed);
  ImageBatch out;
  out.stack = in.stack;
  out.frames.reserve(in.frames.size());
  for (int b = 0; b < in.batch(); ++b) {
    int dx = static_cast<int>(rng.uniform_int(2 * pad + 1));
    int dy = static_cast<int>(rng.uniform_int(2 * pad + 1));
    for (int s = 0; s < in.stack; ++s) {
      Image8 padded =
          replicate_pad(in.frames[static_cast<size_t>(b) * in.stack + s], pad);
      out.frames.push_back(crop(padded, dx, dy, in.w(), in.h()));
    }
  }
  return out;
}

ImageBatch random_flip(const ImageBatch& in, double p, uint64_t seed) {
  validate_batch(in);
  if (p < 0 || p > 1) throw ValidationError("flip probability outside [0,1]");
  Rng rng(seed);
  ImageBatch out;
  out.stack = in.stack;
  out.frames.reserve(in.frames.size());
  for (int b = 0; b < in.batch(); ++b) {
    bool flip = rng.uniform() < p;
    for (int s = 0; s < in.stack; ++s) {
      const Image8& f = in.frames[static_cast<size_t>(b) * in.stack + s];
      if (!flip) {
        out.frames.push_back(f);
        continue;
      }
      Image8 g(f.w, f.h, f.c);
      for (int y = 0; y < f.h; ++y)
        for (int x = 0; x < f.w; ++x)
          for (int ch = 0; ch < f.c; ++ch)
            g.at(x, y, ch) = f.at(f.w - 1 - x, y, ch);
      out.frames.push_back(std::move(g));
    }
  }
  return out;
}

ImageBatch random_rotate(const ImageBatch& in, uint64_t seed) {
  validate_batch(in);
  Rng rng(seed);
  ImageBatch out;
  out.stack = in.stack;
  out.frames.reserve(in.frames.size());
  for (int b = 0; b < in.batch(); ++b) {
    int quarter = static_cast<int>(rng.uniform_int(4));
    for (int s = 0; s < in.stack; ++s) {
      Image8 f = in.frames[static_cast<size_t>(b) * in.stack + s];
      for (int k = 0; k < quarter; ++k) f = rot90_ccw(f);
      out.frames.push_back(std::move(f));
    }
  }
  return out;
}

ImageBatch intensity_jitter(const ImageBatch& in, double scale, uint64_t seed) {
  validate_batch(in);
  if (scale < 0) throw ValidationError("intensity scale must be non-negative");
  Rng rng(seed);
  ImageBatch out;
  out.stack = in.stack;
  out.frames.reserve(in.frames.size());
  for (int b = 0; b < in.batch(); ++b) {
    double z = std::clamp(rng.normal(), -2.0, 2.0);
    double factor = 1.0 + scale * z;
    for (int s = 0; s < in.stack; ++s) {
      Image8 f = in.frames[static_cast<size_t>(b) * in.stack + s];
      for (auto& px : f.px)
        px = static_cast<uint8_t>(
            std::clamp<long>(std::lround(px * factor), 0, 255));
      out.frames.push_back(std::move(f));
    }
  }
  return out;
}

ImageBatch apply_augmentation(const ImageBatch& in, const AugmentationSpec& spec,
                              uint64_t seed) {
  if (spec.kind == "none") return in;
  if (spec.kind == "crop") return random_crop(in, spec.out, seed);
  if (spec.kind == "shift") return random_shift(in, spec.pad, seed);
  if (spec.kind == "flip") return random_flip(in, spec.p, seed);
  if (spec.kind == "rotate") return random_rotate(in, seed);
  if (spec.kind == "intensity") return intensity_jitter(in, spec.scale, seed);
  throw ConfigError("unknown augmentation kind: " + spec.kind);
}

double retention_metric(const Image8& mask, int x0, int y0, int w, int h) {
  if (mask.c != 1) throw ValidationError("retention expects 1-channel mask");
  long total = 0, kept = 0;
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x)
      if (mask.at(x, y, 0) != 0) {
        ++total;
        if (x >= x0 && x < x0 + w && y >= y0 && y < y0 + h) ++kept;
      }
  if (total == 0) return 1.0;
  return static_cast<double>(kept) / static_cast<double>(total);
}

}  // namespace replab
