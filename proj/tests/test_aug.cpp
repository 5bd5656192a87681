#include <doctest.h>

#include <cmath>

#include "replab/aug.hpp"
#include "replab/common.hpp"
#include "replab/env.hpp"
#include "replab/rng.hpp"

using namespace replab;

namespace {

Image8 gradient_image(int w, int h, int c, int salt = 0) {
  Image8 img(w, h, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        img.at(x, y, ch) =
            static_cast<uint8_t>((x * 7 + y * 13 + ch * 29 + salt) % 251);
  return img;
}

ImageBatch single(const Image8& img) {
  ImageBatch b;
  b.stack = 1;
  b.frames = {img};
  return b;
}

bool nonbackground(const Image8& img, int x, int y) {
  for (int ch = 0; ch < img.c; ++ch)
    if (img.at(x, y, ch) != 0) return true;
  return false;
}

}  // namespace

TEST_SUITE_BEGIN("aug");

TEST_CASE("crop with out == in is the identity") {
  ImageBatch b = single(gradient_image(16, 16, 3));
  ImageBatch out = random_crop(b, 16, 5);
  CHECK(out.frames[0].px == b.frames[0].px);
}

TEST_CASE("crop equals the direct slice at the replayed offset") {
  ImageBatch b;
  b.stack = 1;
  b.frames = {gradient_image(12, 12, 3, 0), gradient_image(12, 12, 3, 9)};
  uint64_t seed = 31;
  ImageBatch out = random_crop(b, 8, seed);
  Rng replay(seed);
  for (int s = 0; s < 2; ++s) {
    int dx = static_cast<int>(replay.uniform_int(5));
    int dy = static_cast<int>(replay.uniform_int(5));
    Image8 want = crop(b.frames[s], dx, dy, 8, 8);
    CHECK(out.frames[s].px == want.px);
  }
}

TEST_CASE("crop shares one offset across a sample's stack") {
  ImageBatch b;
  b.stack = 3;
  for (int s = 0; s < 3; ++s) {
    Image8 f(10, 10, 3);
    f.at(4, 4, 0) = 255;  // marker inside every legal 6x6 window
    b.frames.push_back(f);
  }
  ImageBatch out = random_crop(b, 6, 2);
  int mx = -1, my = -1;
  for (int s = 0; s < 3; ++s) {
    bool found = false;
    for (int y = 0; y < 6 && !found; ++y)
      for (int x = 0; x < 6 && !found; ++x)
        if (out.frames[s].at(x, y, 0) == 255) {
          if (s == 0) {
            mx = x;
            my = y;
          } else {
            CHECK(x == mx);
            CHECK(y == my);
          }
          found = true;
        }
    CHECK(found);
  }
}

TEST_CASE("crop size validation") {
  ImageBatch b = single(gradient_image(8, 8, 3));
  CHECK_THROWS_AS(random_crop(b, 9, 0), ValidationError);
  CHECK_THROWS_AS(random_crop(b, 0, 0), ValidationError);
}

TEST_CASE("shift with pad zero is bit-identical") {
  ImageBatch b = single(gradient_image(16, 16, 3));
  ImageBatch out = random_shift(b, 0, 77);
  CHECK(out.frames[0].px == b.frames[0].px);
}

TEST_CASE("shift is a clamped translation by the replayed offset") {
  Image8 img = gradient_image(16, 16, 3);
  ImageBatch b = single(img);
  uint64_t seed = 4;
  int pad = 4;
  ImageBatch out = random_shift(b, pad, seed);
  Rng replay(seed);
  int dx = static_cast<int>(replay.uniform_int(2 * pad + 1));
  int dy = static_cast<int>(replay.uniform_int(2 * pad + 1));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      int sx = std::clamp(x + dx - pad, 0, 15);
      int sy = std::clamp(y + dy - pad, 0, 15);
      for (int ch = 0; ch < 3; ++ch)
        CHECK(out.frames[0].at(x, y, ch) == img.at(sx, sy, ch));
    }
}

TEST_CASE("flip probabilities at the endpoints") {
  ImageBatch b = single(gradient_image(9, 9, 3));
  ImageBatch same = random_flip(b, 0.0, 8);
  CHECK(same.frames[0].px == b.frames[0].px);
  ImageBatch once = random_flip(b, 1.0, 8);
  ImageBatch twice = random_flip(once, 1.0, 8);
  CHECK(twice.frames[0].px == b.frames[0].px);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      CHECK(once.frames[0].at(x, y, 1) == b.frames[0].at(8 - x, y, 1));
  CHECK_THROWS_AS(random_flip(b, 1.5, 0), ValidationError);
}

TEST_CASE("four quarter rotations close the group") {
  Image8 img = gradient_image(6, 6, 3);
  Image8 r = img;
  for (int k = 0; k < 4; ++k) r = rot90_ccw(r);
  CHECK(r.px == img.px);
  // one CCW quarter moves the top-right corner to the origin
  Image8 one = rot90_ccw(img);
  CHECK(one.at(0, 0, 0) == img.at(5, 0, 0));
  CHECK_THROWS_AS(rot90_ccw(gradient_image(4, 6, 3)), ValidationError);
}

TEST_CASE("rotate matches the replayed quarter count") {
  ImageBatch b = single(gradient_image(8, 8, 3));
  uint64_t seed = 19;
  ImageBatch out = random_rotate(b, seed);
  Rng replay(seed);
  int q = static_cast<int>(replay.uniform_int(4));
  Image8 want = b.frames[0];
  for (int k = 0; k < q; ++k) want = rot90_ccw(want);
  CHECK(out.frames[0].px == want.px);
}

TEST_CASE("intensity jitter applies the replayed factor with clipping") {
  Image8 img(4, 4, 3);
  fill(img, {100, 200, 3});
  ImageBatch b = single(img);
  uint64_t seed = 6;
  double scale = 0.4;
  ImageBatch out = intensity_jitter(b, scale, seed);
  Rng replay(seed);
  double f = 1.0 + scale * std::clamp(replay.normal(), -2.0, 2.0);
  uint8_t want_r =
      static_cast<uint8_t>(std::clamp<long>(std::lround(100 * f), 0, 255));
  uint8_t want_g =
      static_cast<uint8_t>(std::clamp<long>(std::lround(200 * f), 0, 255));
  CHECK(out.frames[0].at(0, 0, 0) == want_r);
  CHECK(out.frames[0].at(2, 3, 1) == want_g);
  ImageBatch id = intensity_jitter(b, 0.0, seed);
  CHECK(id.frames[0].px == img.px);
}

TEST_CASE("same seed reproduces the augmented batch") {
  ImageBatch b;
  b.stack = 2;
  for (int i = 0; i < 6; ++i) b.frames.push_back(gradient_image(10, 10, 3, i));
  AugmentationSpec spec;
  spec.kind = "crop";
  spec.out = 7;
  ImageBatch a1 = apply_augmentation(b, spec, 55);
  ImageBatch a2 = apply_augmentation(b, spec, 55);
  REQUIRE(a1.frames.size() == a2.frames.size());
  for (size_t i = 0; i < a1.frames.size(); ++i)
    CHECK(a1.frames[i].px == a2.frames[i].px);
  CHECK_THROWS_AS(apply_augmentation(b, AugmentationSpec{"warp"}, 0),
                  ConfigError);
}

TEST_CASE("geometric augmentations commute with the relevance mask") {
  EmissionConfig e;
  e.render_size = 64;
  ImageBatch scenes, masks;
  scenes.stack = 1;
  masks.stack = 1;
  Rng rng(14);
  for (int b = 0; b < 4; ++b) {
    GroundState g;
    g.position << rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6);
    g.goal << rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6);
    scenes.frames.push_back(render(g, e, Image8(64, 64, 3)));
    masks.frames.push_back(relevance_mask(g, e));
  }
  std::vector<AugmentationSpec> kinds = {{"crop", 48},
                                         {"shift", 0, 4},
                                         {"flip", 0, 4, 0.5},
                                         {"rotate"}};
  for (const auto& spec : kinds) {
    ImageBatch ts = apply_augmentation(scenes, spec, 101);
    ImageBatch tm = apply_augmentation(masks, spec, 101);
    for (size_t i = 0; i < ts.frames.size(); ++i) {
      const Image8& s = ts.frames[i];
      const Image8& m = tm.frames[i];
      REQUIRE(s.w == m.w);
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          CHECK(nonbackground(s, x, y) == (m.at(x, y, 0) != 0));
    }
  }
}

TEST_CASE("retention endpoints") {
  Image8 mask(20, 20, 1);
  draw_square(mask, 10, 10, 4, {255, 255, 255});
  CHECK(retention_metric(mask, 0, 0, 20, 20) == 1.0);
  CHECK(retention_metric(mask, 0, 0, 4, 4) == 0.0);
  Image8 empty(20, 20, 1);
  CHECK(retention_metric(empty, 0, 0, 5, 5) == 1.0);
}

TEST_CASE("centered 100-to-84 crops never lose interior sprites") {
  EmissionConfig e;
  e.render_size = 100;
  GroundState g;
  g.position << 0.0, 0.0;
  g.goal << 0.5, 0.5;
  Image8 mask = relevance_mask(g, e);
  for (int dx = 0; dx <= 16; ++dx)
    for (int dy = 0; dy <= 16; ++dy)
      CHECK(retention_metric(mask, dx, dy, 84, 84) == 1.0);
}

TEST_CASE("off-center corner states lose most sprite pixels to the crop") {
  EmissionConfig e;
  e.render_size = 100;
  e.layout = Layout::off_center;
  GroundState g;
  g.position << -0.93, -0.93;
  g.goal << 0.93, 0.93;
  Image8 mask = relevance_mask(g, e);
  double sum = 0;
  int n = 0;
  for (int dx = 0; dx <= 16; ++dx)
    for (int dy = 0; dy <= 16; ++dy) {
      sum += retention_metric(mask, dx, dy, 84, 84);
      ++n;
    }
  double expected = sum / n;
  CHECK(expected < 0.9);
  CHECK(expected > 0.0);
}

TEST_CASE("batch-to-matrix uses stack-major channel blocks in [0,1]") {
  ImageBatch b;
  b.stack = 2;
  Image8 f0(2, 2, 3), f1(2, 2, 3);
  f0.at(1, 0, 2) = 255;
  f1.at(0, 1, 0) = 51;
  b.frames = {f0, f1};
  Mat<double> m = to_matrix<double>(b);
  REQUIRE(m.rows() == 2 * 3 * 2 * 2);
  REQUIRE(m.cols() == 1);
  CHECK(m(((0 * 3 + 2) * 2 + 0) * 2 + 1, 0) == 1.0);
  CHECK(m(((1 * 3 + 0) * 2 + 1) * 2 + 0, 0) == doctest::Approx(0.2));
  CHECK(m.sum() == doctest::Approx(1.2));
}

TEST_CASE("gather pulls aligned observations out of batches") {
  ReplayBuffer buf(16);
  // two chained records via the env itself
  EmissionConfig e;
  e.render_size = 32;
  e.frame_stack = 2;
  e.action_repeat = 1;
  PointMassEnv env(e, 4);
  StepResult prev = env.reset(0);
  for (int t = 0; t < 4; ++t) {
    Eigen::VectorXd a = Eigen::VectorXd::Constant(2, 0.1);
    StepResult cur = env.step(a);
    TransitionRecord r;
    r.obs = prev.obs;
    r.next_obs = cur.obs;
    r.action = a;
    r.reward = cur.reward;
    r.done = cur.done;
    r.episode_id = 0;
    buf.push(r);
    prev = cur;
  }
  TransitionBatch tb = buf.sample(3, 1);
  ImageBatch cur = gather_obs(tb, false);
  ImageBatch nxt = gather_obs(tb, true);
  CHECK(cur.batch() == 3);
  CHECK(cur.stack == 2);
  CHECK(nxt.frames[0].px == tb.items[0]->next_obs.frames[0]->px);

  SequenceBatch sb = buf.sample_sequences(2, 2, 7);
  ImageBatch last = gather_seq_obs(sb, 2);
  CHECK(last.frames[0].px == sb.windows[0][1]->next_obs.frames[0]->px);
  CHECK_THROWS_AS(gather_seq_obs(sb, 3), UsageError);

  Mat<double> acts = actions_to_matrix<double>(tb);
  CHECK(acts.rows() == 2);
  CHECK(acts.cols() == 3);
  CHECK(acts(0, 0) == 0.1);
  Mat<double> rew = rewards_to_row<double>(tb);
  CHECK(rew.cols() == 3);
}

TEST_SUITE_END();
