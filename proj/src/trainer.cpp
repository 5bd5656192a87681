#include "replab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <utility>

#include <nlohmann/json.hpp>

#include "replab/aug.hpp"

namespace replab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Mat<Tf> normal_draws(int rows, int cols, Rng& rng) {
  Mat<Tf> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Tf(rng.normal());
  return m;
}

ImageBatch obs_to_batch(const PixelObservation& obs) {
  ImageBatch b;
  b.stack = obs.stack;
  b.frames.reserve(obs.frames.size());
  for (const auto& f : obs.frames) b.frames.push_back(*f);
  return b;
}

ImageBatch center_crop_batch(const ImageBatch& in, int out) {
  ImageBatch r;
  r.stack = in.stack;
  r.frames.reserve(in.frames.size());
  int x0 = (in.w() - out) / 2, y0 = (in.h() - out) / 2;
  for (const auto& f : in.frames) r.frames.push_back(crop(f, x0, y0, out, out));
  return r;
}

// intensity jitter would corrupt a relevance mask; only geometry carries over
bool spatial_kind(const std::string& k) {
  return k == "crop" || k == "shift" || k == "flip" || k == "rotate";
}

Mat<Tf> seq_actions(const SequenceBatch& sb, int h) {
  int b = static_cast<int>(sb.windows.size());
  int d = static_cast<int>(sb.windows[0][h]->action.size());
  Mat<Tf> m(d, b);
  for (int j = 0; j < b; ++j)
    for (int i = 0; i < d; ++i) m(i, j) = Tf(sb.windows[j][h]->action[i]);
  return m;
}

Mat<Tf> seq_rewards(const SequenceBatch& sb, int h) {
  int b = static_cast<int>(sb.windows.size());
  Mat<Tf> m(1, b);
  for (int j = 0; j < b; ++j) m(0, j) = Tf(sb.windows[j][h]->reward);
  return m;
}

void put_u64(std::string& s, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  s.append(b, 8);
}

void put_mat(std::string& s, const Mat<Tf>& m) {
  put_u64(s, static_cast<uint64_t>(m.rows()));
  put_u64(s, static_cast<uint64_t>(m.cols()));
  s.append(reinterpret_cast<const char*>(m.data()), sizeof(Tf) * m.size());
}

void put_image(std::string& s, const Image8& img) {
  put_u64(s, static_cast<uint64_t>(img.w));
  put_u64(s, static_cast<uint64_t>(img.h));
  put_u64(s, static_cast<uint64_t>(img.c));
  s.append(reinterpret_cast<const char*>(img.px.data()), img.px.size());
}

// bounds-checked cursor over a checkpoint blob
struct BlobReader {
  const uint8_t* p;
  size_t n, pos = 0;
  std::string file;

  BlobReader(const std::vector<uint8_t>& bytes, std::string f)
      : p(bytes.data()), n(bytes.size()), file(std::move(f)) {}

  void need(size_t k) {
    if (pos + k > n)
      throw IoError("checkpoint blob '" + file + "' is truncated");
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, p + pos, 8);
    pos += 8;
    return v;
  }
  void raw(void* dst, size_t k) {
    need(k);
    std::memcpy(dst, p + pos, k);
    pos += k;
  }
  Mat<Tf> mat() {
    uint64_t r = u64(), c = u64();
    if (r > (1u << 24) || c > (1u << 24))
      throw IoError("checkpoint blob '" + file + "' has an implausible shape");
    Mat<Tf> m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    raw(m.data(), sizeof(Tf) * m.size());
    return m;
  }
  Image8 image() {
    Image8 img;
    img.w = static_cast<int>(u64());
    img.h = static_cast<int>(u64());
    img.c = static_cast<int>(u64());
    if (img.w < 0 || img.h < 0 || img.c < 0 || img.w > 4096 || img.h > 4096 ||
        img.c > 4)
      throw IoError("checkpoint blob '" + file + "' has an implausible image");
    img.px.resize(static_cast<size_t>(img.w) * img.h * img.c);
    raw(img.px.data(), img.px.size());
    return img;
  }
  void done() {
    if (pos != n)
      throw IoError("checkpoint blob '" + file + "' has trailing bytes");
  }
};

std::string hash_of_file(const std::string& path) {
  std::vector<uint8_t> bytes = read_binary_file(path);
  return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace

TrainState::TrainState(const ExperimentConfig& config)
    : cfg_(config),
      buffer_(static_cast<size_t>(std::max<int64_t>(
          1, config.agent.buffer_capacity))) {
  validate_config(cfg_);
  hash_ = replab::config_hash(cfg_);
  for (const auto& a : cfg_.augmentations)
    if (a.kind == "crop") crop_out_ = a.out;
  if (cfg_.aux.options.kind == AuxKind::curl && crop_out_ > 0 &&
      cfg_.aux.options.augmentation != "crop")
    throw ConfigError(
        "curl views must use the crop transform when a crop augmentation is "
        "configured, otherwise their size no longer matches the encoder");

  env_ = make_env(cfg_.env.task, cfg_.env.emission, cfg_.env.episode_length);

  SacSpec<Tf> spec;
  spec.enc = encoder_spec_from(cfg_);
  spec.action_dim = env_->action_dim();
  spec.hidden = cfg_.agent.hidden;
  spec.n_layers = cfg_.agent.n_layers;
  spec.gamma = Tf(cfg_.agent.gamma);
  spec.tau = Tf(cfg_.agent.tau);
  spec.init_alpha = Tf(cfg_.agent.init_alpha);
  agent_.init(spec, cfg_.run.seed);

  AuxSizes<Tf> sz;
  sz.latent = cfg_.agent.latent;
  sz.action_dim = env_->action_dim();
  sz.trans_hidden = cfg_.aux.trans_hidden;
  sz.trans_layers = cfg_.aux.trans_layers;
  sz.reward_hidden = cfg_.aux.reward_hidden;
  sz.reward_layers = cfg_.aux.reward_layers;
  sz.proj_dim = cfg_.aux.proj_dim;
  if (cfg_.aux.options.kind == AuxKind::reconstruction)
    sz.dec = decoder_spec_for(spec.enc.in_h, spec.enc.in_c, cfg_.agent.latent,
                              cfg_.agent.filters);
  aux_.init(cfg_.aux.options, sz, cfg_.run.seed);
  record_masks_ = cfg_.aux.options.kind == AuxKind::reconstruction &&
                  cfg_.aux.options.partial;

  critic_opt_ = std::make_unique<Adam<Tf>>(critic_group(),
                                           Tf(cfg_.agent.critic_lr));
  actor_opt_ = std::make_unique<Adam<Tf>>(agent_.policy_params(),
                                          Tf(cfg_.agent.actor_lr));
  alpha_opt_ = std::make_unique<Adam<Tf>>(agent_.alpha_params(),
                                          Tf(cfg_.agent.alpha_lr), Tf(0.5));
  aux_opt_ = std::make_unique<Adam<Tf>>(aux_group(), Tf(cfg_.aux.lr));

  reset_env();
}

std::vector<Param<Tf>*> TrainState::critic_group() {
  std::vector<Param<Tf>*> out = agent_.encoder_params();
  for (Param<Tf>* p : agent_.critic_params()) out.push_back(p);
  return out;
}

std::vector<Param<Tf>*> TrainState::aux_group() {
  std::vector<Param<Tf>*> out;
  if (aux_.kind == AuxKind::none) return out;
  out = agent_.encoder_params();
  for (Param<Tf>* p : aux_.params()) out.push_back(p);
  return out;
}

std::vector<Param<Tf>*> TrainState::all_param_list() {
  std::vector<Param<Tf>*> out = agent_.all_params();
  for (Param<Tf>* p : aux_.all_params()) out.push_back(p);
  return out;
}

std::string TrainState::run_id() const {
  return hash_ + "-s" + std::to_string(cfg_.run.seed);
}

std::string TrainState::method() const {
  return cfg_.run.method.empty() ? to_string(cfg_.aux.options.kind)
                                 : cfg_.run.method;
}

void TrainState::reset_env() {
  StepResult sr = env_->reset(derive_seed(
      cfg_.run.seed, "episode", static_cast<uint64_t>(n_.episodes)));
  obs_ = sr.obs;
  if (record_masks_)
    mask_stack_.assign(static_cast<size_t>(obs_.stack),
                       std::make_shared<Image8>(sr.mask));
  ++n_.episodes;
}

Mat<Tf> TrainState::policy_input(const PixelObservation& obs) const {
  ImageBatch b = obs_to_batch(obs);
  if (crop_out_ > 0) b = center_crop_batch(b, crop_out_);
  return to_matrix<Tf>(b);
}

void TrainState::check_finite(const char* what, double v, const Mat<Tf>& obs,
                              const Mat<Tf>& actions,
                              const Mat<Tf>& rewards) const {
  if (std::isfinite(v)) return;
  std::string msg = std::string(what) + " is not finite at decision step " +
                    std::to_string(n_.decision_steps) + " (batch: obs mean " +
                    format_double(obs.cast<double>().mean()) + ", action [" +
                    format_double(actions.cast<double>().minCoeff()) + ", " +
                    format_double(actions.cast<double>().maxCoeff()) +
                    "], reward [" +
                    format_double(rewards.cast<double>().minCoeff()) + ", " +
                    format_double(rewards.cast<double>().maxCoeff()) + "])";
  throw RuntimeAbort(msg);
}

StepLog TrainState::step(const TrainCallbacks& cb) {
  if (env_->done()) reset_env();
  int64_t steps_before = n_.env_steps;
  StepLog log;

  Eigen::VectorXd action(env_->action_dim());
  Rng arng(derive_seed(cfg_.run.seed, "act",
                       static_cast<uint64_t>(n_.decision_steps)));
  if (n_.decision_steps < cfg_.agent.init_steps) {
    for (Eigen::Index i = 0; i < action.size(); ++i)
      action[i] = arng.uniform(-1.0, 1.0);
  } else {
    Mat<Tf> a = agent_.act(policy_input(obs_), false, arng);
    for (Eigen::Index i = 0; i < action.size(); ++i)
      action[i] = static_cast<double>(a(i, 0));
  }

  StepResult sr = env_->step(action);

  TransitionRecord rec;
  rec.obs = obs_;
  rec.next_obs = sr.obs;
  if (record_masks_) rec.obs_masks = mask_stack_;
  rec.action = action;
  rec.reward = sr.reward;
  rec.done = sr.done;
  rec.episode_id = n_.episodes - 1;
  buffer_.push(std::move(rec));

  obs_ = sr.obs;
  if (record_masks_) {
    mask_stack_.push_back(std::make_shared<Image8>(sr.mask));
    while (static_cast<int>(mask_stack_.size()) > obs_.stack)
      mask_stack_.erase(mask_stack_.begin());
  }

  n_.env_steps += cfg_.env.emission.action_repeat;
  ++n_.decision_steps;
  log.env_steps = n_.env_steps;
  log.decision_steps = n_.decision_steps;

  if (n_.decision_steps > cfg_.agent.init_steps) {
    gradient_phase(log);
    log.updated = true;
    if (cb.on_update) cb.on_update(log);
  }
  last_ = log;
  maybe_eval(steps_before, cb);
  return log;
}

void TrainState::gradient_phase(StepLog& log) {
  const int B = cfg_.agent.batch_size;
  const uint64_t master = cfg_.run.seed;
  const uint64_t d = static_cast<uint64_t>(n_.decision_steps);

  TransitionBatch tb = buffer_.sample(static_cast<size_t>(B),
                                      derive_seed(master, "sample", d));
  ImageBatch ob = gather_obs(tb, false);
  ImageBatch nb = gather_obs(tb, true);
  ImageBatch mb;
  if (record_masks_) mb = gather_masks(tb);
  for (size_t i = 0; i < cfg_.augmentations.size(); ++i) {
    const AugmentationSpec& a = cfg_.augmentations[i];
    if (a.kind == "none") continue;
    uint64_t so = derive_seed(master, "aug_obs", d * 16 + i);
    uint64_t sn = derive_seed(master, "aug_next", d * 16 + i);
    ob = apply_augmentation(ob, a, so);
    nb = apply_augmentation(nb, a, sn);
    // same seed as the observation, so each mask follows its frame's transform
    if (record_masks_ && spatial_kind(a.kind))
      mb = apply_augmentation(mb, a, so);
  }
  Mat<Tf> obs_m = to_matrix<Tf>(ob);
  Mat<Tf> next_m = to_matrix<Tf>(nb);
  Mat<Tf> act_m = actions_to_matrix<Tf>(tb);
  Mat<Tf> rew_m = rewards_to_row<Tf>(tb);
  Mat<Tf> nd_m = not_done_to_row<Tf>(tb);

  // one EMA encoding of next_obs feeds both the critic target and the
  // single-step auxiliary targets
  Mat<Tf> tgt_latent;
  {
    Tape<Tf> t;
    Binding<Tf> b;
    tgt_latent = t.val(agent_.encode_target(t, b, next_m));
  }

  if (cfg_.agent.critic_lr > 0) {
    Rng erng(derive_seed(master, "critic", d));
    Mat<Tf> eps = normal_draws(env_->action_dim(), B, erng);
    Tape<Tf> t;
    Binding<Tf> b;
    int loss = agent_.critic_loss(t, b, obs_m, act_m, rew_m, nd_m, next_m, eps,
                                  true, &tgt_latent);
    log.critic = static_cast<double>(t.val(loss)(0, 0));
    check_finite("critic loss", log.critic, obs_m, act_m, rew_m);
    t.backward(loss);
    critic_opt_->step(b.grads(t, critic_opt_->params()));
    ++n_.critic_updates;
  }

  int64_t k = n_.decision_steps - cfg_.agent.init_steps;
  if (k % cfg_.agent.target_update_freq == 0) {
    Rng prng(derive_seed(master, "pi", d));
    Mat<Tf> eps = normal_draws(env_->action_dim(), B, prng);
    if (cfg_.agent.actor_lr > 0) {
      Tape<Tf> t;
      Binding<Tf> b;
      int loss = agent_.actor_loss(t, b, obs_m, eps);
      log.actor = static_cast<double>(t.val(loss)(0, 0));
      check_finite("actor loss", log.actor, obs_m, act_m, rew_m);
      t.backward(loss);
      actor_opt_->step(b.grads(t, actor_opt_->params()));
      ++n_.actor_updates;
      log.actor_updated = true;
    }
    if (cfg_.agent.alpha_lr > 0) {
      Tape<Tf> t;
      Binding<Tf> b;
      int loss = agent_.temperature_loss(t, b, obs_m, eps);
      log.temperature = static_cast<double>(t.val(loss)(0, 0));
      check_finite("temperature loss", log.temperature, obs_m, act_m, rew_m);
      t.backward(loss);
      alpha_opt_->step(b.grads(t, alpha_opt_->params()));
    }
    agent_.ema_step();
    aux_.ema_step(Tf(cfg_.agent.tau));
    ++n_.ema_updates;
  }

  if (aux_.kind != AuxKind::none && cfg_.aux.lr > 0) {
    const AuxOptions& o = cfg_.aux.options;
    Tape<Tf> t;
    Binding<Tf> b;
    AuxGraph g;
    switch (aux_.kind) {
      case AuxKind::baseline: {
        BaselineCfg bc;
        bc.include_transition = o.include_transition;
        bc.include_reward = o.include_reward;
        bc.through_transition = o.through_transition;
        g = baseline_loss_graph(t, b, agent_.encoder(), agent_.target_encoder(),
                                aux_.trans, aux_.reward, obs_m, act_m, rew_m,
                                next_m, bc, &tgt_latent);
        break;
      }
      case AuxKind::rollout:
      case AuxKind::spr: {
        int H = o.horizon;
        SequenceBatch sb = buffer_.sample_sequences(
            static_cast<size_t>(B), H, derive_seed(master, "seq", d));
        std::vector<Mat<Tf>> obs_seq;
        obs_seq.reserve(H + 1);
        for (int h = 0; h <= H; ++h) {
          ImageBatch w = gather_seq_obs(sb, h);
          if (crop_out_ > 0) w = center_crop_batch(w, crop_out_);
          obs_seq.push_back(to_matrix<Tf>(w));
        }
        std::vector<Mat<Tf>> act_seq, rew_seq;
        for (int h = 0; h < H; ++h) {
          act_seq.push_back(seq_actions(sb, h));
          rew_seq.push_back(seq_rewards(sb, h));
        }
        if (aux_.kind == AuxKind::rollout)
          g = rollout_loss_graph(t, b, agent_.encoder(),
                                 agent_.target_encoder(), aux_.trans,
                                 aux_.reward, obs_seq, act_seq, rew_seq, H);
        else
          g = spr_loss_graph(t, b, agent_.encoder(), agent_.target_encoder(),
                             aux_.trans, aux_.heads, obs_seq, act_seq, H);
        break;
      }
      case AuxKind::contrastive:
        g = contrastive_loss_graph(t, b, agent_.encoder(),
                                   agent_.target_encoder(), aux_.trans, obs_m,
                                   act_m, next_m, Tf(o.temperature), true,
                                   &tgt_latent);
        break;
      case AuxKind::curl: {
        ImageBatch raw = gather_obs(tb, false);
        AugmentationSpec vs;
        vs.kind = o.augmentation;
        vs.out = crop_out_ > 0 ? crop_out_ : raw.w();
        ImageBatch v1 =
            apply_augmentation(raw, vs, derive_seed(master, "curl1", d));
        ImageBatch v2 =
            apply_augmentation(raw, vs, derive_seed(master, "curl2", d));
        g = curl_loss_graph(t, b, agent_.encoder(), agent_.target_encoder(),
                            aux_.curl_w, to_matrix<Tf>(v1), to_matrix<Tf>(v2));
        break;
      }
      case AuxKind::dbc: {
        Rng drng(derive_seed(master, "dbc", d));
        std::vector<int> pairing = random_derangement(B, drng);
        g = dbc_loss_graph(t, b, agent_.encoder(), aux_.gtrans, obs_m, act_m,
                           rew_m, Tf(cfg_.agent.gamma), pairing);
        break;
      }
      case AuxKind::value_aware: {
        Rng vrng(derive_seed(master, "va", d));
        Mat<Tf> eps = normal_draws(env_->action_dim(), B, vrng);
        ValueAwareCfg vc;
        vc.with_reward = o.with_reward;
        g = value_aware_loss_graph(t, b, agent_, aux_.trans, aux_.reward,
                                   obs_m, act_m, rew_m, next_m, eps, vc);
        break;
      }
      case AuxKind::reconstruction: {
        Mat<Tf> target = o.partial ? masked_pixels<Tf>(ob, mb) : obs_m;
        g = reconstruction_loss_graph(t, b, agent_.encoder(), aux_.decoder,
                                      obs_m, target);
        break;
      }
      case AuxKind::none:
        break;
    }
    int weighted = t.scale(g.loss, Tf(o.weight));
    log.aux = finalize_report(t, g);
    check_finite("auxiliary loss", log.aux.total, obs_m, act_m, rew_m);
    t.backward(weighted);
    aux_opt_->step(b.grads(t, aux_opt_->params()));
    ++n_.aux_updates;
  }
}

void TrainState::maybe_eval(int64_t steps_before, const TrainCallbacks& cb) {
  int64_t every = cfg_.run.eval_every;
  if (every <= 0) return;
  if (n_.env_steps / every == steps_before / every) return;

  EvalSummary s =
      evaluate(cfg_.run.eval_episodes,
               derive_seed(cfg_.run.seed, "evalset",
                           static_cast<uint64_t>(n_.env_steps)));
  RunRecord r;
  r.run_id = run_id();
  r.method = method();
  r.env = env_->name();
  r.seed = cfg_.run.seed;
  r.step = n_.env_steps;
  r.episode_return = s.mean_return;
  r.normalized_score = s.mean_normalized;
  r.losses["critic"] = last_.critic;
  r.losses["actor"] = last_.actor;
  r.losses["temperature"] = last_.temperature;
  r.losses["aux"] = last_.aux.total;
  for (const auto& [key, v] : last_.aux.components) r.losses["aux_" + key] = v;
  r.timestamp = static_cast<int64_t>(records_.size());
  r.config_hash = hash_;
  r.env_family = "synthetic";
  r.reward_structure = env_->reward_structure();
  r.distractors = env_->has_distractors();
  for (const auto& a : cfg_.augmentations)
    if (a.kind != "none") r.augmentations.push_back(a.kind);
  std::sort(r.augmentations.begin(), r.augmentations.end());
  r.preset = cfg_.run.preset;
  records_.push_back(r);

  if (!cfg_.run.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg_.run.out_dir, ec);
    append_records(cfg_.run.out_dir + "/records.jsonl", {r});
  }
  if (cb.on_record) cb.on_record(records_.back());
}

EvalSummary TrainState::evaluate(int episodes, uint64_t seed) {
  if (episodes < 1) throw UsageError("evaluate: episodes must be >= 1");
  std::unique_ptr<EnvAdapter> env =
      make_env(cfg_.env.task, cfg_.env.emission, cfg_.env.episode_length);
  EnvScoreSpec score;
  score.env = env->name();
  score.style = "synthetic";
  score.max_return = env->max_return();

  EvalSummary out;
  Rng unused(0);
  for (int ep = 0; ep < episodes; ++ep) {
    StepResult sr = env->reset(derive_seed(seed, "eval", ep));
    double ret = 0;
    while (!env->done()) {
      Mat<Tf> a = agent_.act(policy_input(sr.obs), true, unused);
      Eigen::VectorXd action(env->action_dim());
      for (Eigen::Index i = 0; i < action.size(); ++i)
        action[i] = static_cast<double>(a(i, 0));
      sr = env->step(action);
      ret += sr.reward;
    }
    out.returns.push_back(ret);
    out.normalized.push_back(normalize_score(ret, score));
  }
  for (double v : out.returns) out.mean_return += v;
  out.mean_return /= episodes;
  for (double v : out.normalized) out.mean_normalized += v;
  out.mean_normalized /= episodes;
  return out;
}

void TrainState::run(const TrainCallbacks& cb) {
  while (n_.env_steps < cfg_.run.total_steps) step(cb);
}

std::unique_ptr<TrainState> train(const ExperimentConfig& config,
                                  const TrainCallbacks& cb) {
  auto state = std::make_unique<TrainState>(config);
  state->run(cb);
  return state;
}

// ---------------------------------------------------------------------------
// Checkpoints.  A checkpoint directory holds a manifest plus content blobs;
// every blob is checksummed and the manifest embeds the full config, so a
// load either reproduces the exact training state or refuses.

void TrainState::save_checkpoint(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory: " + dir);

  std::string params_blob;
  {
    std::vector<Param<Tf>*> ps = all_param_list();
    put_u64(params_blob, ps.size());
    for (Param<Tf>* p : ps) {
      put_u64(params_blob, p->name.size());
      params_blob.append(p->name);
      put_mat(params_blob, p->v);
    }
  }

  std::string opt_blob;
  for (Adam<Tf>* opt :
       {critic_opt_.get(), actor_opt_.get(), alpha_opt_.get(),
        aux_opt_.get()}) {
    put_u64(opt_blob, static_cast<uint64_t>(opt->steps()));
    put_u64(opt_blob, opt->params().size());
    for (const Mat<Tf>& m : opt->moments1()) put_mat(opt_blob, m);
    for (const Mat<Tf>& v : opt->moments2()) put_mat(opt_blob, v);
  }

  std::string state_blob;
  put_u64(state_blob, static_cast<uint64_t>(obs_.h));
  put_u64(state_blob, static_cast<uint64_t>(obs_.w));
  put_u64(state_blob, static_cast<uint64_t>(obs_.stack));
  put_u64(state_blob, static_cast<uint64_t>(obs_.layout));
  put_u64(state_blob, obs_.frames.size());
  for (const auto& f : obs_.frames) put_image(state_blob, *f);
  put_u64(state_blob, mask_stack_.size());
  for (const auto& m : mask_stack_) put_image(state_blob, *m);

  std::string env_blob = env_->serialize_state();

  std::string records_blob;
  for (const RunRecord& r : records_) {
    records_blob += record_to_json(r);
    records_blob += '\n';
  }

  write_binary_file(dir + "/params.bin", params_blob.data(),
                    params_blob.size());
  write_binary_file(dir + "/opt.bin", opt_blob.data(), opt_blob.size());
  write_binary_file(dir + "/state.bin", state_blob.data(), state_blob.size());
  write_text_file(dir + "/env.txt", env_blob);
  write_text_file(dir + "/records.jsonl", records_blob);
  buffer_.save(dir + "/buffer");

  json manifest;
  manifest["format"] = 1;
  manifest["config"] = json::parse(config_to_canonical_json(cfg_));
  manifest["config_hash"] = hash_;
  json counters;
  counters["env_steps"] = n_.env_steps;
  counters["decision_steps"] = n_.decision_steps;
  counters["episodes"] = n_.episodes;
  counters["critic_updates"] = n_.critic_updates;
  counters["actor_updates"] = n_.actor_updates;
  counters["ema_updates"] = n_.ema_updates;
  counters["aux_updates"] = n_.aux_updates;
  manifest["counters"] = counters;
  json blobs = json::array();
  for (const char* file :
       {"params.bin", "opt.bin", "state.bin", "env.txt", "records.jsonl",
        "buffer/records.json", "buffer/frames.bin"}) {
    std::string path = dir + "/" + file;
    json jb;
    jb["file"] = file;
    jb["hash"] = hash_of_file(path);
    jb["bytes"] = fs::file_size(path);
    blobs.push_back(jb);
  }
  manifest["blobs"] = blobs;
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::unique_ptr<TrainState> load_checkpoint(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir + "/manifest.json"));
  } catch (const json::parse_error& e) {
    throw IoError("checkpoint manifest is not valid JSON: " +
                  std::string(e.what()));
  }
  if (!manifest.is_object() || manifest.value("format", 0) != 1)
    throw IoError("checkpoint manifest has an unsupported format");

  for (const auto& jb : manifest.at("blobs")) {
    std::string file = jb.at("file").get<std::string>();
    std::string path = dir + "/" + file;
    if (!fs::exists(path))
      throw IoError("checkpoint blob '" + file + "' is missing");
    std::vector<uint8_t> bytes = read_binary_file(path);
    if (bytes.size() != jb.at("bytes").get<uint64_t>() ||
        to_hex(fnv1a64(bytes.data(), bytes.size())) !=
            jb.at("hash").get<std::string>())
      throw IoError("checkpoint blob '" + file +
                    "' fails its checksum; refusing to load");
  }

  ExperimentConfig cfg = parse_config(manifest.at("config").dump());
  std::string want = manifest.at("config_hash").get<std::string>();
  std::string got = config_hash(cfg);
  if (got != want)
    throw IoError("checkpoint config hash mismatch: manifest says " + want +
                  " but the embedded config hashes to " + got);

  auto state = std::make_unique<TrainState>(cfg);

  const json& counters = manifest.at("counters");
  state->n_.env_steps = counters.at("env_steps").get<int64_t>();
  state->n_.decision_steps = counters.at("decision_steps").get<int64_t>();
  state->n_.episodes = counters.at("episodes").get<int64_t>();
  state->n_.critic_updates = counters.at("critic_updates").get<int64_t>();
  state->n_.actor_updates = counters.at("actor_updates").get<int64_t>();
  state->n_.ema_updates = counters.at("ema_updates").get<int64_t>();
  state->n_.aux_updates = counters.at("aux_updates").get<int64_t>();

  {
    std::vector<uint8_t> bytes = read_binary_file(dir + "/params.bin");
    BlobReader r(bytes, "params.bin");
    std::vector<Param<Tf>*> ps = state->all_param_list();
    uint64_t count = r.u64();
    if (count != ps.size())
      throw IoError("checkpoint stores " + std::to_string(count) +
                    " parameters but this model has " +
                    std::to_string(ps.size()));
    std::map<std::string, Mat<Tf>> by_name;
    for (uint64_t i = 0; i < count; ++i) {
      uint64_t len = r.u64();
      r.need(len);
      std::string name(reinterpret_cast<const char*>(r.p + r.pos), len);
      r.pos += len;
      by_name[name] = r.mat();
    }
    r.done();
    for (Param<Tf>* p : ps) {
      auto it = by_name.find(p->name);
      if (it == by_name.end())
        throw IoError("checkpoint is missing parameter '" + p->name + "'");
      if (it->second.rows() != p->v.rows() || it->second.cols() != p->v.cols())
        throw IoError("checkpoint parameter '" + p->name +
                      "' has the wrong shape");
      p->v = it->second;
    }
  }

  {
    std::vector<uint8_t> bytes = read_binary_file(dir + "/opt.bin");
    BlobReader r(bytes, "opt.bin");
    for (Adam<Tf>* opt :
         {state->critic_opt_.get(), state->actor_opt_.get(),
          state->alpha_opt_.get(), state->aux_opt_.get()}) {
      opt->set_steps(static_cast<int64_t>(r.u64()));
      uint64_t count = r.u64();
      if (count != opt->params().size())
        throw IoError("checkpoint optimizer state does not match this model");
      for (uint64_t i = 0; i < count; ++i) {
        Mat<Tf> m = r.mat();
        Mat<Tf>& dst = opt->moments1()[i];
        if (m.rows() != dst.rows() || m.cols() != dst.cols())
          throw IoError("checkpoint optimizer moment has the wrong shape");
        dst = m;
      }
      for (uint64_t i = 0; i < count; ++i) {
        Mat<Tf> v = r.mat();
        Mat<Tf>& dst = opt->moments2()[i];
        if (v.rows() != dst.rows() || v.cols() != dst.cols())
          throw IoError("checkpoint optimizer moment has the wrong shape");
        dst = v;
      }
    }
    r.done();
  }

  {
    std::vector<uint8_t> bytes = read_binary_file(dir + "/state.bin");
    BlobReader r(bytes, "state.bin");
    PixelObservation obs;
    obs.h = static_cast<int>(r.u64());
    obs.w = static_cast<int>(r.u64());
    obs.stack = static_cast<int>(r.u64());
    obs.layout = static_cast<Layout>(r.u64());
    uint64_t nframes = r.u64();
    for (uint64_t i = 0; i < nframes; ++i)
      obs.frames.push_back(std::make_shared<Image8>(r.image()));
    state->obs_ = std::move(obs);
    state->mask_stack_.clear();
    uint64_t nmasks = r.u64();
    for (uint64_t i = 0; i < nmasks; ++i)
      state->mask_stack_.push_back(std::make_shared<Image8>(r.image()));
    r.done();
  }

  state->env_->deserialize_state(read_text_file(dir + "/env.txt"));
  state->buffer_.load(dir + "/buffer");
  state->records_ = read_records(dir + "/records.jsonl");
  state->last_ = StepLog{};
  state->last_.env_steps = state->n_.env_steps;
  state->last_.decision_steps = state->n_.decision_steps;
  return state;
}

EvalSummary evaluate_checkpoint(const std::string& dir, int episodes,
                                uint64_t seed) {
  std::unique_ptr<TrainState> state = load_checkpoint(dir);
  return state->evaluate(episodes, seed);
}

}  // namespace replab
