#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "replab/agent.hpp"
#include "replab/aug.hpp"
#include "replab/autodiff.hpp"
#include "replab/common.hpp"
#include "replab/nn.hpp"
#include "replab/rng.hpp"

namespace replab {

// ---------------------------------------------------------------------------
// Modules shared by the auxiliary objectives.

// Deterministic latent dynamics: shat' = MLP([s; a]).
template <typename T>
struct TransitionModel {
  Mlp<T> mlp;
  void init(const std::string& name, int latent, int action_dim, int hidden,
            int n_layers, Rng& rng) {
    mlp.init(name, latent + action_dim, hidden, latent, n_layers, rng);
  }
  int fwd(Tape<T>& t, Binding<T>& bind, int s, int a, bool trainable) {
    return mlp.fwd(t, bind, t.vcat(s, a), trainable);
  }
  void collect(std::vector<Param<T>*>& out) { mlp.collect(out); }
};

// Diagonal-Gaussian latent dynamics; sigma = softplus(raw) + 1e-4.
template <typename T>
struct GaussianTransitionModel {
  Mlp<T> mlp;
  int latent = 0;
  void init(const std::string& name, int latent_dim, int action_dim,
            int hidden, int n_layers, Rng& rng) {
    latent = latent_dim;
    mlp.init(name, latent_dim + action_dim, hidden, 2 * latent_dim, n_layers,
             rng);
  }
  std::pair<int, int> fwd(Tape<T>& t, Binding<T>& bind, int s, int a,
                          bool trainable) {
    int out = mlp.fwd(t, bind, t.vcat(s, a), trainable);
    int mu = t.slice_rows(out, 0, latent);
    int sigma = t.affine(t.softplus(t.slice_rows(out, latent, latent)), T(1),
                         T(1e-4));
    return {mu, sigma};
  }
  void collect(std::vector<Param<T>*>& out) { mlp.collect(out); }
};

// Scalar reward head on a latent.  n_layers == 1 gives the linear probe.
template <typename T>
struct RewardModel {
  Mlp<T> mlp;
  void init(const std::string& name, int latent, int hidden, int n_layers,
            Rng& rng) {
    mlp.init(name, latent, hidden, 1, n_layers, rng);
  }
  int fwd(Tape<T>& t, Binding<T>& bind, int s, bool trainable) {
    return mlp.fwd(t, bind, s, trainable);
  }
  void collect(std::vector<Param<T>*>& out) { mlp.collect(out); }
};

// Online/EMA projector pair plus predictor for the cosine objective.
template <typename T>
struct ProjectionHeads {
  Mlp<T> online, target, predictor;
  void init(const std::string& name, int latent, int proj, Rng& rng) {
    online.init(name + "_go", latent, proj, proj, 2, rng);
    target.init(name + "_gm", latent, proj, proj, 2, rng);
    predictor.init(name + "_q", proj, proj, proj, 2, rng);
    sync();
  }
  void sync() { copy_params(list(target), list(online)); }
  void ema_step(T tau) { ema_update(list(target), list(online), tau); }
  void collect(std::vector<Param<T>*>& out) {
    online.collect(out);
    predictor.collect(out);
  }
  void collect_all(std::vector<Param<T>*>& out) {
    online.collect(out);
    predictor.collect(out);
    target.collect(out);
  }

 private:
  static std::vector<Param<T>*> list(Mlp<T>& m) {
    std::vector<Param<T>*> out;
    m.collect(out);
    return out;
  }
};

// Bilinear similarity weight for the contrastive instance objective.
template <typename T>
struct BilinearW {
  Param<T> w;
  void init(const std::string& name, int latent, Rng& rng) {
    w.name = name;
    w.v.resize(latent, latent);
    init_uniform(w.v, rng, uniform_init_bound(latent));
  }
  void collect(std::vector<Param<T>*>& out) { out.push_back(&w); }
};

// ---------------------------------------------------------------------------
// Reports.

// Loss graph plus named scalar sub-terms (node ids) and value-level
// diagnostics, filled in while the graph is built.
struct AuxGraph {
  int loss = 0;
  std::vector<std::pair<std::string, int>> components;
  std::vector<std::pair<std::string, double>> diagnostics;
};

struct AuxLossReport {
  double total = 0;
  std::map<std::string, double> components;
  std::map<std::string, double> diagnostics;
};

template <typename T>
AuxLossReport finalize_report(Tape<T>& t, const AuxGraph& g) {
  AuxLossReport rep;
  rep.total = static_cast<double>(t.val(g.loss)(0, 0));
  for (const auto& [name, id] : g.components)
    rep.components[name] = static_cast<double>(t.val(id)(0, 0));
  for (const auto& [name, v] : g.diagnostics) rep.diagnostics[name] = v;
  return rep;
}

// Mean over latent dimensions of the per-dimension batch variance
// (population convention).  The collapse probe watches this.
template <typename T>
double latent_variance(const Mat<T>& latents) {
  if (latents.cols() == 0) throw ValidationError("latent_variance: empty");
  double acc = 0;
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    double m = 0, m2 = 0;
    for (Eigen::Index j = 0; j < latents.cols(); ++j) {
      double v = static_cast<double>(latents(i, j));
      m += v;
      m2 += v * v;
    }
    m /= static_cast<double>(latents.cols());
    m2 /= static_cast<double>(latents.cols());
    acc += m2 - m * m;
  }
  return acc / static_cast<double>(latents.rows());
}

// ---------------------------------------------------------------------------
// Small graph helpers.

// Mean over rows of log-sum-exp minus the diagonal logit: cross-entropy
// against diagonal positives (the row max is subtracted inside the LSE).
template <typename T>
int infonce_rows(Tape<T>& t, int logits) {
  return t.mean_all(t.sub(t.logsumexp_rows(logits), t.diag_as_col(logits)));
}

// Per-column cosine similarity, 1 x B.  Norms are smoothed by eps inside the
// square root, so all-zero columns yield 0 rather than NaN.
template <typename T>
int cosine_cols(Tape<T>& t, int a, int b, T eps = T(1e-12)) {
  int num = t.colwise_sum(t.mul(a, b));
  int den = t.mul(t.sqrt_(t.colwise_sum(t.mul(a, a)), eps),
                  t.sqrt_(t.colwise_sum(t.mul(b, b)), eps));
  return t.div_elem(num, den);
}

// W2 between diagonal Gaussians, column-wise: sqrt(|dmu|^2 + |dsigma|^2).
template <typename T>
int w2_cols(Tape<T>& t, int mu1, int sigma1, int mu2, int sigma2,
            T eps = T(1e-12)) {
  int dm = t.sub(mu1, mu2);
  int ds = t.sub(sigma1, sigma2);
  int ss = t.add(t.colwise_sum(t.mul(dm, dm)), t.colwise_sum(t.mul(ds, ds)));
  return t.sqrt_(ss, eps);
}

template <typename T>
T w2_diag_gaussian(const Eigen::Matrix<T, Eigen::Dynamic, 1>& mu1,
                   const Eigen::Matrix<T, Eigen::Dynamic, 1>& sigma1,
                   const Eigen::Matrix<T, Eigen::Dynamic, 1>& mu2,
                   const Eigen::Matrix<T, Eigen::Dynamic, 1>& sigma2) {
  if (mu1.size() != mu2.size() || sigma1.size() != sigma2.size() ||
      mu1.size() != sigma1.size())
    throw ValidationError("w2_diag_gaussian: dimension mismatch");
  for (Eigen::Index i = 0; i < sigma1.size(); ++i)
    if (!(sigma1(i) > T(0)) || !(sigma2(i) > T(0)))
      throw ValidationError("w2_diag_gaussian: sigma must be positive");
  return std::sqrt((mu1 - mu2).squaredNorm() + (sigma1 - sigma2).squaredNorm());
}

// Single-cycle permutation (Sattolo), hence a derangement for n >= 2.
inline std::vector<int> random_derangement(int n, Rng& rng) {
  if (n < 2) throw UsageError("derangement needs at least two samples");
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i)));
    std::swap(p[i], p[j]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Objectives.  Each builder assembles the loss on the caller's tape and
// reports named sub-terms.  Pixel matrices are stack*c*h*w x B in [0,1].

struct BaselineCfg {
  bool include_transition = true;
  bool include_reward = true;
  // true: reward head reads the predicted next latent; false: it reads the
  // EMA-encoded next observation, decoupling it from the dynamics model.
  bool through_transition = true;
  bool encoder_trainable = true;
};

template <typename T>
AuxGraph baseline_loss_graph(Tape<T>& t, Binding<T>& bind, Encoder<T>& enc,
                             Encoder<T>& enc_t, TransitionModel<T>& trans,
                             RewardModel<T>& reward, const Mat<T>& obs,
                             const Mat<T>& actions, const Mat<T>& rewards,
                             const Mat<T>& next_obs, const BaselineCfg& cfg,
                             const Mat<T>* target_latent = nullptr) {
  if (!cfg.include_transition && !cfg.include_reward)
    throw UsageError("baseline aux: both transition and reward terms disabled");
  AuxGraph g;
  int s = enc.fwd(t, bind, t.constant(obs), cfg.encoder_trainable);
  int a = t.constant(actions);
  int target = target_latent ? t.constant(*target_latent)
                             : enc_t.fwd(t, bind, t.constant(next_obs), false);
  int shat = trans.fwd(t, bind, s, a, true);
  int loss = -1;
  if (cfg.include_transition) {
    int d = t.sub(shat, target);
    int tm = t.mean_all(t.mul(d, d));
    g.components.emplace_back("transition_mse", tm);
    loss = tm;
  }
  if (cfg.include_reward) {
    int rin = cfg.through_transition ? shat : target;
    int rhat = reward.fwd(t, bind, rin, true);
    int dr = t.sub(rhat, t.constant(rewards));
    int rm = t.mean_all(t.mul(dr, dr));
    g.components.emplace_back("reward_mse", rm);
    loss = loss < 0 ? rm : t.add(loss, rm);
  }
  g.loss = loss;
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(s)));
  return g;
}

// Open-loop latent rollout over a window of H+1 observations.  Predictions
// feed back into the dynamics model; the reward head always reads the
// predicted latent.  Terms are averaged over the horizon, so H = 1
// reproduces the single-step objective exactly.
template <typename T>
AuxGraph rollout_loss_graph(Tape<T>& t, Binding<T>& bind, Encoder<T>& enc,
                            Encoder<T>& enc_t, TransitionModel<T>& trans,
                            RewardModel<T>& reward,
                            const std::vector<Mat<T>>& obs_seq,
                            const std::vector<Mat<T>>& act_seq,
                            const std::vector<Mat<T>>& rew_seq, int horizon,
                            bool encoder_trainable = true) {
  if (horizon < 1) throw UsageError("rollout aux: horizon must be >= 1");
  if (static_cast<int>(obs_seq.size()) != horizon + 1 ||
      static_cast<int>(act_seq.size()) != horizon ||
      static_cast<int>(rew_seq.size()) != horizon)
    throw UsageError("rollout aux: window does not match horizon");
  AuxGraph g;
  int s = enc.fwd(t, bind, t.constant(obs_seq[0]), encoder_trainable);
  int s0 = s;
  int tm_sum = -1, rm_sum = -1;
  for (int h = 1; h <= horizon; ++h) {
    s = trans.fwd(t, bind, s, t.constant(act_seq[h - 1]), true);
    int target = enc_t.fwd(t, bind, t.constant(obs_seq[h]), false);
    int d = t.sub(s, target);
    int tm = t.mean_all(t.mul(d, d));
    tm_sum = tm_sum < 0 ? tm : t.add(tm_sum, tm);
    int rhat = reward.fwd(t, bind, s, true);
    int dr = t.sub(rhat, t.constant(rew_seq[h - 1]));
    int rm = t.mean_all(t.mul(dr, dr));
    rm_sum = rm_sum < 0 ? rm : t.add(rm_sum, rm);
  }
  T inv = T(1) / T(horizon);
  g.loss = t.scale(t.add(tm_sum, rm_sum), inv);
  g.components.emplace_back("transition_mse", t.scale(tm_sum, inv));
  g.components.emplace_back("reward_mse", t.scale(rm_sum, inv));
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(s0)));
  return g;
}

// InfoNCE with predicted next latents as anchors and EMA-encoded true next
// latents as keys; positives on the diagonal.
template <typename T>
AuxGraph contrastive_loss_graph(Tape<T>& t, Binding<T>& bind, Encoder<T>& enc,
                                Encoder<T>& enc_t, TransitionModel<T>& trans,
                                const Mat<T>& obs, const Mat<T>& actions,
                                const Mat<T>& next_obs, T temperature,
                                bool encoder_trainable = true,
                                const Mat<T>* target_latent = nullptr) {
  if (!(temperature > T(0)))
    throw ValidationError("contrastive aux: temperature must be positive");
  AuxGraph g;
  int s = enc.fwd(t, bind, t.constant(obs), encoder_trainable);
  int anchors = trans.fwd(t, bind, s, t.constant(actions), true);
  int keys = target_latent ? t.constant(*target_latent)
                           : enc_t.fwd(t, bind, t.constant(next_obs), false);
  int logits = t.scale(t.matmul_tn(anchors, keys), T(1) / temperature);
  int loss = infonce_rows(t, logits);
  g.loss = loss;
  g.components.emplace_back("infonce", loss);
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(s)));
  g.diagnostics.emplace_back(
      "mean_positive_logit",
      static_cast<double>(t.val(logits).diagonal().mean()));
  return g;
}

// Instance-discrimination over two augmented views with a bilinear score
// q_i^T W k_j; keys come from the EMA encoder under stop-gradient.
template <typename T>
AuxGraph curl_loss_graph(Tape<T>& t, Binding<T>& bind, Encoder<T>& enc,
                         Encoder<T>& enc_t, BilinearW<T>& w,
                         const Mat<T>& view1, const Mat<T>& view2,
                         bool encoder_trainable = true) {
  if (view1.rows() != view2.rows() || view1.cols() != view2.cols())
    throw ValidationError("curl aux: view shapes differ");
  AuxGraph g;
  int q = enc.fwd(t, bind, t.constant(view1), encoder_trainable);
  int k = enc_t.fwd(t, bind, t.constant(view2), false);
  int wid = bind.use(t, w.w, true);
  int logits = t.matmul_tn(q, t.matmul(wid, k));
  int loss = infonce_rows(t, logits);
  g.loss = loss;
  g.components.emplace_back("curl_nce", loss);
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(q)));
  return g;
}

// Negated cosine between predicted and EMA-projected latents along an
// open-loop rollout; bounded in [-H, H].
template <typename T>
AuxGraph spr_loss_graph(Tape<T>& t, Binding<T>& bind, Encoder<T>& enc,
                        Encoder<T>& enc_t, TransitionModel<T>& trans,
                        ProjectionHeads<T>& heads,
                        const std::vector<Mat<T>>& obs_seq,
                        const std::vector<Mat<T>>& act_seq, int horizon,
                        bool encoder_trainable = true) {
  if (horizon < 1) throw UsageError("spr aux: horizon must be >= 1");
  if (static_cast<int>(obs_seq.size()) != horizon + 1 ||
      static_cast<int>(act_seq.size()) != horizon)
    throw UsageError("spr aux: window does not match horizon");
  AuxGraph g;
  int s = enc.fwd(t, bind, t.constant(obs_seq[0]), encoder_trainable);
  int s0 = s;
  int acc = -1;
  int zero_norm = 0;
  for (int h = 1; h <= horizon; ++h) {
    s = trans.fwd(t, bind, s, t.constant(act_seq[h - 1]), true);
    int pred = heads.predictor.fwd(
        t, bind, heads.online.fwd(t, bind, s, true), true);
    int tgt = heads.target.fwd(
        t, bind, enc_t.fwd(t, bind, t.constant(obs_seq[h]), false), false);
    const Mat<T>& pv = t.val(pred);
    const Mat<T>& tv = t.val(tgt);
    for (Eigen::Index j = 0; j < pv.cols(); ++j)
      if (pv.col(j).norm() < T(1e-9) || tv.col(j).norm() < T(1e-9))
        ++zero_norm;
    int cos = cosine_cols(t, pred, tgt);
    int m = t.mean_all(cos);
    acc = acc < 0 ? m : t.add(acc, m);
  }
  g.loss = t.scale(acc, T(-1));
  g.components.emplace_back("spr_cosine", g.loss);
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(s0)));
  g.diagnostics.emplace_back("zero_norm_columns",
                             static_cast<double>(zero_norm));
  return g;
}

// Bisimulation-style metric loss.  pairing[i] gives sample i's partner and
// must be a derangement; latents feeding the dynamics model are detached.
template <typename T>
AuxGraph dbc_loss_graph(Tape<T>& t, Binding<T>& bind, Encoder<T>& enc,
                        GaussianTransitionModel<T>& trans, const Mat<T>& obs,
                        const Mat<T>& actions, const Mat<T>& rewards, T gamma,
                        const std::vector<int>& pairing,
                        bool encoder_trainable = true) {
  int b = static_cast<int>(obs.cols());
  if (b < 2) throw UsageError("dbc aux: batch of one has no pairs");
  if (static_cast<int>(pairing.size()) != b)
    throw ValidationError("dbc aux: pairing size mismatch");
  for (int i = 0; i < b; ++i)
    if (pairing[i] < 0 || pairing[i] >= b || pairing[i] == i)
      throw ValidationError("dbc aux: pairing must be a derangement");
  AuxGraph g;
  int s = enc.fwd(t, bind, t.constant(obs), encoder_trainable);
  int sj = t.gather_cols(s, pairing);
  int l1 = t.colwise_sum(t.abs_(t.sub(s, sj)));
  Mat<T> rdiff(1, b);
  for (int i = 0; i < b; ++i)
    rdiff(0, i) = std::abs(rewards(0, i) - rewards(0, pairing[i]));
  int sbar = t.stopgrad(s);
  auto [mu, sigma] = trans.fwd(t, bind, sbar, t.constant(actions), true);
  int muj = t.gather_cols(mu, pairing);
  int sigmaj = t.gather_cols(sigma, pairing);
  int w2 = w2_cols(t, mu, sigma, muj, sigmaj);
  int resid =
      t.sub(t.sub(l1, t.constant(rdiff)), t.scale(w2, gamma));
  int loss = t.mean_all(t.mul(resid, resid));
  g.loss = loss;
  g.components.emplace_back("dbc", loss);
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(s)));
  g.diagnostics.emplace_back("mean_w2",
                             static_cast<double>(t.val(w2).mean()));
  g.diagnostics.emplace_back("mean_l1",
                             static_cast<double>(t.val(l1).mean()));
  return g;
}

struct ValueAwareCfg {
  bool with_reward = false;
  bool encoder_trainable = true;
};

// Matches the soft value of the predicted next latent to the (detached) soft
// value of the encoded next observation.  One action is drawn at the encoded
// next state and reused on both sides; critic and policy weights stay
// constant, so only the encoder and the dynamics model receive gradients.
template <typename T>
AuxGraph value_aware_loss_graph(Tape<T>& t, Binding<T>& bind,
                                SacAgent<T>& agent, TransitionModel<T>& trans,
                                RewardModel<T>& reward, const Mat<T>& obs,
                                const Mat<T>& actions, const Mat<T>& rewards,
                                const Mat<T>& next_obs, const Mat<T>& eps,
                                const ValueAwareCfg& cfg) {
  AuxGraph g;
  int alpha = agent.alpha_node(t);
  // Target side: online encoder under stop-gradient.
  int sn = agent.encode(t, bind, next_obs, false);
  PolicySample<T> ps = agent.policy_sample(t, bind, sn, eps, false);
  int qt = t.min_elem(agent.q_value(t, bind, 1, sn, ps.action, false, false),
                      agent.q_value(t, bind, 2, sn, ps.action, false, false));
  int v = t.stopgrad(soft_value_node(t, qt, ps.logp, alpha));
  // Predicted side: same sampled action, value taken at the model's output.
  Mat<T> a_tilde = t.val(ps.action);
  int s = agent.encode(t, bind, obs, cfg.encoder_trainable);
  int shat = trans.fwd(t, bind, s, t.constant(actions), true);
  int ac = t.constant(a_tilde);
  int qh = t.min_elem(agent.q_value(t, bind, 1, shat, ac, false, false),
                      agent.q_value(t, bind, 2, shat, ac, false, false));
  int logp_hat = agent.policy_logp(t, bind, shat, a_tilde, false);
  int vhat = soft_value_node(t, qh, logp_hat, alpha);
  int dv = t.sub(v, vhat);
  int vm = t.mean_all(t.mul(dv, dv));
  g.components.emplace_back("value_mse", vm);
  int loss = vm;
  if (cfg.with_reward) {
    int rhat = reward.fwd(t, bind, shat, true);
    int dr = t.sub(rhat, t.constant(rewards));
    int rm = t.mean_all(t.mul(dr, dr));
    g.components.emplace_back("reward_mse", rm);
    loss = t.add(loss, rm);
  }
  g.loss = loss;
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(s)));
  return g;
}

// Pixel reconstruction.  `target` is the full observation for dense mode or
// the mask-gated observation (off-mask pixels zero) for partial mode.
template <typename T>
AuxGraph reconstruction_loss_graph(Tape<T>& t, Binding<T>& bind,
                                   Encoder<T>& enc, Decoder<T>& dec,
                                   const Mat<T>& obs, const Mat<T>& target,
                                   bool encoder_trainable = true) {
  AuxGraph g;
  int s = enc.fwd(t, bind, t.constant(obs), encoder_trainable);
  int xhat = dec.fwd(t, bind, s, true);
  if (t.val(xhat).rows() != target.rows() ||
      t.val(xhat).cols() != target.cols())
    throw ValidationError("reconstruction aux: target shape mismatch");
  int d = t.sub(xhat, t.constant(target));
  int loss = t.mean_all(t.mul(d, d));
  g.loss = loss;
  g.components.emplace_back("recon_mse", loss);
  g.diagnostics.emplace_back("latent_variance", latent_variance(t.val(s)));
  return g;
}

// Mask-gated pixel target: kept pixels pass through scaled to [0,1], pixels
// off the mask become 0 (black).  Masks are single-channel, one per frame.
template <typename T>
Mat<T> masked_pixels(const ImageBatch& obs, const ImageBatch& masks) {
  if (obs.batch() != masks.batch() || obs.stack != masks.stack ||
      obs.h() != masks.h() || obs.w() != masks.w())
    throw ValidationError("masked_pixels: mask geometry mismatch");
  if (masks.c() != 1)
    throw ValidationError("masked_pixels: masks must be single-channel");
  Mat<T> out = to_matrix<T>(obs);
  int h = obs.h(), w = obs.w(), c = obs.c();
  for (int b = 0; b < obs.batch(); ++b)
    for (int s = 0; s < obs.stack; ++s) {
      const Image8& m = masks.frames[b * masks.stack + s];
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            if (m.at(x, y, 0) == 0)
              out(((s * c + ch) * h + y) * w + x, b) = T(0);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Catalog plumbing used by config and the trainer.

enum class AuxKind {
  none,
  baseline,
  rollout,
  contrastive,
  curl,
  spr,
  dbc,
  value_aware,
  reconstruction,
};

inline std::string to_string(AuxKind k) {
  switch (k) {
    case AuxKind::none: return "none";
    case AuxKind::baseline: return "baseline";
    case AuxKind::rollout: return "rollout";
    case AuxKind::contrastive: return "contrastive";
    case AuxKind::curl: return "curl";
    case AuxKind::spr: return "spr";
    case AuxKind::dbc: return "dbc";
    case AuxKind::value_aware: return "value_aware";
    case AuxKind::reconstruction: return "reconstruction";
  }
  throw ValidationError("bad aux kind");
}

inline AuxKind aux_kind_from_string(const std::string& s) {
  for (AuxKind k :
       {AuxKind::none, AuxKind::baseline, AuxKind::rollout,
        AuxKind::contrastive, AuxKind::curl, AuxKind::spr, AuxKind::dbc,
        AuxKind::value_aware, AuxKind::reconstruction})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown aux kind: " + s);
}

struct AuxOptions {
  AuxKind kind = AuxKind::none;
  double weight = 1.0;
  bool include_transition = true;
  bool include_reward = true;
  bool through_transition = true;
  int horizon = 3;
  double temperature = 0.1;
  bool with_reward = false;
  bool partial = false;  // reconstruction: mask-gated target
  std::string augmentation = "crop";  // curl view transform
};

template <typename T>
struct AuxSizes {
  int latent = 16;
  int action_dim = 2;
  int trans_hidden = 64;
  int trans_layers = 4;
  int reward_hidden = 128;
  int reward_layers = 3;
  int proj_dim = 16;
  DecoderSpec dec;
};

// Owns whichever modules the chosen objective needs.
template <typename T>
struct AuxModules {
  AuxKind kind = AuxKind::none;
  AuxOptions opts;
  TransitionModel<T> trans;
  GaussianTransitionModel<T> gtrans;
  RewardModel<T> reward;
  ProjectionHeads<T> heads;
  BilinearW<T> curl_w;
  Decoder<T> decoder;
  bool has_trans = false, has_gtrans = false, has_reward = false,
       has_heads = false, has_curl = false, has_decoder = false;

  void init(const AuxOptions& o, const AuxSizes<T>& sz, uint64_t seed) {
    kind = o.kind;
    opts = o;
    Rng rng(derive_seed(seed, "aux"));
    switch (kind) {
      case AuxKind::none:
        break;
      case AuxKind::baseline:
      case AuxKind::rollout:
        has_trans = true;
        has_reward = true;
        break;
      case AuxKind::contrastive:
        has_trans = true;
        break;
      case AuxKind::curl:
        has_curl = true;
        break;
      case AuxKind::spr:
        has_trans = true;
        has_heads = true;
        break;
      case AuxKind::dbc:
        has_gtrans = true;
        break;
      case AuxKind::value_aware:
        has_trans = true;
        has_reward = o.with_reward;
        break;
      case AuxKind::reconstruction:
        has_decoder = true;
        break;
    }
    if (has_trans)
      trans.init("aux_trans", sz.latent, sz.action_dim, sz.trans_hidden,
                 sz.trans_layers, rng);
    if (has_gtrans)
      gtrans.init("aux_gtrans", sz.latent, sz.action_dim, sz.trans_hidden,
                  sz.trans_layers, rng);
    if (has_reward)
      reward.init("aux_reward", sz.latent, sz.reward_hidden, sz.reward_layers,
                  rng);
    if (has_heads) heads.init("aux_proj", sz.latent, sz.proj_dim, rng);
    if (has_curl) curl_w.init("aux_curl_w", sz.latent, rng);
    if (has_decoder) decoder.init("aux_dec", sz.dec, rng);
  }

  // Trainable parameters (excludes the EMA projection target).
  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    if (has_trans) trans.collect(out);
    if (has_gtrans) gtrans.collect(out);
    if (has_reward) reward.collect(out);
    if (has_heads) heads.collect(out);
    if (has_curl) curl_w.collect(out);
    if (has_decoder) decoder.collect(out);
    return out;
  }

  // Every tensor, for checkpointing.
  std::vector<Param<T>*> all_params() {
    std::vector<Param<T>*> out;
    if (has_trans) trans.collect(out);
    if (has_gtrans) gtrans.collect(out);
    if (has_reward) reward.collect(out);
    if (has_heads) heads.collect_all(out);
    if (has_curl) curl_w.collect(out);
    if (has_decoder) decoder.collect(out);
    return out;
  }

  void ema_step(T tau) {
    if (has_heads) heads.ema_step(tau);
  }
};

}  // namespace replab
