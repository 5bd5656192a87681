#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "replab/autodiff.hpp"
#include "replab/common.hpp"
#include "replab/nn.hpp"
#include "replab/rng.hpp"

namespace replab {

template <typename T>
struct SacSpec {
  EncoderSpec enc;
  int action_dim = 2;
  int hidden = 256;       // width of critic and policy MLPs
  int n_layers = 3;       // affine maps per MLP head
  T gamma = T(0.99);
  T tau = T(0.005);
  T init_alpha = T(0.1);
  T log_std_min = T(-10);
  T log_std_max = T(2);
};

// One-sample soft state value: min-clipped Q minus alpha * log pi.
// qmin and logp are 1 x B, alpha is a 1 x 1 node.
template <typename T>
int soft_value_node(Tape<T>& t, int qmin, int logp, int alpha) {
  return t.sub(qmin, t.mul_scalar_node(logp, alpha));
}

// Nodes produced by one reparameterized draw from the squashed Gaussian
// policy.  `action` is d x B in (-1,1), `logp` is 1 x B.
template <typename T>
struct PolicySample {
  int action = 0;
  int logp = 0;
  int pre_tanh = 0;
  int log_std = 0;
};

// Soft actor-critic over a shared convolutional encoder.  Twin Q heads with
// EMA targets, a tanh-squashed Gaussian policy, and a learned temperature.
// The policy objective treats the encoder as a constant, so only critic and
// auxiliary gradients shape the representation.
template <typename T>
class SacAgent {
 public:
  void init(const SacSpec<T>& spec, uint64_t seed) {
    spec_ = spec;
    Rng rng(derive_seed(seed, "agent"));
    encoder_.init("encoder", spec.enc, rng);
    encoder_t_.init("encoder_t", spec.enc, rng);
    int latent = spec.enc.latent;
    int qin = latent + spec.action_dim;
    q1_.init("q1", qin, spec.hidden, 1, spec.n_layers, rng);
    q2_.init("q2", qin, spec.hidden, 1, spec.n_layers, rng);
    q1_t_.init("q1_t", qin, spec.hidden, 1, spec.n_layers, rng);
    q2_t_.init("q2_t", qin, spec.hidden, 1, spec.n_layers, rng);
    policy_.init("pi", latent, spec.hidden, 2 * spec.action_dim,
                 spec.n_layers, rng);
    log_alpha_.name = "log_alpha";
    log_alpha_.v = Mat<T>::Constant(1, 1, std::log(spec.init_alpha));
    sync_targets();
  }

  const SacSpec<T>& spec() const { return spec_; }
  Encoder<T>& encoder() { return encoder_; }
  Encoder<T>& target_encoder() { return encoder_t_; }
  Mlp<T>& policy() { return policy_; }
  Mlp<T>& q1() { return q1_; }
  Mlp<T>& q2() { return q2_; }
  Param<T>& log_alpha() { return log_alpha_; }
  T alpha() const { return std::exp(log_alpha_.v(0, 0)); }

  int encode(Tape<T>& t, Binding<T>& bind, const Mat<T>& obs,
             bool trainable) {
    return encoder_.fwd(t, bind, t.constant(obs), trainable);
  }

  int encode_target(Tape<T>& t, Binding<T>& bind, const Mat<T>& obs) {
    return encoder_t_.fwd(t, bind, t.constant(obs), false);
  }

  // head: 1 or 2.  `target` selects the EMA copy.
  int q_value(Tape<T>& t, Binding<T>& bind, int head, int latent, int action,
              bool target, bool trainable) {
    Mlp<T>& m = target ? (head == 1 ? q1_t_ : q2_t_)
                       : (head == 1 ? q1_ : q2_);
    return m.fwd(t, bind, t.vcat(latent, action), trainable);
  }

  PolicySample<T> policy_sample(Tape<T>& t, Binding<T>& bind, int latent,
                                const Mat<T>& eps, bool trainable) {
    int d = spec_.action_dim;
    if (eps.rows() != d || eps.cols() != t.val(latent).cols())
      throw ValidationError("policy_sample: eps must be action_dim x batch");
    int out = policy_.fwd(t, bind, latent, trainable);
    int mean = t.slice_rows(out, 0, d);
    int raw = t.slice_rows(out, d, d);
    T lo = spec_.log_std_min, hi = spec_.log_std_max;
    int log_std = t.affine(t.tanh_(raw), (hi - lo) / 2, (hi + lo) / 2);
    int eps_id = t.constant(eps);
    int u = t.add(mean, t.mul(t.exp_(log_std), eps_id));
    PolicySample<T> ps;
    ps.pre_tanh = u;
    ps.log_std = log_std;
    ps.action = t.tanh_(u);
    // log N(u; mean, std) reduces to -(0.5 eps^2 + log_std) per dim since
    // (u - mean)/std == eps by construction.
    int gauss = t.colwise_sum(
        t.sub(t.scale(t.mul(eps_id, eps_id), T(-0.5)), log_std));
    ps.logp = t.affine(t.add(gauss, tanh_correction(t, u)), T(1),
                       logp_shift(d));
    return ps;
  }

  // log pi(a | latent) for a fixed action in (-1,1)^d.  The action enters as
  // a constant; gradients flow through mean and log_std only.
  int policy_logp(Tape<T>& t, Binding<T>& bind, int latent, const Mat<T>& action,
                  bool trainable) {
    int d = spec_.action_dim;
    if (action.rows() != d || action.cols() != t.val(latent).cols())
      throw ValidationError("policy_logp: action must be action_dim x batch");
    Mat<T> u_val(d, action.cols());
    for (Eigen::Index i = 0; i < action.rows(); ++i)
      for (Eigen::Index j = 0; j < action.cols(); ++j) {
        T a = action(i, j);
        if (!(std::abs(a) < T(1)))
          throw ValidationError("policy_logp: action outside (-1,1)");
        u_val(i, j) = std::atanh(a);
      }
    int out = policy_.fwd(t, bind, latent, trainable);
    int mean = t.slice_rows(out, 0, d);
    int raw = t.slice_rows(out, d, d);
    T lo = spec_.log_std_min, hi = spec_.log_std_max;
    int log_std = t.affine(t.tanh_(raw), (hi - lo) / 2, (hi + lo) / 2);
    int u = t.constant(u_val);
    int z = t.div_elem(t.sub(u, mean), t.exp_(log_std));
    int gauss =
        t.colwise_sum(t.sub(t.scale(t.mul(z, z), T(-0.5)), log_std));
    return t.affine(t.add(gauss, tanh_correction(t, u)), T(1), logp_shift(d));
  }

  // y = r + gamma * (1 - done) * (min_i Qbar_i(s', a') - alpha logpi(a'|s')),
  // built entirely from constants and stop-gradded.  A precomputed EMA latent
  // for next_obs may be passed in so one encoding serves several graphs.
  int target_value(Tape<T>& t, Binding<T>& bind, const Mat<T>& rewards,
                   const Mat<T>& not_done, const Mat<T>& next_obs,
                   const Mat<T>& eps, const Mat<T>* next_latent = nullptr) {
    int sn = next_latent ? t.constant(*next_latent)
                         : encode_target(t, bind, next_obs);
    PolicySample<T> ps = policy_sample(t, bind, sn, eps, false);
    int qt1 = q_value(t, bind, 1, sn, ps.action, true, false);
    int qt2 = q_value(t, bind, 2, sn, ps.action, true, false);
    int v = soft_value_node(t, t.min_elem(qt1, qt2), ps.logp, alpha_node(t));
    int y = t.add(t.constant(rewards),
                  t.mul(t.constant(not_done), t.scale(v, spec_.gamma)));
    return t.stopgrad(y);
  }

  // Mean over batch and both heads of (Q - y)^2.  Encoder gradients flow
  // unless encoder_trainable is false.
  int critic_loss(Tape<T>& t, Binding<T>& bind, const Mat<T>& obs,
                  const Mat<T>& actions, const Mat<T>& rewards,
                  const Mat<T>& not_done, const Mat<T>& next_obs,
                  const Mat<T>& eps_next, bool encoder_trainable = true,
                  const Mat<T>* next_latent = nullptr) {
    int y = target_value(t, bind, rewards, not_done, next_obs, eps_next,
                         next_latent);
    int s = encode(t, bind, obs, encoder_trainable);
    int a = t.constant(actions);
    int q1v = q_value(t, bind, 1, s, a, false, true);
    int q2v = q_value(t, bind, 2, s, a, false, true);
    int d1 = t.sub(q1v, y);
    int d2 = t.sub(q2v, y);
    return t.scale(
        t.add(t.mean_all(t.mul(d1, d1)), t.mean_all(t.mul(d2, d2))),
        T(0.5));
  }

  // mean(alpha logpi - min_i Q_i); encoder and critics held constant.
  int actor_loss(Tape<T>& t, Binding<T>& bind, const Mat<T>& obs,
                 const Mat<T>& eps) {
    int s = encode(t, bind, obs, false);
    PolicySample<T> ps = policy_sample(t, bind, s, eps, true);
    int q1v = q_value(t, bind, 1, s, ps.action, false, false);
    int q2v = q_value(t, bind, 2, s, ps.action, false, false);
    int qmin = t.min_elem(q1v, q2v);
    return t.mean_all(
        t.sub(t.mul_scalar_node(ps.logp, alpha_node(t)), qmin));
  }

  // mean(-alpha (logpi + target_entropy)) with logpi detached; only
  // log_alpha is trainable.  target_entropy = -action_dim.
  int temperature_loss(Tape<T>& t, Binding<T>& bind, const Mat<T>& obs,
                       const Mat<T>& eps) {
    int s = encode(t, bind, obs, false);
    PolicySample<T> ps = policy_sample(t, bind, s, eps, false);
    int la = bind.use(t, log_alpha_, true);
    int alpha = t.exp_(la);
    int inner = t.affine(ps.logp, T(1), -T(spec_.action_dim));
    return t.scale(t.mean_all(t.mul_scalar_node(inner, alpha)), T(-1));
  }

  // Value-only action selection.  deterministic uses tanh(mean) exactly.
  Mat<T> act(const Mat<T>& obs, bool deterministic, Rng& rng) {
    Tape<T> t;
    Binding<T> bind;
    int s = encode(t, bind, obs, false);
    Mat<T> eps = Mat<T>::Zero(spec_.action_dim, obs.cols());
    if (!deterministic)
      for (Eigen::Index i = 0; i < eps.rows(); ++i)
        for (Eigen::Index j = 0; j < eps.cols(); ++j)
          eps(i, j) = T(rng.normal());
    PolicySample<T> ps = policy_sample(t, bind, s, eps, false);
    return t.val(ps.action);
  }

  int alpha_node(Tape<T>& t) const {
    return t.constant(Mat<T>::Constant(1, 1, alpha()));
  }

  std::vector<Param<T>*> encoder_params() {
    std::vector<Param<T>*> out;
    encoder_.collect(out);
    return out;
  }
  std::vector<Param<T>*> critic_params() {
    std::vector<Param<T>*> out;
    q1_.collect(out);
    q2_.collect(out);
    return out;
  }
  std::vector<Param<T>*> policy_params() {
    std::vector<Param<T>*> out;
    policy_.collect(out);
    return out;
  }
  std::vector<Param<T>*> alpha_params() { return {&log_alpha_}; }

  // Every learned tensor, online and target, for checkpointing.
  std::vector<Param<T>*> all_params() {
    std::vector<Param<T>*> out;
    encoder_.collect(out);
    q1_.collect(out);
    q2_.collect(out);
    policy_.collect(out);
    out.push_back(&log_alpha_);
    encoder_t_.collect(out);
    q1_t_.collect(out);
    q2_t_.collect(out);
    return out;
  }

  void sync_targets() {
    copy_params(target_list(), online_list());
  }

  void ema_step() {
    ema_update(target_list(), online_list(), spec_.tau);
  }

 private:
  int tanh_correction(Tape<T>& t, int u) {
    // sum_d 2u + 2 softplus(-2u); the constant -2 d ln2 lives in logp_shift.
    return t.colwise_sum(
        t.scale(t.add(u, t.softplus(t.scale(u, T(-2)))), T(2)));
  }

  T logp_shift(int d) const {
    return -T(0.5) * T(d) * std::log(T(2) * T(M_PI)) -
           T(2) * T(d) * std::log(T(2));
  }

  std::vector<Param<T>*> online_list() {
    std::vector<Param<T>*> out;
    encoder_.collect(out);
    q1_.collect(out);
    q2_.collect(out);
    return out;
  }
  std::vector<Param<T>*> target_list() {
    std::vector<Param<T>*> out;
    encoder_t_.collect(out);
    q1_t_.collect(out);
    q2_t_.collect(out);
    return out;
  }

  SacSpec<T> spec_;
  Encoder<T> encoder_, encoder_t_;
  Mlp<T> q1_, q2_, q1_t_, q2_t_, policy_;
  Param<T> log_alpha_;
};

}  // namespace replab
