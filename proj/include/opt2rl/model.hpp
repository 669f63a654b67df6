#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "opt2rl/env.hpp"
#include "opt2rl/tape.hpp"
#include "opt2rl/tsp.hpp"

namespace opt2rl::nn {

using ad::Var;

// Architecture hyperparameters plus the ablation switches:
//   use_gcn=false           drops the graph-convolution stack (z = x0)
//   use_lstm=false          drops sequence encoding (o = z, h_n = mean z)
//   use_bidirectional=false keeps only the forward LSTM
//   use_best_solution=false feeds h_n in place of h'_n
//   share_encoders=true     encodes S and S' with one parameter set
struct NetConfig {
  int d = 128;
  int gcn_layers = 3;
  double logit_clip = 10.0;
  bool use_gcn = true;
  bool use_lstm = true;
  bool use_bidirectional = true;
  bool use_best_solution = true;
  bool share_encoders = false;
};

void validate(const NetConfig& config);

struct LstmParams {
  Mat W_ih, W_hh;  // 4d x d, gate order i, f, g, o
  Mat b_ih, b_hh;  // 4d x 1
};

struct GcnLayer {
  Mat W_g;  // d x d
  Mat b_g;  // d x 1
};

struct EncoderParams {
  Mat W_x;  // d x 2
  Mat b_x;  // d x 1
  std::vector<GcnLayer> gcn;
  LstmParams fwd, bwd;
  Mat W_f, b_f;  // combiner, forward branch
  Mat W_b, b_b;  // combiner, backward branch
};

struct DecoderParams {
  Mat W_q, b_q;    // d x d, d x 1
  Mat W_o, b_o;    // d x d, d x 1
  Mat o0;          // d x 1, trainable start token for the query update
  Mat W_s, b_s;    // d/2 x d, d/2 x 1 (projection of h_n)
  Mat W_sp, b_sp;  // d/2 x d, d/2 x 1 (projection of h'_n)
  Mat K, Q;        // d x d pointing matrices
  Mat v;           // d x 1 pointing vector
};

struct ValueParams {
  Mat W_z, b_z;    // d x d, d x 1
  Mat W_r, b_r;    // 1 x d, 1 x 1
  Mat W_v, b_v;    // d/2 x d, d/2 x 1
  Mat W_vp, b_vp;  // d/2 x d, d/2 x 1
};

// All learnable tensors. The second encoder copy exists only when it can be
// used (separate encoders and the best solution actually fed in).
struct ModelParams {
  NetConfig config;
  EncoderParams enc_s;
  EncoderParams enc_best;
  DecoderParams dec;
  ValueParams val;

  bool has_second_encoder() const {
    return !config.share_encoders && config.use_best_solution;
  }

  // Calls f(name, Mat&) for every tensor present under `config`, in a fixed
  // order shared by init, Adam state, gradients and checkpoints.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f);
};

// Allocates zero tensors of the right shapes.
ModelParams make_params(const NetConfig& config);

// v and o0 ~ U(-1/sqrt(d), 1/sqrt(d)); every other tensor U(-1/sqrt(fan_in))
// with the fan of its matrix (biases included), matching the cited
// framework's defaults. Deterministic per seed.
ModelParams init_params(const NetConfig& config, std::uint64_t seed);

bool all_finite(const ModelParams& params);

// Tape-bound copies of the parameters, plus the leaf list aligned with
// ModelParams::tensors() order for gradient extraction.
struct BoundLstm {
  Var W_ih, W_hh, b_ih, b_hh;
};
struct BoundEncoder {
  Var W_x, b_x;
  std::vector<std::pair<Var, Var>> gcn;  // (W_g, b_g)
  BoundLstm fwd, bwd;
  Var W_f, b_f, W_b, b_b;
};
struct BoundParams {
  NetConfig config;
  BoundEncoder enc_s, enc_best;
  Var W_q, b_q, W_o, b_o, o0, W_s, b_s, W_sp, b_sp, K, Q, v;
  Var W_z, b_z, W_r, b_r, W_v, b_v, W_vp, b_vp;
  std::vector<Var> leaves;
};

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable = true);

// Node and tour-position embeddings of S, tour representations of S and S',
// the max-pooled graph vector and the assembled initial query.
struct StateEncoding {
  int n = 0;
  Var Z;       // d x n node embeddings of S
  Var O;       // d x n tour-position embeddings of S
  Var h_n;     // d x 1 tour representation of S
  Var h_best;  // d x 1 tour representation of S'
  Var z_g;     // d x 1 max pool of Z
  Var q0;      // d x 1 initial query
};

// Coordinates in tour order embedded to d dims: x0 = W_x x + b_x.
Var embed(ad::Tape& tape, const BoundEncoder& enc, const Instance& inst, const Tour& tour);

// Residual graph convolutions x^{l+1} = x^l + ReLU((W_g x^l + b_g) E~),
// where E~ is the normalized edge matrix in tour-position space.
Var gcn_forward(ad::Tape& tape, const BoundEncoder& enc, Var x0, Var norm_edges_pos,
                const NetConfig& config);

// Bidirectional LSTM over node embeddings; returns per-position combined
// outputs O and the tour representation h_n.
std::pair<Var, Var> sequence_encode(ad::Tape& tape, const BoundEncoder& enc, Var z,
                                    const NetConfig& config);

StateEncoding encode_state(ad::Tape& tape, const Instance& inst, const rl::SearchState& state,
                           const BoundParams& bp);

enum class DecodeMode { Sample, Greedy };

struct DecodeResult {
  Move move;
  Var log_prob;  // 1x1: log p(a1) + log p(a2)
  Var entropy;   // 1x1: H(step1) + H(step2)
  Var probs1, probs2;    // n x 1 step distributions
  Var scores1, scores2;  // n x 1 clipped pre-softmax scores
};

// Two pointing steps over the tour embeddings of S. Step 1 masks the last
// position (a move needs a successor); step 2 masks j <= a1. `forced`
// bypasses sampling and scores the given move.
DecodeResult policy_decode(ad::Tape& tape, const StateEncoding& enc, const BoundParams& bp,
                           std::mt19937_64& rng, DecodeMode mode, const Move* forced = nullptr);

// V = W_r ReLU(W_z(mean_i z_i + h_v) + b_z) + b_r.
Var value_estimate(ad::Tape& tape, const StateEncoding& enc, const BoundParams& bp);

// One environment step for a whole rollout batch on a single tape. States
// are encoded with batch entries as matrix columns, so the LSTM scan and the
// dense projections run once per batch instead of once per environment. The
// produced distributions match encode_state + policy_decode + value_estimate
// per state; instances must all share one size.
struct BatchStepResult {
  Move move;
  Var log_prob;  // 1x1
  Var entropy;   // 1x1
  Var value;     // 1x1
};

std::vector<BatchStepResult> batched_policy_value_step(
    ad::Tape& tape, const std::vector<const Instance*>& instances,
    const std::vector<const rl::SearchState*>& states, const BoundParams& bp,
    const std::vector<std::mt19937_64*>& rngs, DecodeMode mode);

template <typename Self, typename F>
void ModelParams::visit_impl(Self& self, F& f) {
  const NetConfig& c = self.config;
  auto enc = [&](const char* prefix, auto& e) {
    const std::string p(prefix);
    f(p + ".W_x", e.W_x);
    f(p + ".b_x", e.b_x);
    for (std::size_t l = 0; l < e.gcn.size(); ++l) {
      const std::string lp = p + ".gcn" + std::to_string(l);
      f(lp + ".W_g", e.gcn[l].W_g);
      f(lp + ".b_g", e.gcn[l].b_g);
    }
    if (c.use_lstm) {
      f(p + ".fwd.W_ih", e.fwd.W_ih);
      f(p + ".fwd.W_hh", e.fwd.W_hh);
      f(p + ".fwd.b_ih", e.fwd.b_ih);
      f(p + ".fwd.b_hh", e.fwd.b_hh);
      if (c.use_bidirectional) {
        f(p + ".bwd.W_ih", e.bwd.W_ih);
        f(p + ".bwd.W_hh", e.bwd.W_hh);
        f(p + ".bwd.b_ih", e.bwd.b_ih);
        f(p + ".bwd.b_hh", e.bwd.b_hh);
      }
      f(p + ".W_f", e.W_f);
      f(p + ".b_f", e.b_f);
      if (c.use_bidirectional) {
        f(p + ".W_b", e.W_b);
        f(p + ".b_b", e.b_b);
      }
    }
  };
  enc("enc_s", self.enc_s);
  if (self.has_second_encoder()) enc("enc_sp", self.enc_best);
  f("dec.W_q", self.dec.W_q);
  f("dec.b_q", self.dec.b_q);
  f("dec.W_o", self.dec.W_o);
  f("dec.b_o", self.dec.b_o);
  f("dec.o0", self.dec.o0);
  f("dec.W_s", self.dec.W_s);
  f("dec.b_s", self.dec.b_s);
  f("dec.W_sp", self.dec.W_sp);
  f("dec.b_sp", self.dec.b_sp);
  f("dec.K", self.dec.K);
  f("dec.Q", self.dec.Q);
  f("dec.v", self.dec.v);
  f("val.W_z", self.val.W_z);
  f("val.b_z", self.val.b_z);
  f("val.W_r", self.val.W_r);
  f("val.b_r", self.val.b_r);
  f("val.W_v", self.val.W_v);
  f("val.b_v", self.val.b_v);
  f("val.W_vp", self.val.W_vp);
  f("val.b_vp", self.val.b_vp);
}

}  // namespace opt2rl::nn
