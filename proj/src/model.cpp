#include "opt2rl/model.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>

#include "opt2rl/rng.hpp"

namespace opt2rl::nn {

void validate(const NetConfig& config) {
  if (config.d < 2 || config.d % 2 != 0)
    throw std::invalid_argument("NetConfig: d must be even and >= 2");
  if (config.gcn_layers < 0) throw std::invalid_argument("NetConfig: gcn_layers must be >= 0");
  if (!(config.logit_clip > 0.0)) throw std::invalid_argument("NetConfig: logit_clip must be > 0");
}

std::vector<std::pair<std::string, Mat*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Mat*>> out;
  visit([&](const std::string& name, Mat& m) { out.emplace_back(name, &m); });
  return out;
}

std::vector<std::pair<std::string, const Mat*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Mat*>> out;
  visit([&](const std::string& name, const Mat& m) { out.emplace_back(name, &m); });
  return out;
}

ModelParams make_params(const NetConfig& config) {
  validate(config);
  const int d = config.d;
  const int h = d / 2;
  ModelParams p;
  p.config = config;
  auto enc = [&](EncoderParams& e) {
    e.W_x = Mat::Zero(d, 2);
    e.b_x = Mat::Zero(d, 1);
    if (config.use_gcn) {
      e.gcn.resize(static_cast<std::size_t>(config.gcn_layers));
      for (auto& layer : e.gcn) {
        layer.W_g = Mat::Zero(d, d);
        layer.b_g = Mat::Zero(d, 1);
      }
    }
    if (config.use_lstm) {
      auto lstm = [&](LstmParams& l) {
        l.W_ih = Mat::Zero(4 * d, d);
        l.W_hh = Mat::Zero(4 * d, d);
        l.b_ih = Mat::Zero(4 * d, 1);
        l.b_hh = Mat::Zero(4 * d, 1);
      };
      lstm(e.fwd);
      e.W_f = Mat::Zero(d, d);
      e.b_f = Mat::Zero(d, 1);
      if (config.use_bidirectional) {
        lstm(e.bwd);
        e.W_b = Mat::Zero(d, d);
        e.b_b = Mat::Zero(d, 1);
      }
    }
  };
  enc(p.enc_s);
  if (p.has_second_encoder()) enc(p.enc_best);
  p.dec.W_q = Mat::Zero(d, d);
  p.dec.b_q = Mat::Zero(d, 1);
  p.dec.W_o = Mat::Zero(d, d);
  p.dec.b_o = Mat::Zero(d, 1);
  p.dec.o0 = Mat::Zero(d, 1);
  p.dec.W_s = Mat::Zero(h, d);
  p.dec.b_s = Mat::Zero(h, 1);
  p.dec.W_sp = Mat::Zero(h, d);
  p.dec.b_sp = Mat::Zero(h, 1);
  p.dec.K = Mat::Zero(d, d);
  p.dec.Q = Mat::Zero(d, d);
  p.dec.v = Mat::Zero(d, 1);
  p.val.W_z = Mat::Zero(d, d);
  p.val.b_z = Mat::Zero(d, 1);
  p.val.W_r = Mat::Zero(1, d);
  p.val.b_r = Mat::Zero(1, 1);
  p.val.W_v = Mat::Zero(h, d);
  p.val.b_v = Mat::Zero(h, 1);
  p.val.W_vp = Mat::Zero(h, d);
  p.val.b_vp = Mat::Zero(h, 1);
  return p;
}

ModelParams init_params(const NetConfig& config, std::uint64_t seed) {
  ModelParams p = make_params(config);
  std::mt19937_64 rng(seed);
  p.visit([&](const std::string& name, Mat& m) {
    // W_x / b_x take the coordinate fan-in of 2; everything else has fan d,
    // which also covers the explicit U(-1/sqrt(d)) init of v and o0.
    const bool coord = name.ends_with(".W_x") || name.ends_with(".b_x");
    const double bound = 1.0 / std::sqrt(coord ? 2.0 : static_cast<double>(config.d));
    for (long r = 0; r < m.rows(); ++r)
      for (long c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
  });
  return p;
}

bool all_finite(const ModelParams& params) {
  bool ok = true;
  params.visit([&](const std::string&, const Mat& m) { ok = ok && m.allFinite(); });
  return ok;
}

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  std::map<std::string, Var, std::less<>> by_name;
  BoundParams bp;
  bp.config = params.config;
  params.visit([&](const std::string& name, const Mat& m) {
    Var v = tape.leaf(m, trainable);
    bp.leaves.push_back(v);
    by_name.emplace(name, v);
  });
  auto at = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::logic_error("bind: missing tensor " + name);
    return it->second;
  };
  auto enc = [&](const std::string& p, BoundEncoder& e) {
    e.W_x = at(p + ".W_x");
    e.b_x = at(p + ".b_x");
    const std::size_t layers =
        (p == "enc_s" ? params.enc_s.gcn.size() : params.enc_best.gcn.size());
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string lp = p + ".gcn" + std::to_string(l);
      e.gcn.emplace_back(at(lp + ".W_g"), at(lp + ".b_g"));
    }
    if (params.config.use_lstm) {
      e.fwd = {at(p + ".fwd.W_ih"), at(p + ".fwd.W_hh"), at(p + ".fwd.b_ih"),
               at(p + ".fwd.b_hh")};
      e.W_f = at(p + ".W_f");
      e.b_f = at(p + ".b_f");
      if (params.config.use_bidirectional) {
        e.bwd = {at(p + ".bwd.W_ih"), at(p + ".bwd.W_hh"), at(p + ".bwd.b_ih"),
                 at(p + ".bwd.b_hh")};
        e.W_b = at(p + ".W_b");
        e.b_b = at(p + ".b_b");
      }
    }
  };
  enc("enc_s", bp.enc_s);
  if (params.has_second_encoder()) enc("enc_sp", bp.enc_best);
  bp.W_q = at("dec.W_q");
  bp.b_q = at("dec.b_q");
  bp.W_o = at("dec.W_o");
  bp.b_o = at("dec.b_o");
  bp.o0 = at("dec.o0");
  bp.W_s = at("dec.W_s");
  bp.b_s = at("dec.b_s");
  bp.W_sp = at("dec.W_sp");
  bp.b_sp = at("dec.b_sp");
  bp.K = at("dec.K");
  bp.Q = at("dec.Q");
  bp.v = at("dec.v");
  bp.W_z = at("val.W_z");
  bp.b_z = at("val.b_z");
  bp.W_r = at("val.W_r");
  bp.b_r = at("val.b_r");
  bp.W_v = at("val.W_v");
  bp.b_v = at("val.b_v");
  bp.W_vp = at("val.W_vp");
  bp.b_vp = at("val.b_vp");
  return bp;
}

Var embed(ad::Tape& tape, const BoundEncoder& enc, const Instance& inst, const Tour& tour) {
  const int n = inst.n();
  Mat coords(2, n);
  for (int p = 0; p < n; ++p) coords.col(p) = inst.coords.col(tour.order[static_cast<std::size_t>(p)]);
  return tape.add(tape.matmul(enc.W_x, tape.constant(std::move(coords))), enc.b_x);
}

Var gcn_forward(ad::Tape& tape, const BoundEncoder& enc, Var x0, Var norm_edges_pos,
                const NetConfig& config) {
  if (!config.use_gcn) return x0;
  Var x = x0;
  for (const auto& [W_g, b_g] : enc.gcn) {
    Var msg = tape.matmul(tape.add(tape.matmul(W_g, x), b_g), norm_edges_pos);
    x = tape.add(x, tape.relu(msg));
  }
  return x;
}

namespace {

struct LstmState {
  Var h, c;
  bool has = false;
};

LstmState lstm_step(ad::Tape& tape, const BoundLstm& p, Var x, const LstmState& prev, int d) {
  Var pre = tape.add(tape.add(tape.matmul(p.W_ih, x), p.b_ih), p.b_hh);
  if (prev.has) pre = tape.add(pre, tape.matmul(p.W_hh, prev.h));
  Var gi = tape.sigmoid(tape.rows(pre, 0, d));
  Var gf = tape.sigmoid(tape.rows(pre, d, d));
  Var gg = tape.tanh(tape.rows(pre, 2 * d, d));
  Var go = tape.sigmoid(tape.rows(pre, 3 * d, d));
  Var c = prev.has ? tape.add(tape.cmul(gf, prev.c), tape.cmul(gi, gg)) : tape.cmul(gi, gg);
  return {tape.cmul(go, tape.tanh(c)), c, true};
}

}  // namespace

std::pair<Var, Var> sequence_encode(ad::Tape& tape, const BoundEncoder& enc, Var z,
                                    const NetConfig& config) {
  const int n = static_cast<int>(z.cols());
  if (!config.use_lstm) return {z, tape.mean_cols(z)};
  const int d = config.d;

  // The scan is primed by one step on the closing node so the representation
  // wraps around the tour: (h_0, c_0) = RNN(z_n, 0).
  std::vector<Var> h_fwd(static_cast<std::size_t>(n));
  LstmState st = lstm_step(tape, enc.fwd, tape.col(z, n - 1), {}, d);
  for (int i = 0; i < n; ++i) {
    st = lstm_step(tape, enc.fwd, tape.col(z, i), st, d);
    h_fwd[static_cast<std::size_t>(i)] = st.h;
  }

  std::vector<Var> o(static_cast<std::size_t>(n));
  Var h_n;
  if (config.use_bidirectional) {
    std::vector<Var> h_bwd(static_cast<std::size_t>(n));
    LstmState sb = lstm_step(tape, enc.bwd, tape.col(z, 0), {}, d);
    for (int i = n - 1; i >= 0; --i) {
      sb = lstm_step(tape, enc.bwd, tape.col(z, i), sb, d);
      h_bwd[static_cast<std::size_t>(i)] = sb.h;
    }
    for (int i = 0; i < n; ++i)
      o[static_cast<std::size_t>(i)] = tape.tanh(
          tape.add(tape.add(tape.matmul(enc.W_f, h_fwd[static_cast<std::size_t>(i)]), enc.b_f),
                   tape.add(tape.matmul(enc.W_b, h_bwd[static_cast<std::size_t>(i)]), enc.b_b)));
    h_n = tape.add(h_fwd[static_cast<std::size_t>(n - 1)], h_bwd[static_cast<std::size_t>(n - 1)]);
  } else {
    for (int i = 0; i < n; ++i)
      o[static_cast<std::size_t>(i)] =
          tape.tanh(tape.add(tape.matmul(enc.W_f, h_fwd[static_cast<std::size_t>(i)]), enc.b_f));
    h_n = h_fwd[static_cast<std::size_t>(n - 1)];
  }
  return {tape.concat_cols(o), h_n};
}

namespace {

// Normalized edges permuted into tour-position space.
Mat position_edges(const Instance& inst, const Tour& tour) {
  const int n = inst.n();
  Mat e(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      e(p, q) = inst.norm_edges(tour.order[static_cast<std::size_t>(p)],
                                tour.order[static_cast<std::size_t>(q)]);
  return e;
}

struct TourRepr {
  Var Z, O, h_n;
};

TourRepr encode_tour(ad::Tape& tape, const BoundEncoder& enc, const Instance& inst,
                     const Tour& tour, const NetConfig& config) {
  Var x0 = embed(tape, enc, inst, tour);
  Var z = gcn_forward(tape, enc, x0, tape.constant(position_edges(inst, tour)), config);
  auto [o, h_n] = sequence_encode(tape, enc, z, config);
  return {z, o, h_n};
}

}  // namespace

StateEncoding encode_state(ad::Tape& tape, const Instance& inst, const rl::SearchState& state,
                           const BoundParams& bp) {
  const NetConfig& c = bp.config;
  StateEncoding enc;
  enc.n = inst.n();
  TourRepr cur = encode_tour(tape, bp.enc_s, inst, state.current, c);
  enc.Z = cur.Z;
  enc.O = cur.O;
  enc.h_n = cur.h_n;
  if (c.use_best_solution) {
    const BoundEncoder& e2 = c.share_encoders ? bp.enc_s : bp.enc_best;
    enc.h_best = encode_tour(tape, e2, inst, state.best, c).h_n;
  } else {
    enc.h_best = cur.h_n;
  }
  enc.z_g = tape.max_cols(enc.Z);
  Var h_state = tape.vconcat(tape.add(tape.matmul(bp.W_s, enc.h_n), bp.b_s),
                             tape.add(tape.matmul(bp.W_sp, enc.h_best), bp.b_sp));
  enc.q0 = tape.add(h_state, enc.z_g);
  return enc;
}

namespace {

int sample_index(const Mat& probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double cdf = 0.0;
  int last_positive = -1;
  for (long j = 0; j < probs.rows(); ++j) {
    const double p = probs(j, 0);
    if (p <= 0.0) continue;
    cdf += p;
    last_positive = static_cast<int>(j);
    if (cdf >= u) return last_positive;
  }
  return last_positive;  // guards the cdf < u fp corner
}

int greedy_index(const Mat& probs) {
  int best = 0;
  for (long j = 1; j < probs.rows(); ++j)
    if (probs(j, 0) > probs(best, 0)) best = static_cast<int>(j);
  return best;
}

}  // namespace

DecodeResult policy_decode(ad::Tape& tape, const StateEncoding& enc, const BoundParams& bp,
                           std::mt19937_64& rng, DecodeMode mode, const Move* forced) {
  const int n = enc.n;
  if (forced) check_move(*forced, n);
  const double clip = bp.config.logit_clip;
  Var ko = tape.matmul(bp.K, enc.O);

  auto pointing = [&](Var query, const std::vector<std::uint8_t>& allowed) {
    Var u = tape.vtmul(bp.v, tape.tanh(tape.add(ko, tape.matmul(bp.Q, query))));
    Var s = tape.scale(tape.tanh(u), clip);
    return std::pair<Var, Var>(s, tape.softmax_masked(s, allowed));
  };
  auto select = [&](const Mat& probs, int forced_idx) {
    if (forced) return forced_idx;
    return mode == DecodeMode::Greedy ? greedy_index(probs) : sample_index(probs, rng);
  };

  DecodeResult res;
  Var q1 = tape.tanh(tape.add(tape.add(tape.matmul(bp.W_q, enc.q0), bp.b_q),
                              tape.add(tape.matmul(bp.W_o, bp.o0), bp.b_o)));
  // Step 1: the last position is masked so step 2 always has support.
  std::vector<std::uint8_t> allowed1(static_cast<std::size_t>(n), 1);
  allowed1[static_cast<std::size_t>(n - 1)] = 0;
  auto [s1, p1] = pointing(q1, allowed1);
  const int a1 = select(p1.val(), forced ? forced->i : -1);

  Var q2 = tape.tanh(tape.add(tape.add(tape.matmul(bp.W_q, q1), bp.b_q),
                              tape.add(tape.matmul(bp.W_o, tape.col(enc.O, a1)), bp.b_o)));
  std::vector<std::uint8_t> allowed2(static_cast<std::size_t>(n), 0);
  for (int j = a1 + 1; j < n; ++j) allowed2[static_cast<std::size_t>(j)] = 1;
  auto [s2, p2] = pointing(q2, allowed2);
  const int a2 = select(p2.val(), forced ? forced->j : -1);

  res.move = Move{a1, a2};
  res.log_prob = tape.add(tape.log_pick(p1, a1), tape.log_pick(p2, a2));
  res.entropy = tape.add(tape.entropy(p1), tape.entropy(p2));
  res.scores1 = s1;
  res.scores2 = s2;
  res.probs1 = p1;
  res.probs2 = p2;
  return res;
}

Var value_estimate(ad::Tape& tape, const StateEncoding& enc, const BoundParams& bp) {
  Var h_v = tape.vconcat(tape.add(tape.matmul(bp.W_v, enc.h_n), bp.b_v),
                         tape.add(tape.matmul(bp.W_vp, enc.h_best), bp.b_vp));
  Var pooled = tape.add(tape.mean_cols(enc.Z), h_v);
  return tape.add(tape.matmul(bp.W_r, tape.relu(tape.add(tape.matmul(bp.W_z, pooled), bp.b_z))),
                  bp.b_r);
}

// ---------------------------------------------------------------------------
// Batched rollout step
// ---------------------------------------------------------------------------

namespace {

// Batched tour encoding: env b occupies columns [b*n, (b+1)*n) of X_all and
// column b of h_n.
struct BatchRepr {
  Var X_all;               // d x (B*n) node embeddings
  Var h_n;                 // d x B tour representations
  std::vector<Var> O_env;  // per-env d x n tour-position embeddings
};

BatchRepr encode_tours_batched(ad::Tape& tape, const BoundEncoder& enc,
                               const std::vector<const Instance*>& instances,
                               const std::vector<const Tour*>& tours, const NetConfig& config,
                               bool need_outputs) {
  const int B = static_cast<int>(instances.size());
  const int n = instances[0]->n();
  const int d = config.d;

  Mat coords_all(2, static_cast<long>(B) * n);
  for (int b = 0; b < B; ++b)
    for (int p = 0; p < n; ++p)
      coords_all.col(static_cast<long>(b) * n + p) =
          instances[static_cast<std::size_t>(b)]->coords.col(
              tours[static_cast<std::size_t>(b)]->order[static_cast<std::size_t>(p)]);
  Var x = tape.add(tape.matmul(enc.W_x, tape.constant(std::move(coords_all))), enc.b_x);

  if (config.use_gcn) {
    std::vector<Var> edge_consts;
    edge_consts.reserve(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b)
      edge_consts.push_back(tape.constant(position_edges(*instances[static_cast<std::size_t>(b)],
                                                         *tours[static_cast<std::size_t>(b)])));
    for (const auto& [W_g, b_g] : enc.gcn) {
      Var msg = tape.add(tape.matmul(W_g, x), b_g);
      std::vector<Var> agg;
      agg.reserve(static_cast<std::size_t>(B));
      for (int b = 0; b < B; ++b)
        agg.push_back(tape.matmul(tape.cols(msg, b * n, n), edge_consts[static_cast<std::size_t>(b)]));
      x = tape.add(x, tape.relu(tape.hconcat(agg)));
    }
  }

  BatchRepr out;
  out.X_all = x;

  if (!config.use_lstm) {
    std::vector<Var> means;
    means.reserve(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      Var zb = tape.cols(x, b * n, n);
      means.push_back(tape.mean_cols(zb));
      if (need_outputs) out.O_env.push_back(zb);
    }
    out.h_n = tape.hconcat(means);
    return out;
  }

  // Position-sliced inputs z_i across the batch: d x B each.
  std::vector<Var> z_pos(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<int> idx(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) idx[static_cast<std::size_t>(b)] = b * n + i;
    z_pos[static_cast<std::size_t>(i)] = tape.gather_cols(x, std::move(idx));
  }

  std::vector<Var> h_fwd(static_cast<std::size_t>(n));
  LstmState st = lstm_step(tape, enc.fwd, z_pos[static_cast<std::size_t>(n - 1)], {}, d);
  for (int i = 0; i < n; ++i) {
    st = lstm_step(tape, enc.fwd, z_pos[static_cast<std::size_t>(i)], st, d);
    h_fwd[static_cast<std::size_t>(i)] = st.h;
  }

  std::vector<Var> o(static_cast<std::size_t>(n));
  if (config.use_bidirectional) {
    std::vector<Var> h_bwd(static_cast<std::size_t>(n));
    LstmState sb = lstm_step(tape, enc.bwd, z_pos[0], {}, d);
    for (int i = n - 1; i >= 0; --i) {
      sb = lstm_step(tape, enc.bwd, z_pos[static_cast<std::size_t>(i)], sb, d);
      h_bwd[static_cast<std::size_t>(i)] = sb.h;
    }
    if (need_outputs)
      for (int i = 0; i < n; ++i)
        o[static_cast<std::size_t>(i)] = tape.tanh(
            tape.add(tape.add(tape.matmul(enc.W_f, h_fwd[static_cast<std::size_t>(i)]), enc.b_f),
                     tape.add(tape.matmul(enc.W_b, h_bwd[static_cast<std::size_t>(i)]), enc.b_b)));
    out.h_n = tape.add(h_fwd[static_cast<std::size_t>(n - 1)], h_bwd[static_cast<std::size_t>(n - 1)]);
  } else {
    if (need_outputs)
      for (int i = 0; i < n; ++i)
        o[static_cast<std::size_t>(i)] = tape.tanh(
            tape.add(tape.matmul(enc.W_f, h_fwd[static_cast<std::size_t>(i)]), enc.b_f));
    out.h_n = h_fwd[static_cast<std::size_t>(n - 1)];
  }

  if (need_outputs) {
    // o blocks are position-major (column i*B + b); regroup per environment.
    Var o_all = tape.hconcat(o);
    for (int b = 0; b < B; ++b) {
      std::vector<int> idx(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i * B + b;
      out.O_env.push_back(tape.gather_cols(o_all, std::move(idx)));
    }
  }
  return out;
}

}  // namespace

std::vector<BatchStepResult> batched_policy_value_step(
    ad::Tape& tape, const std::vector<const Instance*>& instances,
    const std::vector<const rl::SearchState*>& states, const BoundParams& bp,
    const std::vector<std::mt19937_64*>& rngs, DecodeMode mode) {
  const int B = static_cast<int>(instances.size());
  if (B == 0 || states.size() != static_cast<std::size_t>(B) ||
      rngs.size() != static_cast<std::size_t>(B))
    throw std::invalid_argument("batched_policy_value_step: batch size mismatch");
  const int n = instances[0]->n();
  for (const Instance* inst : instances)
    if (inst->n() != n)
      throw std::invalid_argument("batched_policy_value_step: mixed instance sizes");
  const NetConfig& config = bp.config;
  const double clip = config.logit_clip;

  std::vector<const Tour*> current(static_cast<std::size_t>(B)), best(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    current[static_cast<std::size_t>(b)] = &states[static_cast<std::size_t>(b)]->current;
    best[static_cast<std::size_t>(b)] = &states[static_cast<std::size_t>(b)]->best;
  }

  const BatchRepr cur = encode_tours_batched(tape, bp.enc_s, instances, current, config, true);
  Var h_best = cur.h_n;
  if (config.use_best_solution) {
    const BoundEncoder& e2 = config.share_encoders ? bp.enc_s : bp.enc_best;
    h_best = encode_tours_batched(tape, e2, instances, best, config, false).h_n;
  }

  // q0 = [W_s h_n + b_s ; W_sp h'_n + b_sp] + max-pool(Z), all d x B.
  std::vector<Var> z_g(static_cast<std::size_t>(B)), pooled(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    Var zb = tape.cols(cur.X_all, b * n, n);
    z_g[static_cast<std::size_t>(b)] = tape.max_cols(zb);
    pooled[static_cast<std::size_t>(b)] = tape.mean_cols(zb);
  }
  Var h_state = tape.vconcat(tape.add(tape.matmul(bp.W_s, cur.h_n), bp.b_s),
                             tape.add(tape.matmul(bp.W_sp, h_best), bp.b_sp));
  Var q0 = tape.add(h_state, tape.hconcat(z_g));

  // Values: V = W_r ReLU(W_z(mean z + h_v) + b_z) + b_r, one column per env.
  Var h_v = tape.vconcat(tape.add(tape.matmul(bp.W_v, cur.h_n), bp.b_v),
                         tape.add(tape.matmul(bp.W_vp, h_best), bp.b_vp));
  Var value_all = tape.add(
      tape.matmul(bp.W_r, tape.relu(tape.add(
                              tape.matmul(bp.W_z, tape.add(tape.hconcat(pooled), h_v)), bp.b_z))),
      bp.b_r);

  // Pointing step 1 (queries batched, scores per environment).
  Var q1 = tape.tanh(tape.add(tape.add(tape.matmul(bp.W_q, q0), bp.b_q),
                              tape.add(tape.matmul(bp.W_o, bp.o0), bp.b_o)));
  Var qq1 = tape.matmul(bp.Q, q1);
  std::vector<Var> ko(static_cast<std::size_t>(B));
  std::vector<Var> p1(static_cast<std::size_t>(B));
  std::vector<int> a1(static_cast<std::size_t>(B));
  std::vector<std::uint8_t> allowed1(static_cast<std::size_t>(n), 1);
  allowed1[static_cast<std::size_t>(n - 1)] = 0;
  for (int b = 0; b < B; ++b) {
    ko[static_cast<std::size_t>(b)] = tape.matmul(bp.K, cur.O_env[static_cast<std::size_t>(b)]);
    Var u = tape.vtmul(bp.v, tape.tanh(tape.add(ko[static_cast<std::size_t>(b)], tape.col(qq1, b))));
    p1[static_cast<std::size_t>(b)] =
        tape.softmax_masked(tape.scale(tape.tanh(u), clip), allowed1);
    const Mat& probs = p1[static_cast<std::size_t>(b)].val();
    a1[static_cast<std::size_t>(b)] = mode == DecodeMode::Greedy
                                          ? greedy_index(probs)
                                          : sample_index(probs, *rngs[static_cast<std::size_t>(b)]);
  }

  // Step 2: the query advances with each environment's selected position.
  std::vector<Var> o_sel(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b)
    o_sel[static_cast<std::size_t>(b)] =
        tape.col(cur.O_env[static_cast<std::size_t>(b)], a1[static_cast<std::size_t>(b)]);
  Var q2 = tape.tanh(tape.add(tape.add(tape.matmul(bp.W_q, q1), bp.b_q),
                              tape.add(tape.matmul(bp.W_o, tape.hconcat(o_sel)), bp.b_o)));
  Var qq2 = tape.matmul(bp.Q, q2);

  std::vector<BatchStepResult> out(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    std::vector<std::uint8_t> allowed2(static_cast<std::size_t>(n), 0);
    for (int j = a1[static_cast<std::size_t>(b)] + 1; j < n; ++j)
      allowed2[static_cast<std::size_t>(j)] = 1;
    Var u = tape.vtmul(bp.v, tape.tanh(tape.add(ko[static_cast<std::size_t>(b)], tape.col(qq2, b))));
    Var p2 = tape.softmax_masked(tape.scale(tape.tanh(u), clip), allowed2);
    const Mat& probs = p2.val();
    const int a2 = mode == DecodeMode::Greedy ? greedy_index(probs)
                                              : sample_index(probs, *rngs[static_cast<std::size_t>(b)]);
    BatchStepResult& res = out[static_cast<std::size_t>(b)];
    res.move = Move{a1[static_cast<std::size_t>(b)], a2};
    res.log_prob = tape.add(tape.log_pick(p1[static_cast<std::size_t>(b)], res.move.i),
                            tape.log_pick(p2, a2));
    res.entropy = tape.add(tape.entropy(p1[static_cast<std::size_t>(b)]), tape.entropy(p2));
    res.value = tape.col(value_all, b);
  }
  return out;
}

}  // namespace opt2rl::nn
