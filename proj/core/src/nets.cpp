#include "pomapf/nets.hpp"

#include <cmath>
#include <string>

namespace pomapf {

using ad::Lift;
using ad::ParamStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  if (fov < 3 || fov % 2 == 0)
    throw ConfigError("model: fov must be odd and >= 3");
  if (K < 1) throw ConfigError("model: K must be >= 1");
  if (conv1 < 1 || conv2 < 1 || hidden < 1 || critic_hidden < 1)
    throw ConfigError("model: sizes must be positive");
  if (heads < 1 || hidden % heads != 0 || critic_hidden % heads != 0)
    throw ConfigError("model: heads must divide hidden and critic_hidden");
}

void build_actor_params(ParamStore& s, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const int L = cfg.fov;
  s.add("actor/conv1/w", ad::uniform_fan_in({cfg.conv1, 3, 3, 3}, 27, rng));
  s.add("actor/conv1/b", Tensor({cfg.conv1}));
  s.add("actor/conv2/w",
        ad::uniform_fan_in({cfg.conv2, cfg.conv1, 3, 3}, cfg.conv1 * 9, rng));
  s.add("actor/conv2/b", Tensor({cfg.conv2}));
  const int flat = cfg.conv2 * L * L;
  s.add("actor/embed/w", ad::uniform_fan_in({flat, cfg.hidden}, flat, rng));
  s.add("actor/embed/b", Tensor({1, cfg.hidden}));
  s.add("actor/gru/w_ih",
        ad::uniform_fan_in({cfg.hidden, 3 * cfg.hidden}, cfg.hidden, rng));
  s.add("actor/gru/b_ih", Tensor({1, 3 * cfg.hidden}));
  s.add("actor/gru/w_hh",
        ad::uniform_fan_in({cfg.hidden, 3 * cfg.hidden}, cfg.hidden, rng));
  s.add("actor/gru/b_hh", Tensor({1, 3 * cfg.hidden}));
  for (const char* w : {"wq", "wk", "wv", "wo"})
    s.add(std::string("actor/mha/") + w,
          ad::uniform_fan_in({cfg.hidden, cfg.hidden}, cfg.hidden, rng));
  if (cfg.communication) {
    s.add("actor/gcn/w0",
          ad::uniform_fan_in({cfg.hidden, cfg.hidden}, cfg.hidden, rng));
    s.add("actor/gcn/w1",
          ad::uniform_fan_in({cfg.hidden, cfg.hidden}, cfg.hidden, rng));
  }
  s.add("actor/head/w1",
        ad::uniform_fan_in({cfg.hidden, cfg.hidden}, cfg.hidden, rng));
  s.add("actor/head/b1", Tensor({1, cfg.hidden}));
  s.add("actor/head/w2",
        ad::uniform_fan_in({cfg.hidden, kActionCount}, cfg.hidden, rng));
  s.add("actor/head/b2", Tensor({1, kActionCount}));
}

void build_critic_params(ParamStore& s, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const int in = cfg.hidden + kActionCount;
  const int ch = cfg.critic_hidden;
  s.add("critic/proj/w", ad::uniform_fan_in({in, ch}, in, rng));
  s.add("critic/proj/b", Tensor({1, ch}));
  for (const char* w : {"wq", "wk", "wv", "wo"})
    s.add(std::string("critic/mha/") + w, ad::uniform_fan_in({ch, ch}, ch, rng));
  s.add("critic/head/w1", ad::uniform_fan_in({ch, ch}, ch, rng));
  s.add("critic/head/b1", Tensor({1, ch}));
  s.add("critic/head/w2", ad::uniform_fan_in({ch, kActionCount}, ch, rng));
  s.add("critic/head/b2", Tensor({1, kActionCount}));
}

namespace {

ad::MhaParams lift_mha(Lift& p, const std::string& prefix) {
  return ad::MhaParams{p(prefix + "/wq"), p(prefix + "/wk"), p(prefix + "/wv"),
                       p(prefix + "/wo")};
}

std::vector<char> to_mask(const std::vector<bool>& valid) {
  std::vector<char> m(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) m[i] = valid[i] ? 1 : 0;
  return m;
}

}  // namespace

EncodeOut encode(Tape& tape, Lift& actor, const Observation& obs,
                 const Tensor& hidden, const ModelConfig& cfg) {
  if (obs.slot_count() != cfg.K)
    throw DimensionError("encode: observation has " +
                         std::to_string(obs.slot_count()) + " slots, expected " +
                         std::to_string(cfg.K));
  if (obs.fov_size != cfg.fov)
    throw DimensionError("encode: observation fov mismatch");
  if (hidden.ndim() != 2 || hidden.dim(0) != 1 || hidden.dim(1) != cfg.hidden)
    throw DimensionError("encode: hidden state must be {1, hidden}");
  if (!obs.valid.empty() && !obs.valid[0])
    throw ContractError("encode: self slot must be valid");

  EncodeOut out;
  out.slots.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    if (!obs.valid[k]) {
      out.slots.push_back(tape.constant(Tensor({1, cfg.hidden})));
      continue;
    }
    Var x = tape.constant(obs.feature_maps[k]);
    Var c1 =
        ad::relu(ad::conv2d(x, actor("actor/conv1/w"), actor("actor/conv1/b"), 1));
    Var c2 =
        ad::relu(ad::conv2d(c1, actor("actor/conv2/w"), actor("actor/conv2/b"), 1));
    Var e = ad::relu(
        ad::add_bias(ad::matmul(ad::flatten_row(c2), actor("actor/embed/w")),
                     actor("actor/embed/b")));
    out.slots.push_back(e);
  }
  ad::GruParams gp{actor("actor/gru/w_ih"), actor("actor/gru/b_ih"),
                   actor("actor/gru/w_hh"), actor("actor/gru/b_hh")};
  out.new_hidden = ad::gru_cell(out.slots[0], tape.constant(hidden), gp);
  out.slots[0] = out.new_hidden;
  return out;
}

Var actor_attend(Tape& tape, Lift& actor, const std::vector<Var>& slots,
                 const std::vector<bool>& valid, const ModelConfig& cfg) {
  (void)tape;
  if (slots.empty() || valid.size() != slots.size())
    throw ContractError("actor_attend: slot/mask size mismatch");
  if (!valid[0]) throw ContractError("actor_attend: self slot must be valid");
  Var kv = ad::stack_rows(slots);
  return ad::multi_head_attention(slots[0], kv, to_mask(valid),
                                  lift_mha(actor, "actor/mha"), cfg.heads);
}

PolicyOut policy_head(Tape& tape, Lift& actor, Var features,
                      const ModelConfig& cfg) {
  (void)tape;
  (void)cfg;
  Var h = ad::relu(ad::add_bias(ad::matmul(features, actor("actor/head/w1")),
                                actor("actor/head/b1")));
  Var logits =
      ad::add_bias(ad::matmul(h, actor("actor/head/w2")), actor("actor/head/b2"));
  return PolicyOut{ad::softmax_rows(logits), ad::log_softmax_rows(logits),
                   logits};
}

Tensor normalized_adjacency(const ObservationGraph& graph) {
  const int m = graph.agent_count;
  for (int i = 0; i < m; ++i) {
    if (graph.edge(i, i))
      throw ContractError("communicate: adjacency diagonal must be zero");
    for (int j = 0; j < m; ++j)
      if (graph.edge(i, j) != graph.edge(j, i))
        throw ContractError("communicate: adjacency must be symmetric");
  }
  // S = D^{-1/2} (A + I) D^{-1/2} with D the degree of A + I.
  std::vector<double> inv_sqrt_deg(m);
  for (int i = 0; i < m; ++i) {
    double deg = 1.0;
    for (int j = 0; j < m; ++j)
      if (graph.edge(i, j)) deg += 1.0;
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Tensor s({m, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const bool connected = (i == j) || graph.edge(i, j);
      if (connected) s.at(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
  return s;
}

std::vector<Var> communicate(Tape& tape, Lift& actor,
                             const std::vector<Var>& features,
                             const ObservationGraph& graph,
                             const ModelConfig& cfg) {
  (void)cfg;
  if (static_cast<int>(features.size()) != graph.agent_count)
    throw ContractError("communicate: feature count must match agent count");
  Var s = tape.constant(normalized_adjacency(graph));
  Var h0 = ad::stack_rows(features);
  Var h1 = ad::sigmoid(ad::matmul(s, ad::matmul(h0, actor("actor/gcn/w0"))));
  Var h2 = ad::sigmoid(ad::matmul(s, ad::matmul(h1, actor("actor/gcn/w1"))));
  std::vector<Var> out;
  out.reserve(features.size());
  for (int i = 0; i < graph.agent_count; ++i) out.push_back(ad::row(h2, i));
  return out;
}

Var critic_q(Tape& tape, Lift& critic, const std::vector<Var>& slots,
             const std::vector<int>& slot_actions,
             const std::vector<bool>& valid, const ModelConfig& cfg) {
  if (slots.empty() || valid.size() != slots.size() ||
      slot_actions.size() != slots.size())
    throw ContractError("critic_q: slot/action/mask size mismatch");
  if (!valid[0]) throw ContractError("critic_q: self slot must be valid");

  std::vector<Var> projected;
  projected.reserve(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (!valid[k]) {
      projected.push_back(tape.constant(Tensor({1, cfg.critic_hidden})));
      continue;
    }
    Tensor act({1, kActionCount});
    if (k > 0) {
      if (slot_actions[k] < 0 || slot_actions[k] >= kActionCount)
        throw ContractError("critic_q: valid neighbor slot " +
                            std::to_string(k) + " is missing an action");
      act = onehot_action(slot_actions[k]);
    }
    // Self slot carries a zero action block: its own action is the output axis.
    Var in = ad::concat_cols({slots[k], tape.constant(act)});
    projected.push_back(ad::relu(ad::add_bias(
        ad::matmul(in, critic("critic/proj/w")), critic("critic/proj/b"))));
  }
  Var att = ad::multi_head_attention(projected[0], ad::stack_rows(projected),
                                     to_mask(valid),
                                     lift_mha(critic, "critic/mha"), cfg.heads);
  Var h = ad::relu(ad::add_bias(ad::matmul(att, critic("critic/head/w1")),
                                critic("critic/head/b1")));
  return ad::add_bias(ad::matmul(h, critic("critic/head/w2")),
                      critic("critic/head/b2"));
}

Tensor onehot_action(int action) {
  if (action < 0 || action >= kActionCount)
    throw ContractError("onehot_action: action out of range");
  Tensor t({1, kActionCount});
  t.at(0, action) = 1.0;
  return t;
}

int sample_from_probs(const Tensor& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const int n = static_cast<int>(probs.numel());
  for (int a = 0; a < n; ++a) {
    acc += probs[a];
    if (u < acc) return a;
  }
  return n - 1;
}

int greedy_from_probs(const Tensor& probs, Rng& rng) {
  const int n = static_cast<int>(probs.numel());
  double best = probs[0];
  for (int a = 1; a < n; ++a) best = std::max(best, probs[a]);
  std::vector<int> ties;
  for (int a = 0; a < n; ++a)
    if (probs[a] == best) ties.push_back(a);
  if (ties.size() == 1) return ties[0];
  return ties[static_cast<std::size_t>(rng.uniform_int(0, ties.size() - 1))];
}

double entropy_of(const Tensor& probs) {
  double h = 0.0;
  for (std::size_t i = 0; i < probs.numel(); ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

NetworkPolicy::NetworkPolicy(const ParamStore& actor, const ModelConfig& cfg)
    : params_(&actor), cfg_(cfg) {
  cfg_.validate();
}

void NetworkPolicy::reset(int agents) {
  hidden_.assign(agents, Tensor({1, cfg_.hidden}));
}

std::vector<int> NetworkPolicy::act(const MapfInstance& instance,
                                    const JointState& state,
                                    const HeuristicMapSet& heuristics, Rng& rng,
                                    bool greedy) {
  const int m = state.agent_count();
  if (static_cast<int>(hidden_.size()) != m)
    throw ContractError("NetworkPolicy: reset() must match the agent count");

  last_.graph = observation_graph(state, cfg_.fov);
  last_.obs.clear();
  last_.hidden_before = hidden_;
  last_.hidden_after.clear();
  last_.probs.clear();

  Tape tape;
  Lift actor(tape, *params_, /*trainable=*/false);
  std::vector<Var> features;
  features.reserve(m);
  for (int i = 0; i < m; ++i) {
    last_.obs.push_back(observe(state, i, instance.map, heuristics, last_.graph,
                                cfg_.K, cfg_.fov));
    EncodeOut enc = encode(tape, actor, last_.obs.back(), hidden_[i], cfg_);
    features.push_back(
        actor_attend(tape, actor, enc.slots, last_.obs.back().valid, cfg_));
    last_.hidden_after.push_back(enc.new_hidden.val());
  }
  if (cfg_.communication)
    features = communicate(tape, actor, features, last_.graph, cfg_);

  std::vector<int> actions(m);
  for (int i = 0; i < m; ++i) {
    PolicyOut pol = policy_head(tape, actor, features[i], cfg_);
    last_.probs.push_back(pol.probs.val());
    actions[i] = greedy ? greedy_from_probs(pol.probs.val(), rng)
                        : sample_from_probs(pol.probs.val(), rng);
  }
  hidden_ = last_.hidden_after;
  return actions;
}

}  // namespace pomapf
