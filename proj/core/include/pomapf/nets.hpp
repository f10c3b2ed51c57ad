#pragma once

#include <string>
#include <vector>

#include "pomapf/grad_check.hpp"
#include "pomapf/gridworld.hpp"
#include "pomapf/params.hpp"
#include "pomapf/tape.hpp"

namespace pomapf {

// Network sizing. `hidden` is at once the slot encoding width, the GRU
// hidden size, and the attention width, since the self slot's encoding IS
// the fresh GRU state.
struct ModelConfig {
  int fov = 9;
  int K = 3;
  int conv1 = 32;
  int conv2 = 64;
  int hidden = 128;
  int heads = 4;
  int critic_hidden = 128;
  bool communication = false;

  void validate() const;
};

// Parameter construction (uniform fan-in weights, zero biases). Actor names
// live under "actor/", critic names under "critic/"; GCN weights exist only
// when communication is enabled.
void build_actor_params(ad::ParamStore& store, const ModelConfig& cfg, Rng& rng);
void build_critic_params(ad::ParamStore& store, const ModelConfig& cfg, Rng& rng);

struct EncodeOut {
  std::vector<ad::Var> slots;  // K slot encodings {1, hidden}
  ad::Var new_hidden;          // {1, hidden}, the GRU output
};

// Shared conv encoder over every valid slot; the self stream additionally
// passes through the GRU. Invalid slots encode to zeros.
EncodeOut encode(ad::Tape& tape, ad::Lift& actor, const Observation& obs,
                 const ad::Tensor& hidden, const ModelConfig& cfg);

// Self encoding queries the subgroup; masked slots never attend.
ad::Var actor_attend(ad::Tape& tape, ad::Lift& actor,
                     const std::vector<ad::Var>& slots,
                     const std::vector<bool>& valid, const ModelConfig& cfg);

struct PolicyOut {
  ad::Var probs;   // {1, 5}
  ad::Var logp;    // {1, 5}
  ad::Var logits;  // {1, 5}
};

PolicyOut policy_head(ad::Tape& tape, ad::Lift& actor, ad::Var features,
                      const ModelConfig& cfg);

// Two spectral-normalized graph convolution layers with sigmoid
// nonlinearity over the observation graph; exchanges features between
// agents that can see each other.
std::vector<ad::Var> communicate(ad::Tape& tape, ad::Lift& actor,
                                 const std::vector<ad::Var>& features,
                                 const ObservationGraph& graph,
                                 const ModelConfig& cfg);

// Q-values of all five self-actions with neighbor actions held fixed.
// slot_actions[k] is member k's action; the self entry (k = 0) is ignored
// and every valid neighbor slot must carry one.
ad::Var critic_q(ad::Tape& tape, ad::Lift& critic,
                 const std::vector<ad::Var>& slots,
                 const std::vector<int>& slot_actions,
                 const std::vector<bool>& valid, const ModelConfig& cfg);

// --- small helpers shared by training and evaluation ---------------------

ad::Tensor onehot_action(int action);  // {1, 5}
ad::Tensor normalized_adjacency(const ObservationGraph& graph);
int sample_from_probs(const ad::Tensor& probs, Rng& rng);
int greedy_from_probs(const ad::Tensor& probs, Rng& rng);  // random tie-break
double entropy_of(const ad::Tensor& probs);

// Stateful rollout-time policy: owns the per-agent recurrent state and
// rebuilds observations from the environment each step.
class NetworkPolicy {
 public:
  NetworkPolicy(const ad::ParamStore& actor, const ModelConfig& cfg);

  void reset(int agents);

  struct StepData {
    std::vector<Observation> obs;
    ObservationGraph graph;
    std::vector<ad::Tensor> hidden_before;  // {1, hidden} per agent
    std::vector<ad::Tensor> hidden_after;
    std::vector<ad::Tensor> probs;  // {1, 5} per agent
  };

  std::vector<int> act(const MapfInstance& instance, const JointState& state,
                       const HeuristicMapSet& heuristics, Rng& rng, bool greedy);

  const StepData& last() const { return last_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  const ad::ParamStore* params_;
  ModelConfig cfg_;
  std::vector<ad::Tensor> hidden_;
  StepData last_;
};

}  // namespace pomapf
