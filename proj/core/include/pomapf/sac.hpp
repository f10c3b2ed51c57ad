#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "pomapf/nets.hpp"

namespace pomapf {

struct SacConfig {
  double gamma = 0.95;
  double alpha = 0.01;
  double tau = 0.005;
  double lr = 3e-4;
  int batch_size = 64;
  std::size_t buffer_capacity = 50000;
  int warmup_env_steps = 1000;
  int threads = 1;

  void validate() const;
};

// One environment transition for every agent, with everything the learner
// needs to rebuild both actor and critic passes: observations, recurrent
// states at both ends, the observation graphs, joint action, and shaped
// rewards.
struct Experience {
  std::vector<Observation> obs;
  std::vector<Observation> next_obs;
  std::vector<ad::Tensor> hidden;       // {1, hidden} per agent, at t
  std::vector<ad::Tensor> next_hidden;  // at t+1
  ObservationGraph graph;
  ObservationGraph next_graph;
  std::vector<int> actions;
  std::vector<double> rewards;  // already shaped
  bool done = false;

  int agent_count() const { return static_cast<int>(actions.size()); }
};

// Immutable per-episode context shared by all steps of that episode.
struct EpisodeContext {
  MapfInstance instance;
  HeuristicMapSet heuristics;
  int K;
  int fov;
};

// Bounded FIFO with uniform sampling. Steps are stored compactly (positions,
// hiddens, actions, rewards plus a shared context) and observations are
// rebuilt deterministically on materialization.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  struct CompactStep {
    std::shared_ptr<const EpisodeContext> ctx;
    std::vector<Coord> positions;
    std::vector<Coord> next_positions;
    std::vector<ad::Tensor> hidden;
    std::vector<ad::Tensor> next_hidden;
    std::vector<int> actions;
    std::vector<double> rewards;
    int timestep = 0;
    bool done = false;
  };

  void push(CompactStep step);
  std::size_t size() const { return steps_.size(); }
  std::size_t capacity() const { return capacity_; }

  Experience materialize(const CompactStep& step) const;
  std::vector<Experience> sample(int batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<CompactStep> steps_;
};

// Expectation of Q under the agent's own policy with neighbors fixed.
// probs must sum to 1 within 1e-6.
double counterfactual_baseline(const ad::Tensor& probs, const ad::Tensor& q);

struct TrainStepStats {
  bool ready = false;
  double loss_q = 0.0;
  double mean_advantage = 0.0;
  double entropy = 0.0;
};

// Soft actor-critic learner over the attention actor and agent-centered
// critic: one critic descent step, one actor step weighted by the
// counterfactual advantage, then Polyak target tracking.
class Learner {
 public:
  Learner(const ModelConfig& mcfg, const SacConfig& cfg, Rng& init_rng);

  double td_error(const Experience& e, int agent) const;
  double critic_loss(const std::vector<Experience>& batch) const;

  // Gradient of the critic objective w.r.t. critic parameters.
  ad::GradBuffer critic_gradient(const std::vector<Experience>& batch,
                                 double* loss_out) const;
  // Gradient of the negated actor objective w.r.t. actor parameters,
  // averaged over agents and batch.
  ad::GradBuffer policy_gradient(const std::vector<Experience>& batch,
                                 double* mean_advantage, double* entropy) const;
  // Same for a single agent of a single experience (no averaging).
  ad::GradBuffer policy_gradient_single(const Experience& e, int agent) const;

  void soft_update_targets();
  TrainStepStats train_step(ReplayBuffer& buffer, Rng& rng);

  ad::ParamStore& actor() { return actor_; }
  const ad::ParamStore& actor() const { return actor_; }
  ad::ParamStore& critic() { return critic_; }
  ad::ParamStore& target_actor() { return target_actor_; }
  ad::ParamStore& target_critic() { return target_critic_; }
  const ModelConfig& model_config() const { return mcfg_; }
  const SacConfig& config() const { return cfg_; }

  // Online and target parameters plus a model-config meta entry, in one
  // container. Loading restores all four stores.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  struct AgentEval {
    ad::Tensor probs;                  // {1,5} online policy at o
    ad::Tensor logp;                   // {1,5}
    std::vector<ad::Tensor> enc_slots; // K x {1,hidden} online encodings at o
    std::vector<int> slot_actions;     // actions of subgroup members at t
    ad::Tensor q_online;               // {1,5} online critic at o
    double target = 0.0;               // r + gamma * bootstrap (0 if done)
  };

  std::vector<AgentEval> evaluate_experience(const Experience& e) const;

  ModelConfig mcfg_;
  SacConfig cfg_;
  ad::ParamStore actor_, critic_, target_actor_, target_critic_;
  ad::Adam opt_actor_, opt_critic_;
};

// Model config round-trip through a checkpoint meta entry.
ad::Tensor model_config_to_tensor(const ModelConfig& cfg);
ModelConfig model_config_from_tensor(const ad::Tensor& t);

}  // namespace pomapf
