#ifndef DLBC_POLICY_HPP_
#define DLBC_POLICY_HPP_

// Actor and critic networks.
//
// The actor composes a shared trunk with one deviation head per agent:
//   mean_i(o) = trunk(o) + scale * head_i(o)
// and a single learnable log-std shared by every agent. Because agents only
// differ through their means, every pairwise W2 distance (and so every SND
// level) is exactly linear in `scale`.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "dlbc/diversity.hpp"
#include "dlbc/error.hpp"
#include "dlbc/mlp.hpp"
#include "dlbc/tensor.hpp"

namespace dlbc {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

inline double log_prob(const DiagGaussian& dist, const Vector& action) {
  require(action.size() == dist.dims(), "log_prob: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index d = 0; d < action.size(); ++d) {
    const double z = (action[d] - dist.mean[d]) / dist.std[d];
    total += -0.5 * z * z - std::log(dist.std[d]) - kHalfLog2Pi;
  }
  return total;
}

inline double entropy(const DiagGaussian& dist) {
  double total = 0.0;
  for (Eigen::Index d = 0; d < dist.dims(); ++d) {
    total += 0.5 + kHalfLog2Pi + std::log(dist.std[d]);
  }
  return total;
}

namespace nn {

// Batch of diagonal Gaussians on the tape: mean and log_std are B x A.
struct GaussianBatch {
  Tensor mean;
  Tensor log_std;
};

// Per-row log density, B x 1. `actions` is treated as a constant.
inline Tensor log_prob(const GaussianBatch& dist, const Matrix& actions) {
  require(actions.rows() == dist.mean.rows() && actions.cols() == dist.mean.cols(),
          "log_prob: action shape mismatch");
  const Tensor a = Tensor::constant(actions);
  const Tensor z = (a - dist.mean) * exp(-dist.log_std);
  const double norm = -kHalfLog2Pi * static_cast<double>(actions.cols());
  return row_sum(square(z) * -0.5 - dist.log_std) + norm;
}

// Per-row entropy, B x 1.
inline Tensor entropy(const GaussianBatch& dist) {
  const double per_dim = 0.5 + kHalfLog2Pi;
  return row_sum(dist.log_std) +
         per_dim * static_cast<double>(dist.log_std.cols());
}

}  // namespace nn

struct ActorSpec {
  int obs_dim = 0;
  int action_dim = 2;
  std::vector<int> hidden = {64, 64};
  int num_agents = 1;
  double init_log_std = -0.5;

  void validate() const {
    require(obs_dim >= 1 && action_dim >= 1, "ActorSpec: bad dimensions");
    require(num_agents >= 1, "ActorSpec: need at least one agent");
    for (int h : hidden) require(h >= 1, "ActorSpec: hidden widths must be >= 1");
  }

  nn::MLPSpec trunk_spec() const {
    nn::MLPSpec s;
    s.widths.push_back(obs_dim);
    s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
    s.widths.push_back(action_dim);
    s.output_gain = 0.01;
    return s;
  }

  // Zero final layer: every agent starts out identical to the trunk.
  nn::MLPSpec head_spec() const {
    nn::MLPSpec s = trunk_spec();
    s.output_gain = 0.0;
    return s;
  }
};

class DLBCActor {
 public:
  DLBCActor() = default;

  DLBCActor(ActorSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
    spec_.validate();
    trunk_ = nn::MLP(spec_.trunk_spec(), rng);
    for (int i = 0; i < spec_.num_agents; ++i) {
      heads_.emplace_back(spec_.head_spec(), rng);
    }
    log_std_ = nn::Tensor::parameter(
        Matrix::Constant(1, spec_.action_dim, spec_.init_log_std));
  }

  const ActorSpec& spec() const { return spec_; }
  int num_agents() const { return spec_.num_agents; }
  double scale() const { return scale_; }
  void set_scale(double scale) {
    require(std::isfinite(scale) && scale >= 0.0,
            "DLBCActor: scale must be finite and nonnegative");
    scale_ = scale;
  }

  nn::MLP& trunk() { return trunk_; }
  const nn::MLP& trunk() const { return trunk_; }
  nn::MLP& head(int agent) { return heads_.at(check_agent(agent)); }
  const nn::MLP& head(int agent) const { return heads_.at(check_agent(agent)); }
  const nn::Tensor& log_std() const { return log_std_; }
  nn::Tensor& log_std() { return log_std_; }

  // Taped forward pass for one agent; the scale is a constant.
  nn::GaussianBatch forward(int agent, const nn::Tensor& obs) const {
    const auto& head = heads_.at(check_agent(agent));
    nn::Tensor mean = trunk_.forward(obs) + head.forward(obs) * scale_;
    return {mean, nn::broadcast_rows(log_std_, obs.rows())};
  }

  // Untaped evaluation at an explicit scale.
  AgentPolicyBatch evaluate(int agent, const Matrix& obs, double scale) const {
    const auto& head = heads_.at(check_agent(agent));
    Matrix trunk_out = trunk_.evaluate(obs);
    Matrix head_out = head.evaluate(obs);
    AgentPolicyBatch out;
    out.means = trunk_out + head_out * scale;
    out.stds = log_std_.value().array().exp().replicate(obs.rows(), 1);
    return out;
  }

  AgentPolicyBatch evaluate(int agent, const Matrix& obs) const {
    return evaluate(agent, obs, scale_);
  }

  PolicySnapshot snapshot(const Matrix& obs, double scale) const {
    PolicySnapshot snap;
    for (int i = 0; i < spec_.num_agents; ++i) {
      snap.agents.push_back(evaluate(i, obs, scale));
    }
    return snap;
  }

  std::vector<nn::Tensor> parameters() const {
    std::vector<nn::Tensor> out = trunk_.parameters();
    for (const auto& h : heads_) {
      auto p = h.parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    out.push_back(log_std_);
    return out;
  }

 private:
  std::size_t check_agent(int agent) const {
    require(agent >= 0 && agent < spec_.num_agents,
            "DLBCActor: unknown agent index " + std::to_string(agent));
    return static_cast<std::size_t>(agent);
  }

  ActorSpec spec_;
  nn::MLP trunk_;
  std::vector<nn::MLP> heads_;
  nn::Tensor log_std_;
  double scale_ = 1.0;
};

// One value network per agent.
class Critic {
 public:
  Critic() = default;

  Critic(int obs_dim, std::vector<int> hidden, int num_agents,
         std::mt19937_64& rng)
      : hidden_(std::move(hidden)) {
    require(num_agents >= 1, "Critic: need at least one agent");
    nn::MLPSpec s;
    s.widths.push_back(obs_dim);
    s.widths.insert(s.widths.end(), hidden_.begin(), hidden_.end());
    s.widths.push_back(1);
    s.output_gain = 1.0;
    for (int i = 0; i < num_agents; ++i) nets_.emplace_back(s, rng);
  }

  int num_agents() const { return static_cast<int>(nets_.size()); }
  const std::vector<int>& hidden() const { return hidden_; }
  nn::MLP& net(int agent) { return nets_.at(static_cast<std::size_t>(agent)); }
  const nn::MLP& net(int agent) const {
    require(agent >= 0 && agent < num_agents(), "Critic: unknown agent index");
    return nets_.at(static_cast<std::size_t>(agent));
  }

  nn::Tensor forward(int agent, const nn::Tensor& obs) const {
    return net(agent).forward(obs);
  }
  Matrix evaluate(int agent, const Matrix& obs) const {
    return net(agent).evaluate(obs);
  }

  std::vector<nn::Tensor> parameters() const {
    std::vector<nn::Tensor> out;
    for (const auto& n : nets_) {
      auto p = n.parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

 private:
  std::vector<int> hidden_;
  std::vector<nn::MLP> nets_;
};

}  // namespace dlbc

#endif  // DLBC_POLICY_HPP_
