#ifndef DLBC_DIVERSITY_HPP_
#define DLBC_DIVERSITY_HPP_

// Behavioral-diversity metrics over Gaussian policies: Wasserstein-2
// distances, within-group and between-group system neural diversity (SND),
// and the scale factor that pins a combined SND to a target.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "dlbc/error.hpp"

namespace dlbc {

using Vector = Eigen::VectorXd;
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Action distribution for one observation: independent Gaussians per
// action dimension.
struct DiagGaussian {
  Vector mean;
  Vector std;

  DiagGaussian() = default;
  DiagGaussian(Vector mean_in, Vector std_in)
      : mean(std::move(mean_in)), std(std::move(std_in)) {
    validate();
  }

  Eigen::Index dims() const { return mean.size(); }

  void validate() const {
    require(mean.size() >= 1, "DiagGaussian: need at least one dimension");
    require(mean.size() == std.size(),
            "DiagGaussian: mean and std lengths differ");
    for (Eigen::Index d = 0; d < std.size(); ++d) {
      require(std::isfinite(mean[d]), "DiagGaussian: non-finite mean");
      require(std[d] > 0.0 && std::isfinite(std[d]),
              "DiagGaussian: std must be positive and finite");
    }
  }
};

// One agent's policy evaluated on a batch of B observations: row b holds the
// mean (resp. std) of the action distribution for observation b.
struct AgentPolicyBatch {
  Matrix means;
  Matrix stds;

  Eigen::Index batch() const { return means.rows(); }
  Eigen::Index action_dims() const { return means.cols(); }

  DiagGaussian at(Eigen::Index b) const {
    return DiagGaussian(means.row(b).transpose(), stds.row(b).transpose());
  }
};

// Every agent's policy on the same observation batch.
struct PolicySnapshot {
  std::vector<AgentPolicyBatch> agents;

  std::size_t num_agents() const { return agents.size(); }

  void validate() const {
    require(!agents.empty(), "PolicySnapshot: no agents");
    const auto batch = agents.front().batch();
    const auto dims = agents.front().action_dims();
    for (const auto& a : agents) {
      require(a.batch() == batch && a.stds.rows() == batch,
              "PolicySnapshot: agents disagree on batch size");
      require(a.action_dims() == dims && a.stds.cols() == dims,
              "PolicySnapshot: agents disagree on action dims");
      require((a.stds.array() > 0.0).all(),
              "PolicySnapshot: stds must be positive");
    }
  }
};

// Disjoint cover of agents {0..N-1} by groups {0..K-1}.
class GroupPartition {
 public:
  GroupPartition() = default;

  explicit GroupPartition(std::vector<std::size_t> assignment)
      : assignment_(std::move(assignment)) {
    require(!assignment_.empty(), "GroupPartition: no agents");
    std::size_t k = 0;
    for (auto g : assignment_) k = std::max(k, g + 1);
    groups_.assign(k, {});
    for (std::size_t agent = 0; agent < assignment_.size(); ++agent) {
      groups_[assignment_[agent]].push_back(agent);
    }
    for (std::size_t g = 0; g < k; ++g) {
      require(!groups_[g].empty(),
              "GroupPartition: group " + std::to_string(g) + " is empty");
    }
  }

  // Builds a partition from explicit member lists; rejects overlaps and gaps.
  static GroupPartition from_groups(
      const std::vector<std::vector<std::size_t>>& groups) {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    std::vector<std::size_t> assignment(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      require(!groups[g].empty(), "GroupPartition: empty group");
      for (auto agent : groups[g]) {
        require(agent < n, "GroupPartition: agent index out of range");
        require(assignment[agent] == std::numeric_limits<std::size_t>::max(),
                "GroupPartition: agent assigned to more than one group");
        assignment[agent] = g;
      }
    }
    return GroupPartition(std::move(assignment));
  }

  std::size_t num_agents() const { return assignment_.size(); }
  std::size_t num_groups() const { return groups_.size(); }
  std::size_t group_of(std::size_t agent) const { return assignment_.at(agent); }
  const std::vector<std::size_t>& members(std::size_t group) const {
    return groups_.at(group);
  }
  const std::vector<std::size_t>& assignment() const { return assignment_; }

  friend bool operator==(const GroupPartition& a, const GroupPartition& b) {
    return a.assignment_ == b.assignment_;
  }

 private:
  std::vector<std::size_t> assignment_;
  std::vector<std::vector<std::size_t>> groups_;
};

enum class IntraAggregation { kMean, kAgentWeighted };

struct DLBCParams {
  double snd_des = 0.3;
  double alpha = 0.5;
  double denom_floor = 1e-8;
  double max_scale = 1e3;
  IntraAggregation intra_aggregation = IntraAggregation::kMean;

  void validate() const {
    require(std::isfinite(snd_des) && snd_des >= 0.0,
            "DLBCParams: snd_des must be >= 0");
    require(alpha >= 0.0 && alpha <= 1.0, "DLBCParams: alpha outside [0,1]");
    require(denom_floor > 0.0, "DLBCParams: denom_floor must be > 0");
    require(max_scale > 0.0, "DLBCParams: max_scale must be > 0");
  }
};

struct SNDReport {
  std::vector<double> intra_per_group;
  double intra = 0.0;  // aggregated over groups
  double inter = 0.0;
  double alpha = 0.0;  // effective weight; 0 for single-group control
  double combined = 0.0;
  double scale = 0.0;
};

// ---------------------------------------------------------------------------
// Wasserstein-2

inline double w2_diag(const DiagGaussian& p, const DiagGaussian& q) {
  require(p.dims() == q.dims(), "w2_diag: dimension mismatch");
  const double mean_term = (p.mean - q.mean).squaredNorm();
  const double cov_term = (p.std - q.std).squaredNorm();
  return std::sqrt(mean_term + cov_term);
}

namespace detail {

constexpr double kPsdTolerance = 1e-10;
constexpr double kSymmetryTolerance = 1e-9;

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  require(eig.info() == Eigen::Success,
          std::string("w2_full: eigendecomposition failed for ") + what);
  Eigen::VectorXd values = eig.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    require(values[i] >= -kPsdTolerance,
            std::string("w2_full: ") + what + " is not positive semidefinite");
    values[i] = std::sqrt(std::max(values[i], 0.0));
  }
  return eig.eigenvectors() * values.asDiagonal() *
         eig.eigenvectors().transpose();
}

inline void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  require(m.rows() == m.cols(), std::string("w2_full: ") + what + " not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTolerance * scale,
          std::string("w2_full: ") + what + " is not symmetric");
}

}  // namespace detail

// Bures form: sqrt(|m1-m2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)).
inline double w2_full(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                      const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2) {
  require(mean1.size() == mean2.size(), "w2_full: mean dimension mismatch");
  require(cov1.rows() == mean1.size() && cov2.rows() == mean2.size(),
          "w2_full: covariance dimension mismatch");
  detail::check_symmetric(cov1, "cov1");
  detail::check_symmetric(cov2, "cov2");

  const Eigen::MatrixXd root1 = detail::psd_sqrt(cov1, "cov1");
  Eigen::MatrixXd cross = root1 * cov2 * root1;
  cross = 0.5 * (cross + cross.transpose());
  detail::psd_sqrt(cov2, "cov2");  // PSD check only
  const Eigen::MatrixXd cross_root = detail::psd_sqrt(cross, "cross term");

  const double trace_term =
      std::max(0.0, cov1.trace() + cov2.trace() - 2.0 * cross_root.trace());
  return std::sqrt((mean1 - mean2).squaredNorm() + trace_term);
}

// ---------------------------------------------------------------------------
// SND

// Per-observation W2 averaged uniformly over the batch.
inline double mean_pairwise_w2(const AgentPolicyBatch& a,
                               const AgentPolicyBatch& b) {
  require(a.batch() > 0, "mean_pairwise_w2: empty observation batch");
  require(a.batch() == b.batch() && a.stds.rows() == b.stds.rows(),
          "mean_pairwise_w2: batch size mismatch");
  require(a.action_dims() == b.action_dims(),
          "mean_pairwise_w2: action dims mismatch");
  double total = 0.0;
  for (Eigen::Index row = 0; row < a.batch(); ++row) {
    const double mean_term = (a.means.row(row) - b.means.row(row)).squaredNorm();
    const double cov_term = (a.stds.row(row) - b.stds.row(row)).squaredNorm();
    total += std::sqrt(mean_term + cov_term);
  }
  return total / static_cast<double>(a.batch());
}

namespace detail {

inline void check_members(const std::vector<std::size_t>& group,
                          const PolicySnapshot& snapshot, const char* op) {
  require(!group.empty(), std::string(op) + ": empty group");
  std::set<std::size_t> seen;
  for (auto agent : group) {
    require(agent < snapshot.num_agents(),
            std::string(op) + ": agent index out of range");
    require(seen.insert(agent).second,
            std::string(op) + ": duplicate agent in group");
  }
}

}  // namespace detail

inline double snd_intra(const std::vector<std::size_t>& group,
                        const PolicySnapshot& snapshot) {
  detail::check_members(group, snapshot, "snd_intra");
  const std::size_t n = group.size();
  if (n == 1) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += mean_pairwise_w2(snapshot.agents[group[i]],
                                snapshot.agents[group[j]]);
    }
  }
  return 2.0 / (static_cast<double>(n) * static_cast<double>(n - 1)) * total;
}

inline double snd_inter(const std::vector<std::size_t>& group_a,
                        const std::vector<std::size_t>& group_b,
                        const PolicySnapshot& snapshot) {
  detail::check_members(group_a, snapshot, "snd_inter");
  detail::check_members(group_b, snapshot, "snd_inter");
  for (auto a : group_a) {
    require(std::find(group_b.begin(), group_b.end(), a) == group_b.end(),
            "snd_inter: groups overlap");
  }
  double total = 0.0;
  for (auto i : group_a) {
    for (auto j : group_b) {
      total += mean_pairwise_w2(snapshot.agents[i], snapshot.agents[j]);
    }
  }
  return total / (static_cast<double>(group_a.size()) *
                  static_cast<double>(group_b.size()));
}

// Unweighted mean of snd_inter over all unordered group pairs.
inline double aggregate_inter(const GroupPartition& partition,
                              const PolicySnapshot& snapshot) {
  require(partition.num_groups() >= 2, "aggregate_inter: need K >= 2 groups");
  require(partition.num_agents() == snapshot.num_agents(),
          "aggregate_inter: partition and snapshot disagree on agent count");
  const std::size_t k = partition.num_groups();
  double total = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t h = g + 1; h < k; ++h) {
      total += snd_inter(partition.members(g), partition.members(h), snapshot);
    }
  }
  return total / (static_cast<double>(k * (k - 1)) / 2.0);
}

inline double combine_intra(const GroupPartition& partition,
                            const std::vector<double>& intra_per_group,
                            IntraAggregation mode) {
  require(intra_per_group.size() == partition.num_groups(),
          "combine_intra: one value per group required");
  double total = 0.0;
  double weight = 0.0;
  for (std::size_t g = 0; g < intra_per_group.size(); ++g) {
    const double w = mode == IntraAggregation::kMean
                         ? 1.0
                         : static_cast<double>(partition.members(g).size());
    total += w * intra_per_group[g];
    weight += w;
  }
  return total / weight;
}

// SND_des / max(alpha * inter + (1 - alpha) * intra, floor), capped at
// max_scale.
inline double compute_scale(const DLBCParams& params, double intra_combined,
                            double inter) {
  params.validate();
  require(intra_combined >= 0.0 && inter >= 0.0,
          "compute_scale: SND values must be nonnegative");
  const double denom =
      params.alpha * inter + (1.0 - params.alpha) * intra_combined;
  const double scale = params.snd_des / std::max(denom, params.denom_floor);
  return std::min(scale, params.max_scale);
}

// Measures every SND level of `snapshot` under `partition`. With a single
// group the inter term does not exist and the combined value is the intra
// SND (effective alpha 0). The scale field is computed from these values.
inline SNDReport measure_snd(const GroupPartition& partition,
                             const PolicySnapshot& snapshot,
                             const DLBCParams& params) {
  params.validate();
  snapshot.validate();
  require(partition.num_agents() == snapshot.num_agents(),
          "measure_snd: partition and snapshot disagree on agent count");
  SNDReport report;
  for (std::size_t g = 0; g < partition.num_groups(); ++g) {
    report.intra_per_group.push_back(snd_intra(partition.members(g), snapshot));
  }
  report.intra = combine_intra(partition, report.intra_per_group,
                               params.intra_aggregation);
  if (partition.num_groups() >= 2) {
    report.inter = aggregate_inter(partition, snapshot);
    report.alpha = params.alpha;
  } else {
    report.inter = 0.0;
    report.alpha = 0.0;
  }
  report.combined =
      report.alpha * report.inter + (1.0 - report.alpha) * report.intra;
  DLBCParams effective = params;
  effective.alpha = report.alpha;
  report.scale = compute_scale(effective, report.intra, report.inter);
  return report;
}

}  // namespace dlbc

#endif  // DLBC_DIVERSITY_HPP_
