#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "irp/features.hpp"

namespace irp {

/// Normalizing flow built from affine coupling blocks.
///
/// Block b permutes its input with permutation(b) (u[j] = x[perm[j]]), splits
/// u into an active head of ceil(d/2) coordinates and a passive tail of
/// floor(d/2), and maps the tail as
///
///   v_b = u_b * exp(clamp(s_net(u_a))) + t_net(u_a),   v_a = u_a,
///   clamp(s) = alpha * (2/pi) * atan(s / alpha).
///
/// s_net and t_net are single-hidden-layer tanh MLPs. All weights live in one
/// flat vector; per block the order is
///   s.W1 (H x ka), s.b1 (H), s.W2 (kb x H), s.b2 (kb), then the same for t,
/// with matrices stored column-major. Gradients and the optimizer share this
/// layout.
class FlowModel {
 public:
  struct NetView {
    Eigen::Map<const Eigen::MatrixXd> w1;
    Eigen::Map<const Eigen::VectorXd> b1;
    Eigen::Map<const Eigen::MatrixXd> w2;
    Eigen::Map<const Eigen::VectorXd> b2;
  };

  FlowModel() = default;

  /// Hidden weights uniform in +-1/sqrt(fan_in); output layers of every
  /// s_net/t_net are zero, so a fresh model is a pure coordinate permutation.
  static FlowModel init(int dim, int blocks, int hidden, std::uint64_t seed, double clamp_alpha = 1.9);

  /// Assembles a model from explicit pieces; validates every invariant.
  FlowModel(int dim, int hidden, double clamp_alpha, std::vector<std::vector<int>> permutations,
            Eigen::VectorXd parameters);

  int dim() const { return dim_; }
  int blocks() const { return static_cast<int>(permutations_.size()); }
  int hidden() const { return hidden_; }
  int active_dim() const { return (dim_ + 1) / 2; }
  int passive_dim() const { return dim_ / 2; }
  double clamp_alpha() const { return clamp_alpha_; }

  const std::vector<std::vector<int>>& permutations() const { return permutations_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& parameters() { return params_; }

  Eigen::Index parameter_count() const { return params_.size(); }
  Eigen::Index net_parameter_count() const;
  /// Offset of block b's s_net (net = 0) or t_net (net = 1) in parameters().
  Eigen::Index net_offset(int block, int net) const;
  NetView net(int block, int net) const;

  friend bool operator==(const FlowModel& a, const FlowModel& b);

 private:
  int dim_ = 0;
  int hidden_ = 0;
  double clamp_alpha_ = 1.9;
  std::vector<std::vector<int>> permutations_;
  Eigen::VectorXd params_;
};

double soft_clamp(double s, double alpha);

struct ForwardResult {
  FeatureVector z;
  double log_det = 0.0;
};

/// Throws std::invalid_argument on dimension mismatch or non-finite input.
ForwardResult forward(const FlowModel& m, const FeatureVector& y);
FeatureVector inverse(const FlowModel& m, const FeatureVector& z);

/// log N(z; 0, I) + log_det.
double log_prob(const FlowModel& m, const FeatureVector& y);
/// log N(z; 0, I) alone.
double log_prior(const FeatureVector& z);

/// Column-batched forward pass. Each column of `y` is one input. No input
/// validation; used on the hot paths.
void forward_batch(const FlowModel& m, const Eigen::MatrixXd& y, Eigen::MatrixXd& z, Eigen::VectorXd& log_det);

struct NllGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Mean negative log-likelihood over the batch and its exact gradient with
/// respect to parameters(), by reverse-mode differentiation through the
/// couplings.
NllGrad nll_and_grad(const FlowModel& m, std::span<const FeatureVector> batch);

/// Reusable buffers for repeated gradient evaluations on column batches.
class GradientWorkspace {
 public:
  /// Returns the mean NLL of the columns of `batch`; overwrites `grad`.
  double evaluate(const FlowModel& m, const Eigen::MatrixXd& batch, Eigen::VectorXd& grad);

 private:
  struct BlockCache {
    Eigen::MatrixXd u;       // permuted block input, d x B
    Eigen::MatrixXd hs, ht;  // hidden activations, H x B
    Eigen::MatrixXd s_raw;   // kb x B
    Eigen::MatrixXd scale;   // exp(clamp(s_raw)), kb x B
  };
  std::vector<BlockCache> cache_;
  Eigen::MatrixXd x_, g_, gu_, gs_, gt_, gh_;
};

/// Checkpoint text format, 17 significant digits:
///   flow-checkpoint v1
///   dim <d> blocks <b> hidden <H> clamp <alpha>
///   perm <b lines of d indices>
///   params <count>
///   <one parameter per line, layout as documented on FlowModel>
void write_checkpoint(std::ostream& out, const FlowModel& m);
FlowModel read_checkpoint(std::istream& in);
void save_checkpoint(const FlowModel& m, const std::filesystem::path& path);
FlowModel load_checkpoint(const std::filesystem::path& path);

}  // namespace irp
