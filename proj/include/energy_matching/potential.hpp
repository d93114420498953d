#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "energy_matching/types.hpp"

namespace energy_matching {

/// Hidden-layer nonlinearity. `quadratic` (z^2 / 2) and `identity` exist so
/// that exact quadratic and affine test potentials are ordinary networks.
enum class Activation { silu, tanh, softplus, quadratic, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Scalar potential V(x) = s * mlp(x) on R^d.
///
/// Parameters are stored flat, layer by layer: the weight matrix W_l
/// (fan_out x fan_in, column-major) followed by its bias b_l. The final
/// layer has fan_out = 1 and no activation.
class PotentialNet {
 public:
  PotentialNet(int input_dim, std::vector<int> layer_widths, Activation activation,
               double output_scale, Eigen::VectorXd params);

  /// Exact quadratic potential V(x) = 1/2 (Fx)^T diag(w) (Fx), i.e. Hessian
  /// F^T diag(w) F.
  static PotentialNet quadratic(const Eigen::MatrixXd& factor, const Eigen::VectorXd& weights);
  /// V(x) = 1/2 ||x||^2 in d dimensions.
  static PotentialNet isotropic_quadratic(int input_dim);
  /// V(x) = w . x + b.
  static PotentialNet affine(const Eigen::VectorXd& w, double b);

  int input_dim() const { return input_dim_; }
  const std::vector<int>& layer_widths() const { return widths_; }
  Activation activation() const { return activation_; }
  double output_scale() const { return output_scale_; }
  void set_output_scale(double s);

  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& mutable_params() { return params_; }
  void set_params(const Eigen::VectorXd& p);
  Eigen::Index param_count() const { return params_.size(); }

  /// Number of linear layers (hidden + output).
  int num_layers() const { return static_cast<int>(widths_.size()) + 1; }
  int fan_in(int layer) const;
  int fan_out(int layer) const;
  /// Offset of W_layer inside params(); b_layer follows it.
  Eigen::Index weight_offset(int layer) const { return offsets_[static_cast<size_t>(layer)]; }

  bool same_architecture(const PotentialNet& other) const;

  double eval(const Point& x) const;
  Eigen::VectorXd eval(const SampleBatch& xs) const;

  Point grad_x(const Point& x) const;
  SampleBatch grad_x(const SampleBatch& xs) const;
  /// Values and gradients from a single forward/backward pass.
  void eval_and_grad_x(const SampleBatch& xs, Eigen::VectorXd& values, SampleBatch& grads) const;

  /// Symmetrized Hessian from central differences of grad_x with per-coordinate
  /// step 1e-4 * max(1, |x_i|).
  Eigen::MatrixXd hessian_x(const Point& x) const;

 private:
  void check_dim(Eigen::Index rows) const;

  int input_dim_;
  std::vector<int> widths_;
  Activation activation_;
  double output_scale_;
  Eigen::VectorXd params_;
  std::vector<Eigen::Index> offsets_;
};

/// Required parameter count for an architecture: sum of (fan_in + 1) * fan_out.
Eigen::Index param_count_for(int input_dim, const std::vector<int>& layer_widths);

/// Fan-in scaled uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases included.
PotentialNet init_net(int input_dim, const std::vector<int>& layer_widths, double output_scale,
                      std::uint64_t seed, Activation activation = Activation::silu);

struct LossGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// A differentiable scalar loss recorded against one network architecture:
///
///   sum_i value_weight_i * V(p_i)  +  sum_j residual_weight_j * ||grad_x V(q_j) + c_j||^2
///
/// Points are recorded here and evaluated by loss_grad_params, which
/// differentiates through grad_x (double backprop).
class LossTape {
 public:
  explicit LossTape(const PotentialNet& net);

  void add_values(const SampleBatch& points, const Eigen::VectorXd& weights);
  void add_values(const SampleBatch& points, double weight);
  void add_grad_residuals(const SampleBatch& points, const SampleBatch& offsets,
                          const Eigen::VectorXd& weights);
  void add_grad_residuals(const SampleBatch& points, const SampleBatch& offsets, double weight);

  bool empty() const { return value_points_.cols() == 0 && residual_points_.cols() == 0; }

 private:
  friend LossGrad loss_grad_params(const PotentialNet& net, const LossTape& tape);

  int input_dim_;
  std::vector<int> widths_;
  Activation activation_;
  SampleBatch value_points_;
  Eigen::VectorXd value_weights_;
  SampleBatch residual_points_;
  SampleBatch residual_offsets_;
  Eigen::VectorXd residual_weights_;
};

/// Exact value and parameter gradient of a recorded loss at net's current
/// parameters. Throws ContractError if the tape was recorded for a
/// different architecture.
LossGrad loss_grad_params(const PotentialNet& net, const LossTape& tape);

}  // namespace energy_matching
