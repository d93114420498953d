#include "energy_matching/potential.hpp"

#include <cmath>
#include <sstream>

#include "energy_matching/error.hpp"

namespace energy_matching {

namespace {

using Eigen::ArrayXXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using MatMap = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;

ArrayXXd sigmoid(const ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

ArrayXXd act(Activation a, const ArrayXXd& z) {
  switch (a) {
    case Activation::silu:
      return z * sigmoid(z);
    case Activation::tanh:
      return z.tanh();
    case Activation::softplus:
      return z.max(0.0) + (-z.abs()).exp().log1p();
    case Activation::quadratic:
      return 0.5 * z.square();
    case Activation::identity:
      return z;
  }
  return z;
}

ArrayXXd act_d1(Activation a, const ArrayXXd& z) {
  switch (a) {
    case Activation::silu: {
      const ArrayXXd s = sigmoid(z);
      return s * (1.0 + z * (1.0 - s));
    }
    case Activation::tanh:
      return 1.0 - z.tanh().square();
    case Activation::softplus:
      return sigmoid(z);
    case Activation::quadratic:
      return z;
    case Activation::identity:
      return ArrayXXd::Ones(z.rows(), z.cols());
  }
  return z;
}

ArrayXXd act_d2(Activation a, const ArrayXXd& z) {
  switch (a) {
    case Activation::silu: {
      const ArrayXXd s = sigmoid(z);
      return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s));
    }
    case Activation::tanh: {
      const ArrayXXd t = z.tanh();
      return -2.0 * t * (1.0 - t.square());
    }
    case Activation::softplus: {
      const ArrayXXd s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::quadratic:
      return ArrayXXd::Ones(z.rows(), z.cols());
    case Activation::identity:
      return ArrayXXd::Zero(z.rows(), z.cols());
  }
  return z;
}

// Pre-activations z_l and activations h_l of a batched forward pass.
// h[0] is the input; h[l + 1] = act(z[l]) for hidden layers.
struct Forward {
  std::vector<MatrixXd> z;
  std::vector<MatrixXd> h;
  VectorXd values;
};

class Layers {
 public:
  explicit Layers(const PotentialNet& net) : net_(net) {}

  ConstMatMap w(int l) const {
    return {net_.params().data() + net_.weight_offset(l), net_.fan_out(l), net_.fan_in(l)};
  }
  ConstVecMap b(int l) const {
    return {net_.params().data() + net_.weight_offset(l) + Index{net_.fan_out(l)} * net_.fan_in(l),
            net_.fan_out(l)};
  }

  Forward forward(const SampleBatch& xs) const {
    const int L = net_.num_layers();
    Forward f;
    f.z.reserve(static_cast<size_t>(L - 1));
    f.h.reserve(static_cast<size_t>(L));
    f.h.push_back(xs);
    for (int l = 0; l + 1 < L; ++l) {
      MatrixXd z = w(l) * f.h.back();
      z.colwise() += b(l);
      f.h.push_back(act(net_.activation(), z.array()).matrix());
      f.z.push_back(std::move(z));
    }
    const auto wl = w(L - 1);
    f.values = net_.output_scale() * ((wl * f.h.back()).transpose().array() + b(L - 1)(0)).matrix();
    return f;
  }

  // Backward pass for grad_x. g[l] = dV/dh_l (g[0] is the input gradient);
  // d[l] = dV/dz_l.
  void backward(const Forward& f, std::vector<MatrixXd>& g, std::vector<MatrixXd>& d) const {
    const int L = net_.num_layers();
    const Index B = f.h.front().cols();
    g.assign(static_cast<size_t>(L), MatrixXd());
    d.assign(static_cast<size_t>(L - 1), MatrixXd());
    const VectorXd top = net_.output_scale() * w(L - 1).row(0).transpose();
    g[static_cast<size_t>(L - 1)] = top.replicate(1, B);
    for (int l = L - 2; l >= 0; --l) {
      const auto ul = static_cast<size_t>(l);
      d[ul] = (g[ul + 1].array() * act_d1(net_.activation(), f.z[ul].array())).matrix();
      g[ul] = w(l).transpose() * d[ul];
    }
  }

 private:
  const PotentialNet& net_;
};

void check_finite_batch(const SampleBatch& xs, const char* what) {
  if (!xs.allFinite()) throw NumericalError(std::string(what) + ": non-finite input coordinates");
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::silu:
      return "silu";
    case Activation::tanh:
      return "tanh";
    case Activation::softplus:
      return "softplus";
    case Activation::quadratic:
      return "quadratic";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  for (auto a : {Activation::silu, Activation::tanh, Activation::softplus, Activation::quadratic,
                 Activation::identity})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Index param_count_for(int input_dim, const std::vector<int>& layer_widths) {
  Index count = 0;
  int fan_in = input_dim;
  for (int width : layer_widths) {
    count += Index{fan_in + 1} * width;
    fan_in = width;
  }
  return count + fan_in + 1;
}

PotentialNet::PotentialNet(int input_dim, std::vector<int> layer_widths, Activation activation,
                           double output_scale, VectorXd params)
    : input_dim_(input_dim),
      widths_(std::move(layer_widths)),
      activation_(activation),
      output_scale_(output_scale),
      params_(std::move(params)) {
  if (input_dim_ < 1) throw ConfigError("input_dim must be >= 1");
  for (int width : widths_)
    if (width < 1) throw ConfigError("layer widths must be >= 1");
  if (!(output_scale_ > 0.0) || !std::isfinite(output_scale_))
    throw ConfigError("output_scale must be a positive finite number");
  const Index expected = param_count_for(input_dim_, widths_);
  if (params_.size() != expected) {
    std::ostringstream msg;
    msg << "parameter vector has " << params_.size() << " entries, architecture needs " << expected;
    throw DimensionError(msg.str());
  }
  Index offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(offset);
    offset += Index{fan_in(l) + 1} * fan_out(l);
  }
}

PotentialNet PotentialNet::quadratic(const MatrixXd& factor, const VectorXd& weights) {
  if (factor.rows() != weights.size())
    throw DimensionError("quadratic potential: factor rows must match weight count");
  const int d = static_cast<int>(factor.cols());
  const int m = static_cast<int>(factor.rows());
  VectorXd p(param_count_for(d, {m}));
  Index k = 0;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < m; ++i) p(k++) = factor(i, j);
  for (Index i = 0; i < m; ++i) p(k++) = 0.0;
  for (Index i = 0; i < m; ++i) p(k++) = weights(i);
  p(k) = 0.0;
  return {d, {m}, Activation::quadratic, 1.0, std::move(p)};
}

PotentialNet PotentialNet::isotropic_quadratic(int input_dim) {
  return quadratic(MatrixXd::Identity(input_dim, input_dim), VectorXd::Ones(input_dim));
}

PotentialNet PotentialNet::affine(const VectorXd& w, double b) {
  VectorXd p(w.size() + 1);
  p << w, b;
  return {static_cast<int>(w.size()), {}, Activation::identity, 1.0, std::move(p)};
}

void PotentialNet::set_output_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("output_scale must be a positive finite number");
  output_scale_ = s;
}

void PotentialNet::set_params(const VectorXd& p) {
  if (p.size() != params_.size()) throw DimensionError("set_params: parameter count mismatch");
  params_ = p;
}

int PotentialNet::fan_in(int layer) const {
  return layer == 0 ? input_dim_ : widths_[static_cast<size_t>(layer - 1)];
}

int PotentialNet::fan_out(int layer) const {
  return layer + 1 == num_layers() ? 1 : widths_[static_cast<size_t>(layer)];
}

bool PotentialNet::same_architecture(const PotentialNet& other) const {
  return input_dim_ == other.input_dim_ && widths_ == other.widths_ && activation_ == other.activation_;
}

void PotentialNet::check_dim(Index rows) const {
  if (rows != input_dim_) {
    std::ostringstream msg;
    msg << "point dimension " << rows << " does not match network input_dim " << input_dim_;
    throw DimensionError(msg.str());
  }
}

double PotentialNet::eval(const Point& x) const {
  check_dim(x.size());
  return Layers(*this).forward(x).values(0);
}

VectorXd PotentialNet::eval(const SampleBatch& xs) const {
  check_dim(xs.rows());
  return Layers(*this).forward(xs).values;
}

Point PotentialNet::grad_x(const Point& x) const {
  check_dim(x.size());
  SampleBatch g = grad_x(SampleBatch(x));
  return g.col(0);
}

SampleBatch PotentialNet::grad_x(const SampleBatch& xs) const {
  VectorXd values;
  SampleBatch grads;
  eval_and_grad_x(xs, values, grads);
  return grads;
}

void PotentialNet::eval_and_grad_x(const SampleBatch& xs, VectorXd& values, SampleBatch& grads) const {
  check_dim(xs.rows());
  const Layers layers(*this);
  Forward f = layers.forward(xs);
  std::vector<MatrixXd> g, d;
  layers.backward(f, g, d);
  values = std::move(f.values);
  grads = std::move(g.front());
}

Eigen::MatrixXd PotentialNet::hessian_x(const Point& x) const {
  check_dim(x.size());
  check_finite_batch(x, "hessian_x");
  const Index d = x.size();
  SampleBatch probes(d, 2 * d);
  VectorXd steps(d);
  for (Index i = 0; i < d; ++i) {
    steps(i) = 1e-4 * std::max(1.0, std::abs(x(i)));
    probes.col(2 * i) = x;
    probes.col(2 * i + 1) = x;
    probes(i, 2 * i) += steps(i);
    probes(i, 2 * i + 1) -= steps(i);
  }
  const SampleBatch g = grad_x(probes);
  MatrixXd h(d, d);
  for (Index i = 0; i < d; ++i) h.col(i) = (g.col(2 * i) - g.col(2 * i + 1)) / (2.0 * steps(i));
  for (Index i = 0; i < d; ++i) {
    if (!h.col(i).allFinite()) {
      std::ostringstream msg;
      msg << "hessian_x: non-finite curvature along coordinate " << i;
      throw NumericalError(msg.str());
    }
  }
  return 0.5 * (h + h.transpose());
}

PotentialNet init_net(int input_dim, const std::vector<int>& layer_widths, double output_scale,
                      std::uint64_t seed, Activation activation) {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  VectorXd p(param_count_for(input_dim, layer_widths));
  Rng rng = make_rng(seed);
  Index k = 0;
  int fan_in = input_dim;
  auto fill_layer = [&](int fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    const Index n = Index{fan_in + 1} * fan_out;
    for (Index i = 0; i < n; ++i) p(k++) = uniform(rng);
    fan_in = fan_out;
  };
  for (int width : layer_widths) {
    if (width < 1) throw ConfigError("layer widths must be >= 1");
    fill_layer(width);
  }
  fill_layer(1);
  return {input_dim, layer_widths, activation, output_scale, std::move(p)};
}

LossTape::LossTape(const PotentialNet& net)
    : input_dim_(net.input_dim()),
      widths_(net.layer_widths()),
      activation_(net.activation()),
      value_points_(net.input_dim(), 0),
      residual_points_(net.input_dim(), 0),
      residual_offsets_(net.input_dim(), 0) {}

namespace {

void append_cols(SampleBatch& dst, const SampleBatch& src) {
  const Index old = dst.cols();
  dst.conservativeResize(Eigen::NoChange, old + src.cols());
  dst.rightCols(src.cols()) = src;
}

void append_vec(VectorXd& dst, const VectorXd& src) {
  const Index old = dst.size();
  dst.conservativeResize(old + src.size());
  dst.tail(src.size()) = src;
}

}  // namespace

void LossTape::add_values(const SampleBatch& points, const VectorXd& weights) {
  if (points.rows() != input_dim_) throw DimensionError("LossTape: point dimension mismatch");
  if (weights.size() != points.cols()) throw DimensionError("LossTape: one weight per point required");
  append_cols(value_points_, points);
  append_vec(value_weights_, weights);
}

void LossTape::add_values(const SampleBatch& points, double weight) {
  add_values(points, VectorXd::Constant(points.cols(), weight));
}

void LossTape::add_grad_residuals(const SampleBatch& points, const SampleBatch& offsets,
                                  const VectorXd& weights) {
  if (points.rows() != input_dim_ || offsets.rows() != input_dim_)
    throw DimensionError("LossTape: point dimension mismatch");
  if (offsets.cols() != points.cols()) throw DimensionError("LossTape: one offset per point required");
  if (weights.size() != points.cols()) throw DimensionError("LossTape: one weight per point required");
  append_cols(residual_points_, points);
  append_cols(residual_offsets_, offsets);
  append_vec(residual_weights_, weights);
}

void LossTape::add_grad_residuals(const SampleBatch& points, const SampleBatch& offsets, double weight) {
  add_grad_residuals(points, offsets, VectorXd::Constant(points.cols(), weight));
}

LossGrad loss_grad_params(const PotentialNet& net, const LossTape& tape) {
  if (tape.input_dim_ != net.input_dim() || tape.widths_ != net.layer_widths() ||
      tape.activation_ != net.activation())
    throw ContractError("loss_grad_params: tape was recorded for a different network architecture");

  const int L = net.num_layers();
  const Activation a = net.activation();
  const double s = net.output_scale();
  const Layers layers(net);

  LossGrad out;
  out.grad = VectorXd::Zero(net.param_count());
  auto gw = [&](int l) {
    return MatMap(out.grad.data() + net.weight_offset(l), net.fan_out(l), net.fan_in(l));
  };
  auto gb = [&](int l) {
    return VecMap(out.grad.data() + net.weight_offset(l) + Index{net.fan_out(l)} * net.fan_in(l),
                  net.fan_out(l));
  };

  // Propagates adjoints of the hidden pre-activations down through the forward
  // graph, accumulating weight and bias gradients. zbar[l] holds direct
  // adjoints of z_l; hbar_top is the adjoint arriving at the last hidden layer.
  auto backprop_forward = [&](const Forward& f, std::vector<MatrixXd>& zbar, MatrixXd hbar) {
    for (int l = L - 2; l >= 0; --l) {
      const auto ul = static_cast<size_t>(l);
      MatrixXd total = (hbar.array() * act_d1(a, f.z[ul].array())).matrix();
      if (zbar[ul].size() != 0) total += zbar[ul];
      gw(l) += total * f.h[ul].transpose();
      gb(l) += total.rowwise().sum();
      if (l > 0) hbar = layers.w(l).transpose() * total;
    }
  };

  if (tape.value_points_.cols() > 0) {
    const Forward f = layers.forward(tape.value_points_);
    const VectorXd& wts = tape.value_weights_;
    out.value += wts.dot(f.values);
    // dV/d(output pre-scale) = s
    const VectorXd obar = s * wts;
    gw(L - 1) += (f.h.back() * obar).transpose();
    gb(L - 1)(0) += obar.sum();
    std::vector<MatrixXd> zbar(static_cast<size_t>(L - 1));
    if (L > 1) backprop_forward(f, zbar, layers.w(L - 1).transpose() * obar.transpose());
  }

  if (tape.residual_points_.cols() > 0) {
    const Forward f = layers.forward(tape.residual_points_);
    std::vector<MatrixXd> g, d;
    layers.backward(f, g, d);
    const MatrixXd resid = g.front() + tape.residual_offsets_;
    const VectorXd& wts = tape.residual_weights_;
    out.value += resid.colwise().squaredNorm().dot(wts);

    // Reverse pass over the backward pass, in forward layer order.
    MatrixXd gbar = 2.0 * resid * wts.asDiagonal();
    std::vector<MatrixXd> zbar(static_cast<size_t>(L - 1));
    for (int l = 0; l + 1 < L; ++l) {
      const auto ul = static_cast<size_t>(l);
      // g_l = W_l^T d_l
      gw(l) += d[ul] * gbar.transpose();
      const MatrixXd dbar = layers.w(l) * gbar;
      // d_l = g_{l+1} * act'(z_l)
      const ArrayXXd d1 = act_d1(a, f.z[ul].array());
      zbar[ul] = (dbar.array() * g[ul + 1].array() * act_d2(a, f.z[ul].array())).matrix();
      gbar = (dbar.array() * d1).matrix();
    }
    // g_{L-1} = s * W_{L-1}^T, broadcast over the batch
    gw(L - 1) += s * gbar.rowwise().sum().transpose();
    if (L > 1) backprop_forward(f, zbar, MatrixXd::Zero(net.fan_out(L - 2), f.h.front().cols()));
  }

  return out;
}

}  // namespace energy_matching
