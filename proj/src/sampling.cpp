#include "energy_matching/sampling.hpp"

#include <cmath>
#include <sstream>

#include "energy_matching/error.hpp"
#include "energy_matching/parallel.hpp"

namespace energy_matching {

namespace {

void check_positive_scale(double s, const char* what) {
  if (!(s > 0.0)) throw ConfigError(std::string(what) + " must be positive (use infinity to disable the term)");
}

SampleBatch potential_gradient(const PotentialNet& net, const SampleBatch& x, int threads) {
  SampleBatch g(x.rows(), x.cols());
  for_each_chunk(x.cols(), resolve_threads(threads), [&](long begin, long end) {
    g.middleCols(begin, end - begin) = net.grad_x(SampleBatch(x.middleCols(begin, end - begin)));
  });
  return g;
}

}  // namespace

EnergyTerm EnergyTerm::potential(PotentialNet net) {
  EnergyTerm t;
  t.kind_ = EnergyKind::potential;
  t.net_ = std::move(net);
  return t;
}

EnergyTerm EnergyTerm::fidelity(Eigen::MatrixXd a, Eigen::VectorXd y, double zeta) {
  if (a.rows() != y.size()) throw DimensionError("fidelity: A must have one row per observation");
  check_positive_scale(zeta, "zeta");
  EnergyTerm t;
  t.kind_ = EnergyKind::fidelity;
  t.op_ = std::move(a);
  t.y_ = std::move(y);
  t.scale_ = zeta;
  return t;
}

EnergyTerm EnergyTerm::fidelity_mask(const Eigen::VectorXd& mask, const Eigen::VectorXd& y, double zeta) {
  if (mask.size() != y.size()) throw DimensionError("fidelity_mask: mask and observation lengths differ");
  return fidelity(Eigen::MatrixXd(mask.asDiagonal()), mask.cwiseProduct(y), zeta);
}

EnergyTerm EnergyTerm::interaction(Eigen::MatrixXd b, double sigma) {
  check_positive_scale(sigma, "sigma");
  EnergyTerm t;
  t.kind_ = EnergyKind::interaction;
  t.op_ = std::move(b);
  t.scale_ = sigma;
  return t;
}

EnergyTerm EnergyTerm::interaction_mask(const Eigen::VectorXd& mask, double sigma) {
  return interaction(Eigen::MatrixXd(mask.asDiagonal()), sigma);
}

int EnergyTerm::input_dim() const {
  if (kind_ == EnergyKind::potential) return net_->input_dim();
  return static_cast<int>(op_.cols());
}

Eigen::VectorXd EnergyTerm::value(const SampleBatch& points) const {
  if (points.rows() != input_dim()) throw DimensionError("energy term: dimension mismatch");
  switch (kind_) {
    case EnergyKind::potential:
      return net_->eval(points);
    case EnergyKind::fidelity: {
      const Eigen::MatrixXd r = (-(op_ * points)).colwise() + y_;
      return r.colwise().squaredNorm().transpose() / (scale_ * scale_);
    }
    case EnergyKind::interaction: {
      const Eigen::MatrixXd bx = op_ * points;
      Eigen::VectorXd out = Eigen::VectorXd::Zero(points.cols());
      for (Eigen::Index m = 0; m < points.cols(); ++m)
        for (Eigen::Index k = 0; k < points.cols(); ++k)
          if (k != m) out(m) -= (bx.col(m) - bx.col(k)).squaredNorm();
      return out / (scale_ * scale_);
    }
  }
  return {};
}

SampleBatch EnergyTerm::gradient(const SampleBatch& points) const {
  if (points.rows() != input_dim()) throw DimensionError("energy term: dimension mismatch");
  switch (kind_) {
    case EnergyKind::potential:
      return net_->grad_x(points);
    case EnergyKind::fidelity: {
      const Eigen::MatrixXd r = (-(op_ * points)).colwise() + y_;
      return (-2.0 / (scale_ * scale_)) * (op_.transpose() * r);
    }
    case EnergyKind::interaction: {
      // d/dx_m sum_{k != m} -||B(x_m - x_k)||^2 / s^2 = -2/s^2 B^T B (M x_m - sum_k x_k)
      const double m = static_cast<double>(points.cols());
      const Eigen::VectorXd total = points.rowwise().sum();
      const Eigen::MatrixXd centered = (m * points).colwise() - total;
      return (-2.0 / (scale_ * scale_)) * (op_.transpose() * (op_ * centered));
    }
  }
  return {};
}

Eigen::VectorXd EnergyTerm::residual_norms(const SampleBatch& points) const {
  if (kind_ != EnergyKind::fidelity) throw ContractError("residual_norms requires a fidelity term");
  const Eigen::MatrixXd r = (-(op_ * points)).colwise() + y_;
  return r.colwise().norm().transpose();
}

CompositeEnergy::CompositeEnergy(PotentialNet net, std::vector<EnergyTerm> terms)
    : net_(std::move(net)), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (t.input_dim() != net_.input_dim()) {
      std::ostringstream msg;
      msg << "energy term of dimension " << t.input_dim() << " does not match potential dimension "
          << net_.input_dim();
      throw DimensionError(msg.str());
    }
    if (t.kind() == EnergyKind::interaction) has_interaction_ = true;
  }
}

Eigen::VectorXd CompositeEnergy::value(const SampleBatch& points, double eps) const {
  Eigen::VectorXd u = net_.eval(points);
  for (const auto& t : terms_) u += (t.kind() == EnergyKind::potential ? 1.0 : eps) * t.value(points);
  return u;
}

SampleBatch CompositeEnergy::gradient(const SampleBatch& points, double eps, int threads) const {
  if (points.rows() != net_.input_dim()) throw DimensionError("composite energy: dimension mismatch");
  SampleBatch g = potential_gradient(net_, points, threads);
  for (const auto& t : terms_) {
    if (t.kind() != EnergyKind::potential && eps == 0.0) continue;
    g += (t.kind() == EnergyKind::potential ? 1.0 : eps) * t.gradient(points);
  }
  return g;
}

CompositeEnergy compose_energy(const PotentialNet& net, std::vector<EnergyTerm> terms) {
  return {net, std::move(terms)};
}

void SampleConfig::validate() const {
  if (!(tau_s > 0.0)) throw ConfigError("tau_s: must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt: must be positive");
  schedule().validate();
  if (num_steps() < 1) throw ConfigError("tau_s: must be at least one step of dt");
  if (num_chains < 1) throw ConfigError("num_chains: must be >= 1");
  if (trajectory_every < 1) throw ConfigError("trajectory_every: must be >= 1");
  if (threads < 0) throw ConfigError("threads: must be >= 0");
}

int SampleConfig::num_steps() const {
  return static_cast<int>(std::floor(tau_s / dt + 1e-9));
}

SampleBatch euler_maruyama_step(const CompositeEnergy& energy, const SampleBatch& x, double dt, double eps,
                                const SampleBatch& noise, int threads) {
  return x - dt * energy.gradient(x, eps, threads) + std::sqrt(2.0 * eps * dt) * noise;
}

SampleBatch euler_heun_step(const CompositeEnergy& energy, const SampleBatch& x, double dt, double eps,
                            const SampleBatch& noise, int threads) {
  const SampleBatch g0 = energy.gradient(x, eps, threads);
  const SampleBatch predictor = x - dt * g0;
  const SampleBatch g1 = energy.gradient(predictor, eps, threads);
  return x - (0.5 * dt) * (g0 + g1) + std::sqrt(2.0 * eps * dt) * noise;
}

Point euler_heun_step(const CompositeEnergy& energy, const Point& x, double dt, double eps, const Point& noise) {
  const SampleBatch out = euler_heun_step(energy, SampleBatch(x), dt, eps, SampleBatch(noise));
  return out.col(0);
}

SampleResult sample(const CompositeEnergy& energy, const SampleConfig& cfg, const SampleBatch* init,
                    const SampleObserver& observer) {
  cfg.validate();
  const TempSchedule schedule = cfg.schedule();
  const int d = energy.input_dim();
  Rng rng = make_rng(cfg.seed);

  SampleBatch x;
  if (init != nullptr) {
    if (init->rows() != d) throw DimensionError("sample: initial points have the wrong dimension");
    if (init->cols() == 0) throw DimensionError("sample: no initial points");
    x = *init;
  } else {
    if (cfg.init == ChainInit::data) throw ContractError("sample: data initialization requires initial points");
    x = standard_normal(d, cfg.num_chains, rng);
  }
  const Eigen::Index total = x.cols();
  std::vector<int> live(static_cast<size_t>(total));
  for (int i = 0; i < static_cast<int>(total); ++i) live[static_cast<size_t>(i)] = i;

  SampleResult result;
  const bool constant_hot = cfg.init == ChainInit::data && cfg.data_chains_at_eps_max;
  auto log_rows = [&](int step, double t, double eps) {
    const Eigen::VectorXd u = energy.value(x, eps);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      result.trajectory.push_back({live[static_cast<size_t>(j)], step, t, x.col(j), u(j)});
  };

  const int steps = cfg.num_steps();
  for (int n = 0; n < steps; ++n) {
    const double t = n * cfg.dt;
    const double eps = constant_hot ? cfg.eps_max : schedule.epsilon_at(t);
    if (cfg.record_trajectory && n % cfg.trajectory_every == 0) log_rows(n, t, eps);
    const SampleBatch eta_all = standard_normal(d, total, rng);
    SampleBatch eta(d, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) eta.col(j) = eta_all.col(live[static_cast<size_t>(j)]);
    x = cfg.integrator == Integrator::euler_heun ? euler_heun_step(energy, x, cfg.dt, eps, eta, cfg.threads)
                                                 : euler_maruyama_step(energy, x, cfg.dt, eps, eta, cfg.threads);
    // Drop chains that left the representable range.
    Eigen::Index keep = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!x.col(j).allFinite()) {
        ++result.diverged;
        continue;
      }
      if (keep != j) {
        x.col(keep) = x.col(j);
        live[static_cast<size_t>(keep)] = live[static_cast<size_t>(j)];
      }
      ++keep;
    }
    x.conservativeResize(Eigen::NoChange, keep);
    live.resize(static_cast<size_t>(keep));
    if (observer) observer(n + 1, x, live);
    if (keep == 0) break;
  }
  if (cfg.record_trajectory && x.cols() > 0) {
    const double t = steps * cfg.dt;
    log_rows(steps, t, constant_hot ? cfg.eps_max : schedule.epsilon_at(t));
  }
  result.samples = std::move(x);
  result.retained = std::move(live);
  return result;
}

}  // namespace energy_matching
