#include "energy_matching/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "energy_matching/coupling.hpp"
#include "energy_matching/error.hpp"
#include "energy_matching/parallel.hpp"

namespace energy_matching {

namespace {

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(std::string(key) + ": " + what);
}

// Independent stream for negative-sample noise, so that the flow-objective
// stream is identical whether or not the contrastive term is active.
std::uint64_t negatives_seed(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SampleBatch grad_chunked(const PotentialNet& net, const SampleBatch& xs, int threads) {
  SampleBatch grads(xs.rows(), xs.cols());
  for_each_chunk(xs.cols(), resolve_threads(threads), [&](long begin, long end) {
    grads.middleCols(begin, end - begin) = net.grad_x(SampleBatch(xs.middleCols(begin, end - begin)));
  });
  return grads;
}

struct OtStep {
  LossGrad loss;
  SampleBatch data;
};

// One flow-objective evaluation: data batch, Gaussian batch, exact coupling,
// times ~ U(0, t_star), loss on interpolants.
OtStep ot_step(const PotentialNet& net, const DataSource& source, const TrainConfig& cfg, Rng& rng) {
  OtStep step;
  step.data = source(cfg.batch_size, rng);
  if (step.data.rows() != net.input_dim() || step.data.cols() != cfg.batch_size)
    throw DimensionError("data source returned a batch of the wrong shape");
  const SampleBatch noise = standard_normal(step.data.rows(), step.data.cols(), rng);
  const Coupling coupling = exact_assignment(step.data, noise);
  const SampleBatch partners = apply_permutation(noise, coupling.perm);
  std::uniform_real_distribution<double> uniform(0.0, cfg.t_star);
  Eigen::VectorXd times(cfg.batch_size);
  for (auto& t : times) t = uniform(rng);
  step.loss = ot_loss(net, step.data, partners, times);
  return step;
}

void check_finite_loss(double value, int phase, int iter, const char* what) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "phase " << phase << " iteration " << iter << ": non-finite " << what
        << " (try a smaller lr or dt)";
    throw NumericalError(msg.str());
  }
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(lr > 0.0 && std::isfinite(lr), "lr", "must be positive");
  require(iters_phase1 >= 0, "iters_phase1", "must be >= 0");
  require(iters_phase2 >= 0, "iters_phase2", "must be >= 0");
  require(t_star > 0.0 && t_star <= 1.0, "t_star", "must lie in (0, 1]");
  require(eps_max >= 0.0 && std::isfinite(eps_max), "eps_max", "must be >= 0");
  require(dt > 0.0 && std::isfinite(dt), "dt", "must be positive");
  require(m_langevin >= 1, "m_langevin", "must be >= 1");
  require(lambda_cd >= 0.0 && std::isfinite(lambda_cd), "lambda_cd", "must be >= 0");
  require(trim_alpha >= 0.0 && trim_alpha < 1.0, "trim_alpha", "must lie in [0, 1)");
  require(clamp_beta >= 0.0, "clamp_beta", "must be >= 0");
  require(ema_decay_phase1 >= 0.0 && ema_decay_phase1 < 1.0, "ema_decay_phase1", "must lie in [0, 1)");
  require(ema_decay_phase2 >= 0.0 && ema_decay_phase2 < 1.0, "ema_decay_phase2", "must lie in [0, 1)");
  require(neg_data_fraction >= 0.0 && neg_data_fraction <= 1.0, "neg_data_fraction", "must lie in [0, 1]");
  require(threads >= 0, "threads", "must be >= 0");
}

std::vector<std::string> TrainConfig::warnings() const {
  std::vector<std::string> out;
  if (m_langevin * dt < 1.0)
    out.push_back("m_langevin * dt < 1: negatives may not reach the model's equilibrium");
  return out;
}

DataSource resample_from(SampleBatch data) {
  if (data.cols() == 0) throw DimensionError("resample_from: empty dataset");
  return [data = std::move(data)](int batch_size, Rng& rng) {
    std::uniform_int_distribution<Eigen::Index> pick(0, data.cols() - 1);
    SampleBatch out(data.rows(), batch_size);
    for (int b = 0; b < batch_size; ++b) out.col(b) = data.col(pick(rng));
    return out;
  };
}

Point interpolate(const Point& x_noise, const Point& x_data, double t) {
  if (x_noise.size() != x_data.size()) throw DimensionError("interpolate: dimension mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("interpolate: t must lie in [0, 1]");
  return (1.0 - t) * x_noise + t * x_data;
}

LossGrad ot_loss(const PotentialNet& net, const SampleBatch& data, const SampleBatch& noise,
                 const Eigen::VectorXd& times) {
  if (data.rows() != noise.rows() || data.cols() != noise.cols())
    throw DimensionError("ot_loss: data and noise batches must have equal shapes");
  if (times.size() != data.cols()) throw DimensionError("ot_loss: one time per pair required");
  if (data.cols() == 0) throw DimensionError("ot_loss: empty batch");
  for (double t : times)
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("ot_loss: times must lie in [0, 1]");
  const SampleBatch xt = noise + (data - noise) * times.asDiagonal();
  LossTape tape(net);
  tape.add_grad_residuals(xt, data - noise, 1.0 / static_cast<double>(data.cols()));
  return loss_grad_params(net, tape);
}

LangevinResult langevin_negatives(const PotentialNet& net, const SampleBatch& init,
                                  const std::vector<ChainOrigin>& origins, const TrainConfig& cfg, Rng& rng) {
  if (cfg.m_langevin < 1) throw ConfigError("m_langevin: must be >= 1");
  if (static_cast<Eigen::Index>(origins.size()) != init.cols())
    throw DimensionError("langevin_negatives: one origin flag per chain required");
  if (init.rows() != net.input_dim()) throw DimensionError("langevin_negatives: dimension mismatch");
  const TempSchedule schedule = cfg.schedule();
  const Eigen::Index n = init.cols();
  SampleBatch x = init;
  std::vector<char> alive(static_cast<size_t>(n), 1);
  for (Eigen::Index j = 0; j < n; ++j)
    if (!x.col(j).allFinite()) {
      alive[static_cast<size_t>(j)] = 0;
      x.col(j).setZero();
    }
  Eigen::VectorXd noise_scale(n);
  for (int m = 0; m < cfg.m_langevin; ++m) {
    const double eps_schedule = schedule.epsilon_at(m * cfg.dt);
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool hot = origins[static_cast<size_t>(j)] == ChainOrigin::data &&
                       cfg.data_init_temperature == DataInitTemperature::constant_eps_max;
      noise_scale(j) = std::sqrt(2.0 * cfg.dt * (hot ? cfg.eps_max : eps_schedule));
    }
    const SampleBatch eta = standard_normal(x.rows(), n, rng);
    const SampleBatch g = grad_chunked(net, x, cfg.threads);
    x += -cfg.dt * g + eta * noise_scale.asDiagonal();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!alive[static_cast<size_t>(j)]) {
        x.col(j).setZero();
      } else if (!x.col(j).allFinite()) {
        alive[static_cast<size_t>(j)] = 0;
        x.col(j).setZero();
      }
    }
  }
  LangevinResult out;
  for (Eigen::Index j = 0; j < n; ++j)
    if (alive[static_cast<size_t>(j)]) out.retained.push_back(static_cast<int>(j));
  out.dropped = static_cast<int>(n) - static_cast<int>(out.retained.size());
  out.samples.resize(x.rows(), static_cast<Eigen::Index>(out.retained.size()));
  for (size_t k = 0; k < out.retained.size(); ++k) out.samples.col(static_cast<Eigen::Index>(k)) = x.col(out.retained[k]);
  return out;
}

namespace {

Eigen::Index trim_count(Eigen::Index n, double alpha) {
  return static_cast<Eigen::Index>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
}

// Indices of the values kept after discarding the highest ceil(alpha n).
std::vector<Eigen::Index> retained_indices(const Eigen::VectorXd& values, double alpha) {
  const Eigen::Index n = values.size();
  const Eigen::Index k = trim_count(n, alpha);
  if (n == 0) throw ContractError("trimmed mean of an empty set");
  if (k >= n) throw ConfigError("trim_alpha: discards every negative sample");
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  order.resize(static_cast<size_t>(n - k));
  return order;
}

}  // namespace

double trimmed_mean(const Eigen::VectorXd& values, double alpha) {
  const auto keep = retained_indices(values, alpha);
  double sum = 0.0;
  for (auto i : keep) sum += values(i);
  return sum / static_cast<double>(keep.size());
}

CdLoss cd_loss(const PotentialNet& net, const SampleBatch& positives, const SampleBatch& negatives,
               double trim_alpha, double clamp_beta) {
  if (positives.cols() == 0 || negatives.cols() == 0) throw ContractError("cd_loss: empty batch");
  if (!(trim_alpha >= 0.0 && trim_alpha < 1.0)) throw ConfigError("trim_alpha: must lie in [0, 1)");
  if (!(clamp_beta >= 0.0)) throw ConfigError("clamp_beta: must be >= 0");
  const Eigen::VectorXd pos = net.eval(positives);
  const Eigen::VectorXd neg = net.eval(negatives);
  const auto keep = retained_indices(neg, trim_alpha);

  CdLoss out;
  out.trimmed = static_cast<int>(neg.size() - static_cast<Eigen::Index>(keep.size()));
  out.mean_pos_energy = pos.mean();
  double sum = 0.0;
  for (auto i : keep) sum += neg(i);
  out.trimmed_mean_neg_energy = sum / static_cast<double>(keep.size());
  out.raw = out.mean_pos_energy - out.trimmed_mean_neg_energy;
  out.clamped = out.raw < -clamp_beta;
  out.value = out.clamped ? -clamp_beta : out.raw;
  if (out.clamped) {
    out.grad = Eigen::VectorXd::Zero(net.param_count());
    return out;
  }
  SampleBatch kept(negatives.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) kept.col(static_cast<Eigen::Index>(k)) = negatives.col(keep[k]);
  LossTape tape(net);
  tape.add_values(positives, 1.0 / static_cast<double>(positives.cols()));
  tape.add_values(kept, -1.0 / static_cast<double>(kept.cols()));
  out.grad = loss_grad_params(net, tape).grad;
  return out;
}

AdamState make_adam_state(Eigen::Index n) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n);
  s.v = Eigen::VectorXd::Zero(n);
  return s;
}

void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, double lr) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw DimensionError("adam_update: parameter, gradient and state sizes differ");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

void ema_update(Eigen::VectorXd& ema, const Eigen::VectorXd& params, double decay) {
  if (ema.size() != params.size()) throw DimensionError("ema_update: size mismatch");
  ema = decay * ema + (1.0 - decay) * params;
}

TrainResult train_phase1(const DataSource& data, const TrainConfig& cfg, const PotentialNet& init,
                         const TrainHooks& hooks) {
  cfg.validate();
  PotentialNet net = init;
  Eigen::VectorXd ema = init.params();
  AdamState adam = make_adam_state(net.param_count());
  Rng rng = make_rng(cfg.seed);
  TrainReport report;
  report.records.reserve(static_cast<size_t>(cfg.iters_phase1));
  for (int it = 0; it < cfg.iters_phase1; ++it) {
    const OtStep step = ot_step(net, data, cfg, rng);
    check_finite_loss(step.loss.value, 1, it, "flow loss");
    adam_update(net.mutable_params(), step.loss.grad, adam, cfg.lr);
    ema_update(ema, net.params(), cfg.ema_decay_phase1);
    IterRecord rec;
    rec.phase = 1;
    rec.iter = it;
    rec.loss_ot = step.loss.value;
    rec.grad_norm = step.loss.grad.norm();
    report.records.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && (it + 1) % hooks.checkpoint_every == 0) {
      PotentialNet snapshot = net;
      snapshot.set_params(ema);
      hooks.on_checkpoint(it + 1, snapshot);
    }
  }
  net.set_params(ema);
  return {std::move(net), std::move(report)};
}

TrainResult train_phase2(const DataSource& data, const TrainConfig& cfg, const PotentialNet& warm,
                         const TrainHooks& hooks) {
  cfg.validate();
  PotentialNet net = warm;
  Eigen::VectorXd ema = warm.params();
  AdamState adam = make_adam_state(net.param_count());
  Rng rng = make_rng(cfg.seed);
  Rng neg_rng = make_rng(negatives_seed(cfg.seed));
  const int n_from_data = static_cast<int>(std::floor(cfg.neg_data_fraction * cfg.batch_size));
  std::vector<ChainOrigin> origins(static_cast<size_t>(cfg.batch_size), ChainOrigin::noise);
  std::fill_n(origins.begin(), n_from_data, ChainOrigin::data);

  TrainReport report;
  report.records.reserve(static_cast<size_t>(cfg.iters_phase2));
  for (int it = 0; it < cfg.iters_phase2; ++it) {
    const OtStep step = ot_step(net, data, cfg, rng);
    check_finite_loss(step.loss.value, 2, it, "flow loss");

    SampleBatch init(net.input_dim(), cfg.batch_size);
    init.leftCols(n_from_data) = step.data.leftCols(n_from_data);
    init.rightCols(cfg.batch_size - n_from_data) =
        standard_normal(net.input_dim(), cfg.batch_size - n_from_data, neg_rng);
    const LangevinResult negatives = langevin_negatives(net, init, origins, cfg, neg_rng);

    Eigen::VectorXd grad = step.loss.grad;
    IterRecord rec;
    rec.phase = 2;
    rec.iter = it;
    rec.loss_ot = step.loss.value;
    rec.dropped_chains = negatives.dropped;
    if (negatives.samples.cols() > 0) {
      const CdLoss cd = cd_loss(net, step.data, negatives.samples, cfg.trim_alpha, cfg.clamp_beta);
      check_finite_loss(cd.value, 2, it, "contrastive loss");
      grad += cfg.lambda_cd * cd.grad;
      rec.loss_cd = cd.value;
      rec.mean_pos_energy = cd.mean_pos_energy;
      rec.trimmed_mean_neg_energy = cd.trimmed_mean_neg_energy;
    }
    adam_update(net.mutable_params(), grad, adam, cfg.lr);
    ema_update(ema, net.params(), cfg.ema_decay_phase2);
    rec.grad_norm = grad.norm();
    report.records.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && (it + 1) % hooks.checkpoint_every == 0) {
      PotentialNet snapshot = net;
      snapshot.set_params(ema);
      hooks.on_checkpoint(it + 1, snapshot);
    }
  }
  net.set_params(ema);
  return {std::move(net), std::move(report)};
}

}  // namespace energy_matching
