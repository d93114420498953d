#include "energy_matching/config.hpp"

#include <functional>
#include <map>

#include "energy_matching/error.hpp"

namespace energy_matching {

using nlohmann::json;

namespace {

struct Field {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <typename T, typename M>
Field plain(M member) {
  return {[member](const RunConfig& c) { return json(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const json& v) { member(c) = v.get<T>(); }};
}

#define EM_FIELD(T, ...) plain<T>([](RunConfig& c) -> T& { return c.__VA_ARGS__; })

std::string_view integrator_name(Integrator i) {
  return i == Integrator::euler_heun ? "euler_heun" : "euler_maruyama";
}

using Bounds = std::array<double, 4>;

Integrator integrator_from(const std::string& s) {
  if (s == "euler_heun") return Integrator::euler_heun;
  if (s == "euler_maruyama") return Integrator::euler_maruyama;
  throw ConfigError("integrator: expected euler_heun or euler_maruyama, got '" + s + "'");
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"dataset",
       {[](const RunConfig& c) { return json(std::string(to_string(c.dataset.kind))); },
        [](RunConfig& c, const json& v) { c.dataset.kind = dataset_kind_from_string(v.get<std::string>()); }}},
      {"n", EM_FIELD(int, dataset.n)},
      {"noise", EM_FIELD(double, dataset.noise)},
      {"data_seed", EM_FIELD(std::uint64_t, dataset.seed)},
      {"k", EM_FIELD(int, dataset.k)},
      {"d", EM_FIELD(int, dataset.d)},
      {"components", EM_FIELD(int, dataset.components)},
      {"radius", EM_FIELD(double, dataset.radius)},
      {"basis_seed", EM_FIELD(std::uint64_t, dataset.basis_seed)},
      {"data", EM_FIELD(std::string, data_path)},
      {"eval_n", EM_FIELD(int, eval_n)},
      {"eval_seed", EM_FIELD(std::uint64_t, eval_seed)},

      {"widths", EM_FIELD(std::vector<int>, widths)},
      {"activation",
       {[](const RunConfig& c) { return json(std::string(to_string(c.activation))); },
        [](RunConfig& c, const json& v) { c.activation = activation_from_string(v.get<std::string>()); }}},
      {"output_scale", EM_FIELD(double, output_scale)},
      {"init_seed", EM_FIELD(std::uint64_t, init_seed)},

      {"batch_size", EM_FIELD(int, train.batch_size)},
      {"lr", EM_FIELD(double, train.lr)},
      {"iters_phase1", EM_FIELD(int, train.iters_phase1)},
      {"iters_phase2", EM_FIELD(int, train.iters_phase2)},
      {"t_star", EM_FIELD(double, train.t_star)},
      {"eps_max", EM_FIELD(double, train.eps_max)},
      {"dt", EM_FIELD(double, train.dt)},
      {"m_langevin", EM_FIELD(int, train.m_langevin)},
      {"lambda_cd", EM_FIELD(double, train.lambda_cd)},
      {"trim_alpha", EM_FIELD(double, train.trim_alpha)},
      {"clamp_beta", EM_FIELD(double, train.clamp_beta)},
      {"ema_decay_phase1", EM_FIELD(double, train.ema_decay_phase1)},
      {"ema_decay_phase2", EM_FIELD(double, train.ema_decay_phase2)},
      {"neg_data_fraction", EM_FIELD(double, train.neg_data_fraction)},
      {"data_init_temperature",
       {[](const RunConfig& c) {
          return json(c.train.data_init_temperature == DataInitTemperature::schedule ? "schedule" : "eps_max");
        },
        [](RunConfig& c, const json& v) {
          const auto s = v.get<std::string>();
          if (s == "schedule")
            c.train.data_init_temperature = DataInitTemperature::schedule;
          else if (s == "eps_max")
            c.train.data_init_temperature = DataInitTemperature::constant_eps_max;
          else
            throw ConfigError("data_init_temperature: expected schedule or eps_max, got '" + s + "'");
        }}},
      {"seed", EM_FIELD(std::uint64_t, train.seed)},
      {"phase", EM_FIELD(std::string, phase)},
      {"checkpoint_every", EM_FIELD(int, checkpoint_every)},

      {"tau_s", EM_FIELD(double, tau_s)},
      {"integrator",
       {[](const RunConfig& c) { return json(std::string(integrator_name(c.integrator))); },
        [](RunConfig& c, const json& v) { c.integrator = integrator_from(v.get<std::string>()); }}},
      {"num_chains", EM_FIELD(int, num_chains)},
      {"chain_init",
       {[](const RunConfig& c) { return json(c.chain_init == ChainInit::noise ? "noise" : "data"); },
        [](RunConfig& c, const json& v) {
          const auto s = v.get<std::string>();
          if (s == "noise")
            c.chain_init = ChainInit::noise;
          else if (s == "data")
            c.chain_init = ChainInit::data;
          else
            throw ConfigError("chain_init: expected noise or data, got '" + s + "'");
        }}},
      {"data_chains_at_eps_max", EM_FIELD(bool, data_chains_at_eps_max)},
      {"sample_seed", EM_FIELD(std::uint64_t, sample_seed)},
      {"trajectory", EM_FIELD(bool, trajectory)},
      {"trajectory_every", EM_FIELD(int, trajectory_every)},

      {"problem", EM_FIELD(std::string, problem_path)},
      {"tau", EM_FIELD(double, lid_tau)},
      {"grad_warn_bound", EM_FIELD(double, grad_warn_bound)},
      {"lid_top_k", EM_FIELD(int, lid_top_k)},
      {"bounds", EM_FIELD(Bounds, bounds)},
      {"resolution", EM_FIELD(int, resolution)},
      {"ablate_n", EM_FIELD(std::vector<int>, ablate_n)},
      {"ablate_d", EM_FIELD(std::vector<int>, ablate_d)},
      {"ablate_repeats", EM_FIELD(int, ablate_repeats)},
      {"sinkhorn_kappa", EM_FIELD(double, sinkhorn_kappa)},
      {"tau_grid", EM_FIELD(std::vector<double>, tau_grid)},
      {"checkpoint", EM_FIELD(std::string, checkpoint)},
      {"out", EM_FIELD(std::string, out)},
      {"threads", EM_FIELD(int, threads)},
  };
  return table;
}

#undef EM_FIELD

}  // namespace

void RunConfig::validate() const {
  train_config().validate();
  sample_config().validate();
  if (phase != "phase1" && phase != "phase2" && phase != "both")
    throw ConfigError("phase: expected phase1, phase2 or both, got '" + phase + "'");
  for (int w : widths)
    if (w < 1) throw ConfigError("widths: every width must be >= 1");
  if (!(output_scale > 0.0)) throw ConfigError("output_scale: must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every: must be >= 0");
  if (eval_n < 1) throw ConfigError("eval_n: must be >= 1");
  if (resolution < 2) throw ConfigError("resolution: must be >= 2");
  if (ablate_repeats < 1) throw ConfigError("ablate_repeats: must be >= 1");
  if (!(sinkhorn_kappa > 0.0)) throw ConfigError("sinkhorn_kappa: must be positive");
  if (lid_top_k < 0) throw ConfigError("lid_top_k: must be >= 0");
}

SampleConfig RunConfig::sample_config() const {
  SampleConfig s;
  s.tau_s = tau_s;
  s.dt = train.dt;
  s.t_star = train.t_star;
  s.eps_max = train.eps_max;
  s.integrator = integrator;
  s.num_chains = num_chains;
  s.init = chain_init;
  s.data_chains_at_eps_max = data_chains_at_eps_max;
  s.seed = sample_seed;
  s.record_trajectory = trajectory;
  s.trajectory_every = trajectory_every;
  s.threads = threads;
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.threads = threads;
  return t;
}

json config_to_json(const RunConfig& cfg) {
  json doc = json::object();
  for (const auto& [key, field] : fields()) doc[key] = field.get(cfg);
  return doc;
}

void apply_config_json(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected a flat JSON object");
  for (const auto& [key, value] : doc.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const json::exception& e) {
      throw ConfigError(key + ": wrong type (" + e.what() + ")");
    }
  }
}

RunConfig config_from_json(const json& doc) {
  RunConfig cfg;
  apply_config_json(cfg, doc);
  return cfg;
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  json value = it->second.get(cfg).is_string() ? json(text) : json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  apply_config_json(cfg, json{{key, value}});
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : fields()) keys.push_back(key);
  return keys;
}

}  // namespace energy_matching
