#include "lbo/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "lbo/rng.hpp"

namespace lbo::datagen {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void SynthConfig::validate() const {
  if (!(sample_rate_hz > 0.0)) throw ConfigInvalidError("SynthConfig: sample_rate_hz must be > 0");
  if (samples_per_record < 2) throw ConfigInvalidError("SynthConfig: samples_per_record too small");
  if (!(base_freq_hz > 0.0 && burst_freq_hz > 0.0 && mod_freq_hz > 0.0))
    throw ConfigInvalidError("SynthConfig: frequencies must be > 0");
  if (!(burst_rate_at_lbo > 0.0)) throw ConfigInvalidError("SynthConfig: burst rate must be > 0");
  if (!(noise_floor > 0.0)) throw ConfigInvalidError("SynthConfig: noise_floor must be > 0");
  if (!(burst_decay_s > 0.0 && burst_attack_s > 0.0))
    throw ConfigInvalidError("SynthConfig: burst time constants must be > 0");
  if (phi_grid.empty() || phi_grid.front() != 1.0)
    throw ConfigInvalidError("SynthConfig: phi_grid must start at exactly 1");
  for (std::size_t i = 1; i < phi_grid.size(); ++i)
    if (!(phi_grid[i] > phi_grid[i - 1]))
      throw ConfigInvalidError("SynthConfig: phi_grid must be strictly increasing");
  if (std::find(phi_grid.begin(), phi_grid.end(), transition_ratio) == phi_grid.end())
    throw ConfigInvalidError("SynthConfig: transition_ratio must be a grid point");
  if (!(air_flow_slpm > 0.0)) throw ConfigInvalidError("SynthConfig: air_flow_slpm must be > 0");
}

double severity(const SynthConfig& config, double phi_ratio) {
  if (config.transition_ratio <= 1.0) return 0.0;
  const double s = (config.transition_ratio - phi_ratio) / (config.transition_ratio - 1.0);
  return std::clamp(s, 0.0, 1.0);
}

QuasiStaticRecord synth_record(const SynthConfig& config, double phi_ratio,
                               std::uint64_t sub_seed) {
  config.validate();
  if (std::find(config.phi_grid.begin(), config.phi_grid.end(), phi_ratio) ==
      config.phi_grid.end())
    throw ConfigInvalidError("synth_record: phi_ratio not in the configured grid");

  const double s = severity(config, phi_ratio);
  const double amplitude = 1.0 - 0.5 * s;
  const double noise_sigma = config.noise_floor * (1.0 + 2.0 * s);
  const double burst_rate = s * config.burst_rate_at_lbo;
  const double mod_depth =
      config.mod_depth_slope * std::pow(phi_ratio - 1.0, config.mod_depth_gamma);
  const double dt = 1.0 / config.sample_rate_hz;
  const int n = config.samples_per_record;
  const double duration = n * dt;

  rng::Engine eng(rng::seed_mix(config.seed, sub_seed));
  const double theta0 = rng::uniform(eng, 0.0, kTwoPi);

  std::vector<double> samples(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    const double jitter = mod_depth * std::sin(kTwoPi * config.mod_freq_hz * t + theta0);
    samples[static_cast<std::size_t>(i)] =
        amplitude * std::sin(kTwoPi * config.base_freq_hz * t + jitter);
  }

  if (burst_rate > 0.0) {
    const double support = config.burst_attack_s + 6.0 * config.burst_decay_s;
    double t_event = rng::exponential(eng, burst_rate);
    while (t_event < duration) {
      const double phase = rng::uniform(eng, 0.0, kTwoPi);
      const int first = static_cast<int>(std::ceil(t_event / dt));
      const int last = std::min(n - 1, static_cast<int>((t_event + support) / dt));
      for (int i = first; i <= last; ++i) {
        const double local = i * dt - t_event;
        samples[static_cast<std::size_t>(i)] +=
            config.burst_amp * (1.0 - std::exp(-local / config.burst_attack_s)) *
            std::exp(-local / config.burst_decay_s) *
            std::sin(kTwoPi * config.burst_freq_hz * local + phase);
      }
      t_event += rng::exponential(eng, burst_rate);
    }
  }

  for (int i = 0; i < n; ++i)
    samples[static_cast<std::size_t>(i)] += noise_sigma * rng::gaussian(eng);

  QuasiStaticRecord record;
  record.phi_ratio = phi_ratio;
  record.series = TimeSeries::make(std::move(samples), config.sample_rate_hz);
  record.label = phi_ratio < config.transition_ratio ? Label::Unhealthy : Label::Healthy;
  record.validate();
  return record;
}

Protocol synth_protocol(const SynthConfig& config) {
  config.validate();
  Protocol protocol;
  protocol.name = config.name;
  protocol.air_flow_slpm = config.air_flow_slpm;
  protocol.transition_ratio = config.transition_ratio;
  protocol.records.reserve(config.phi_grid.size());
  for (double phi : config.phi_grid)
    protocol.records.push_back(synth_record(config, phi, std::bit_cast<std::uint64_t>(phi)));
  protocol.validate();
  return protocol;
}

std::vector<SynthConfig> default_protocol_suite(std::uint64_t seed) {
  // Grids mirror the five-protocol reference/test structure; the transition
  // sits at the first grid point at or above the annotated bifurcation near
  // 1.38. The acoustic tone shifts slightly with air flow.
  struct Row {
    const char* name;
    double air_flow;
    double base_freq;
    double transition;
    std::vector<double> grid;
  };
  const std::vector<Row> rows = {
      {"90slpm", 90.0, 120.0, 1.428,
       {1, 1.142, 1.214, 1.285, 1.357, 1.428, 1.500, 1.571, 1.642, 1.714, 1.785}},
      {"70slpm", 70.0, 124.0, 1.384,
       {1, 1.076, 1.153, 1.23, 1.307, 1.384, 1.461, 1.538, 1.615, 1.692, 1.769}},
      {"75slpm", 75.0, 123.0, 1.428,
       {1, 1.071, 1.143, 1.214, 1.285, 1.357, 1.428, 1.5, 1.571, 1.643, 1.714, 1.785}},
      {"80slpm", 80.0, 122.0, 1.4,
       {1, 1.066, 1.133, 1.2, 1.266, 1.33, 1.4, 1.466, 1.533, 1.6, 1.67}},
      {"85slpm", 85.0, 121.0, 1.428,
       {1, 1.071, 1.143, 1.214, 1.285, 1.357, 1.428, 1.5, 1.571, 1.643, 1.714, 1.785}},
  };
  std::vector<SynthConfig> suite;
  suite.reserve(rows.size());
  for (const auto& row : rows) {
    SynthConfig cfg;
    cfg.name = row.name;
    cfg.air_flow_slpm = row.air_flow;
    cfg.base_freq_hz = row.base_freq;
    cfg.transition_ratio = row.transition;
    cfg.phi_grid = row.grid;
    cfg.seed = rng::seed_mix(seed, rng::fnv1a(row.name));
    suite.push_back(std::move(cfg));
  }
  return suite;
}

}  // namespace lbo::datagen
