#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lbo/series.hpp"

namespace lbo::datagen {

/// Synthetic quasi-static generator. The signal at ratio phi is
///   A(phi) * sin(2*pi*f*t + jitter) + burst(phi, t) + noise(t)
/// with severity s(phi) = clamp((transition - phi)/(transition - 1), 0, 1):
/// tone amplitude A = 1 - 0.5*s, Poisson bursts at rate s*burst_rate_at_lbo,
/// Gaussian noise sigma = noise_floor*(1 + 2*s). The jitter term is phase
/// modulation whose depth grows away from blowout, so conditions farther
/// from the training regime are progressively harder for a predictor
/// trained at phi = 1.
struct SynthConfig {
  double sample_rate_hz = 2000.0;
  int samples_per_record = 20000;  // 10 s at desk scale
  double base_freq_hz = 120.0;     // dominant acoustic tone
  std::vector<double> phi_grid;    // ascending, starts at exactly 1
  double transition_ratio = 1.428;
  double burst_rate_at_lbo = 8.0;  // events per second at phi = 1
  double noise_floor = 0.01;
  std::uint64_t seed = 1;

  std::string name = "90slpm";
  double air_flow_slpm = 90.0;

  // Texture of the surrogate, exposed for experiments.
  double mod_freq_hz = 40.0;       // phase-jitter modulation tone
  double mod_depth_slope = 1.0;    // radians at (phi - 1) = 1 before gamma
  double mod_depth_gamma = 0.5;    // depth = slope * (phi - 1)^gamma
  double burst_amp = 1.8;
  double burst_freq_hz = 300.0;
  double burst_decay_s = 0.015;
  double burst_attack_s = 0.002;

  void validate() const;
};

/// Severity of degradation: 1 at blowout, 0 at and above the transition.
double severity(const SynthConfig& config, double phi_ratio);

/// Deterministic per (config.seed, sub_seed); synth_protocol derives
/// sub_seed from the ratio's bit pattern so records depend only on
/// (seed, phi_ratio).
QuasiStaticRecord synth_record(const SynthConfig& config, double phi_ratio,
                               std::uint64_t sub_seed);

Protocol synth_protocol(const SynthConfig& config);

/// The five-protocol suite mirroring the reference/test structure: one
/// reference at 90 SLPM plus four test protocols, each with its own grid,
/// annotated transition and tone frequency.
std::vector<SynthConfig> default_protocol_suite(std::uint64_t seed);

}  // namespace lbo::datagen
