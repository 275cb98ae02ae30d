#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "lbo/errors.hpp"
#include "lbo/rng.hpp"

namespace lbo::dyn {

struct EmbeddingConfig {
  int tau_d = 1;
  int dim = 1;
  int k_neighbors = 5;
  int n_anchors = 100;
  int n_runs = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Delay-coordinate vectors: row i is [x(i), x(i+tau), ..., x(i+(dim-1)tau)].
struct PhaseSpace {
  Eigen::MatrixXd vectors;  // (T - (dim-1)*tau) x dim
  int tau_d = 1;
  int dim = 1;
};

struct TransErrorResult {
  std::vector<double> run_medians;
  double mean = 0.0;
  double stddev = 0.0;  // population std of the run medians
};

PhaseSpace delay_embed(std::span<const double> samples, int tau_d, int dim);

/// First local minimum of average mutual information over lags 1..T/10
/// (16-bin histogram); falls back to the first lag with autocorrelation
/// below 1/e when AMI has no local minimum.
int estimate_delay(std::span<const double> samples);

struct DimensionEstimate {
  int dim = 1;
  bool capped = false;  // false-neighbor fraction never dropped below 1%
};

/// Smallest dimension in 1..10 where the false-nearest-neighbor fraction
/// (distance-ratio threshold 15) drops below 1%.
DimensionEstimate estimate_dimension(std::span<const double> samples, int tau_d);

/// One run of the translational-error statistic: the median over seeded
/// random anchors of Eq.-style dispersion of neighboring displacement
/// vectors. Neighbors within tau_d rows of the anchor are excluded.
double translational_error_once(const PhaseSpace& phase, int tau_d, int k_neighbors,
                                int n_anchors, rng::Engine& eng);

/// n_runs independent repetitions with seeds derived from config.seed.
TransErrorResult translational_error(std::span<const double> samples,
                                     const EmbeddingConfig& config);

}  // namespace lbo::dyn
