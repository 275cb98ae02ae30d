#include "lbo/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <utility>

namespace lbo::dyn {

using Eigen::Index;

void EmbeddingConfig::validate() const {
  if (tau_d < 1 || dim < 1 || k_neighbors < 1 || n_anchors < 1 || n_runs < 1)
    throw ConfigInvalidError("EmbeddingConfig: all counts must be >= 1");
}

PhaseSpace delay_embed(std::span<const double> samples, int tau_d, int dim) {
  if (tau_d < 1 || dim < 1) throw ConfigInvalidError("delay_embed: tau_d and dim must be >= 1");
  const auto T = static_cast<Index>(samples.size());
  const Index n = T - static_cast<Index>(dim - 1) * tau_d;
  if (n < 1)
    throw SeriesTooShortError("delay_embed: need at least (dim-1)*tau_d + 1 samples");
  PhaseSpace ps;
  ps.tau_d = tau_d;
  ps.dim = dim;
  ps.vectors.resize(n, dim);
  for (Index i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j)
      ps.vectors(i, j) = samples[static_cast<std::size_t>(i + static_cast<Index>(j) * tau_d)];
  return ps;
}

namespace {

constexpr int kAmiBins = 16;

double average_mutual_information(std::span<const double> x, int lag, double lo, double width) {
  const auto T = static_cast<int>(x.size());
  const int n_pairs = T - lag;
  double joint[kAmiBins][kAmiBins] = {};
  double px[kAmiBins] = {};
  double py[kAmiBins] = {};
  const auto bin_of = [&](double v) {
    int b = static_cast<int>((v - lo) / width);
    if (b < 0) b = 0;
    if (b >= kAmiBins) b = kAmiBins - 1;
    return b;
  };
  const double inv = 1.0 / static_cast<double>(n_pairs);
  for (int t = 0; t < n_pairs; ++t) {
    const int a = bin_of(x[static_cast<std::size_t>(t)]);
    const int b = bin_of(x[static_cast<std::size_t>(t + lag)]);
    joint[a][b] += inv;
    px[a] += inv;
    py[b] += inv;
  }
  double mi = 0.0;
  for (int a = 0; a < kAmiBins; ++a)
    for (int b = 0; b < kAmiBins; ++b)
      if (joint[a][b] > 0.0) mi += joint[a][b] * std::log(joint[a][b] / (px[a] * py[b]));
  return mi;
}

}  // namespace

int estimate_delay(std::span<const double> samples) {
  const auto T = static_cast<int>(samples.size());
  if (T < 100) throw SeriesTooShortError("estimate_delay: need at least 100 samples");
  const int max_lag = std::max(2, T / 10);

  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn_it;
  double width = (*mx_it - lo) / kAmiBins;
  if (!(width > 0.0)) throw NoDelayFoundError("estimate_delay: constant series");

  // First lag where AMI stops decreasing.
  double prev = average_mutual_information(samples, 1, lo, width);
  for (int lag = 1; lag < max_lag; ++lag) {
    const double next = average_mutual_information(samples, lag + 1, lo, width);
    if (next >= prev) return lag;
    prev = next;
  }

  // Fallback: first lag with autocorrelation below 1/e.
  const double mean =
      std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(T);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  const double threshold = 1.0 / std::exp(1.0);
  for (int lag = 1; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int t = 0; t + lag < T; ++t)
      acc += (samples[static_cast<std::size_t>(t)] - mean) *
             (samples[static_cast<std::size_t>(t + lag)] - mean);
    if (acc / var < threshold) return lag;
  }
  throw NoDelayFoundError("estimate_delay: no AMI minimum and autocorrelation never below 1/e");
}

DimensionEstimate estimate_dimension(std::span<const double> samples, int tau_d) {
  if (tau_d < 1) throw ConfigInvalidError("estimate_dimension: tau_d must be >= 1");
  constexpr int kMaxDim = 10;
  constexpr double kRatioThreshold = 15.0;
  constexpr double kFnnTarget = 0.01;
  const auto T = static_cast<Index>(samples.size());

  for (int d = 1; d <= kMaxDim; ++d) {
    // Compare d-dim neighbors against the (d+1)-th delay coordinate, so only
    // points that still exist in d+1 dimensions participate.
    const Index n = T - static_cast<Index>(d) * tau_d;
    if (n < 2) {
      if (d == 1) throw SeriesTooShortError("estimate_dimension: series too short for FNN");
      return {kMaxDim, true};
    }
    const PhaseSpace ps = delay_embed(samples, tau_d, d);
    long false_count = 0;
    for (Index i = 0; i < n; ++i) {
      Index best = -1;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        double d2 = 0.0;
        for (int k = 0; k < d; ++k) {
          const double diff = ps.vectors(i, k) - ps.vectors(j, k);
          d2 += diff * diff;
          if (d2 >= best_d2) break;
        }
        if (d2 < best_d2) {
          best_d2 = d2;
          best = j;
        }
      }
      const double extra =
          std::abs(samples[static_cast<std::size_t>(i + static_cast<Index>(d) * tau_d)] -
                   samples[static_cast<std::size_t>(best + static_cast<Index>(d) * tau_d)]);
      if (best_d2 == 0.0) {
        if (extra > 0.0) ++false_count;
      } else if (extra / std::sqrt(best_d2) > kRatioThreshold) {
        ++false_count;
      }
    }
    if (static_cast<double>(false_count) / static_cast<double>(n) < kFnnTarget)
      return {d, false};
  }
  return {kMaxDim, true};
}

double translational_error_once(const PhaseSpace& phase, int tau_d, int k_neighbors,
                                int n_anchors, rng::Engine& eng) {
  if (k_neighbors < 1 || n_anchors < 1)
    throw ConfigInvalidError("translational_error_once: K and anchor count must be >= 1");
  const Index n_vec = phase.vectors.rows();
  const Index n_valid = n_vec - tau_d;  // rows with a tau_d-ahead image
  if (n_valid < k_neighbors + 1)
    throw SeriesTooShortError("translational_error_once: not enough phase vectors");

  std::vector<Index> pool(static_cast<std::size_t>(n_valid));
  std::iota(pool.begin(), pool.end(), Index{0});
  rng::shuffle(pool, eng);

  const int dim = phase.dim;
  const auto displacement = [&](Index r, Eigen::VectorXd& out) {
    out = (phase.vectors.row(r + tau_d) - phase.vectors.row(r)).transpose();
  };

  const auto target = std::min<std::size_t>(static_cast<std::size_t>(n_anchors),
                                            static_cast<std::size_t>(n_valid));
  std::vector<double> values;
  values.reserve(target);
  std::vector<std::pair<double, Index>> cand;
  cand.reserve(static_cast<std::size_t>(n_valid));
  Eigen::VectorXd v(dim), vbar(dim);
  bool skipped_zero_mean = false;

  for (std::size_t pi = 0; pi < pool.size() && values.size() < target; ++pi) {
    const Index a = pool[pi];
    cand.clear();
    for (Index r = 0; r < n_valid; ++r) {
      if (std::abs(r - a) <= tau_d) continue;  // geometric, not temporal, neighbors
      const double d2 = (phase.vectors.row(r) - phase.vectors.row(a)).squaredNorm();
      cand.emplace_back(d2, r);
    }
    if (cand.size() < static_cast<std::size_t>(k_neighbors))
      throw SeriesTooShortError("translational_error_once: fewer candidates than K");
    std::partial_sort(cand.begin(), cand.begin() + k_neighbors, cand.end());

    vbar.setZero();
    displacement(a, v);
    vbar += v;
    for (int k = 0; k < k_neighbors; ++k) {
      displacement(cand[static_cast<std::size_t>(k)].second, v);
      vbar += v;
    }
    vbar /= static_cast<double>(k_neighbors + 1);
    const double denom = vbar.squaredNorm();
    if (denom < 1e-12) {
      skipped_zero_mean = true;  // resample: move on to the next pooled anchor
      continue;
    }

    double e = 0.0;
    displacement(a, v);
    e += (v - vbar).squaredNorm();
    for (int k = 0; k < k_neighbors; ++k) {
      displacement(cand[static_cast<std::size_t>(k)].second, v);
      e += (v - vbar).squaredNorm();
    }
    values.push_back(e / (static_cast<double>(k_neighbors + 1) * denom));
  }

  if (values.size() < target && skipped_zero_mean)
    throw ZeroMeanDisplacementError(
        "translational_error_once: anchor resampling exhausted all candidates");
  if (values.empty())
    throw SeriesTooShortError("translational_error_once: no usable anchors");

  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TransErrorResult translational_error(std::span<const double> samples,
                                     const EmbeddingConfig& config) {
  config.validate();
  const PhaseSpace phase = delay_embed(samples, config.tau_d, config.dim);
  TransErrorResult result;
  result.run_medians.reserve(static_cast<std::size_t>(config.n_runs));
  for (int run = 0; run < config.n_runs; ++run) {
    rng::Engine eng(rng::seed_mix(config.seed, static_cast<std::uint64_t>(run) + 1));
    result.run_medians.push_back(
        translational_error_once(phase, config.tau_d, config.k_neighbors, config.n_anchors, eng));
  }
  result.mean = std::accumulate(result.run_medians.begin(), result.run_medians.end(), 0.0) /
                static_cast<double>(config.n_runs);
  double acc = 0.0;
  for (double m : result.run_medians) acc += (m - result.mean) * (m - result.mean);
  result.stddev = std::sqrt(acc / static_cast<double>(config.n_runs));
  return result;
}

}  // namespace lbo::dyn
