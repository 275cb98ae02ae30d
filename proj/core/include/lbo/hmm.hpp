#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lbo/series.hpp"

namespace lbo::hmm {

/// Gaussian-emission hidden Markov model. start sums to 1 and every row of
/// trans sums to 1 (within 1e-9); variances sit at or above the floor.
struct GaussianHmm {
  int n_states = 0;
  Eigen::VectorXd start;   // N
  Eigen::MatrixXd trans;   // N x N, row-stochastic
  Eigen::VectorXd means;   // N
  Eigen::VectorXd vars;    // N

  void validate() const;
};

inline constexpr double kVarFloor = 1e-6;

/// Per-training-window log-likelihoods with the data needed to forecast:
/// each window's last sample and its next-step target.
struct LikelihoodTable {
  std::vector<double> loglik;
  std::vector<double> last_sample;
  std::vector<double> next_sample;

  std::size_t size() const { return loglik.size(); }
};

/// log P(window | hmm) via the scaled forward algorithm.
double forward_loglik(const GaussianHmm& hmm, std::span<const double> window);

struct FitOptions {
  int max_iters = 100;
  double tol = 1e-6;  // stop when relative log-likelihood improvement drops below
};

struct FitResult {
  GaussianHmm model;
  std::vector<double> loglik_per_iter;  // non-decreasing within 1e-8
};

/// Baum-Welch on one observation sequence. Initialization is a seeded
/// k-means partition of the sample values; EM is deterministic afterwards.
/// Throws DegenerateFitError when a state's responsibility mass collapses.
FitResult fit_baum_welch(std::span<const double> obs, int n_states, std::uint64_t seed,
                         const FitOptions& options = {});

/// Free-parameter count: (N-1) start + N(N-1) transitions + 2N Gaussian.
long free_parameters(int n_states);

/// BIC = -2 logL + kappa ln(n_obs).
double bic(const GaussianHmm& hmm, std::span<const double> obs);

struct BicRow {
  int n_states = 0;
  double loglik = 0.0;
  double bic = 0.0;
  bool ok = false;
  std::string note;
};

struct SelectResult {
  GaussianHmm best;
  std::vector<BicRow> table;
};

/// Fits every state count in [n_min, n_max], returns the argmin-BIC model
/// (ties toward smaller N). States that fail to fit are recorded and
/// skipped; throws only if every candidate fails.
SelectResult select_states_bic(std::span<const double> obs, int n_min, int n_max,
                               std::uint64_t seed, const FitOptions& options = {});

LikelihoodTable build_table(const GaussianHmm& hmm, const WindowSet& training_windows);

/// Closest-log-likelihood-window forecaster: find the training window whose
/// log-likelihood is nearest the test window's (ties to the smallest index)
/// and apply its stored next-step change to the test window's last sample.
double hmm_forecast(const GaussianHmm& hmm, const LikelihoodTable& table,
                    std::span<const double> window);

double hmm_predict_rmse(const GaussianHmm& hmm, const LikelihoodTable& table,
                        const QuasiStaticRecord& record, const ScalingParams& scaling, int t_x);

/// Checkpoint JSON: {n_states, start, trans, means, vars} plus the scaling,
/// window length and likelihood table the forecaster needs.
void save_hmm(const std::filesystem::path& path, const GaussianHmm& hmm,
              const LikelihoodTable& table, const ScalingParams& scaling, int t_x);
struct LoadedHmm {
  GaussianHmm model;
  LikelihoodTable table;
  ScalingParams scaling;
  int t_x = 0;
};
LoadedHmm load_hmm(const std::filesystem::path& path);

/// BIC table CSV: "n_states,loglik,bic".
void write_bic_csv(const std::filesystem::path& path, const std::vector<BicRow>& table);

}  // namespace lbo::hmm
