#include "lbo/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "lbo/io.hpp"
#include "lbo/rng.hpp"

namespace lbo::hmm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void log_emissions(const GaussianHmm& hmm, double x, VectorXd& out) {
  for (int i = 0; i < hmm.n_states; ++i) {
    const double d = x - hmm.means(i);
    out(i) = -0.5 * (kLog2Pi + std::log(hmm.vars(i)) + d * d / hmm.vars(i));
  }
}

}  // namespace

void GaussianHmm::validate() const {
  if (n_states < 1) throw ConfigInvalidError("GaussianHmm: n_states must be >= 1");
  if (start.size() != n_states || means.size() != n_states || vars.size() != n_states ||
      trans.rows() != n_states || trans.cols() != n_states)
    throw ShapeMismatchError("GaussianHmm: inconsistent dimensions");
  if (std::abs(start.sum() - 1.0) > 1e-9)
    throw ConfigInvalidError("GaussianHmm: start probabilities must sum to 1");
  for (int i = 0; i < n_states; ++i) {
    if (std::abs(trans.row(i).sum() - 1.0) > 1e-9)
      throw ConfigInvalidError("GaussianHmm: transition rows must sum to 1");
    if ((trans.row(i).array() < 0.0).any() || start(i) < 0.0)
      throw ConfigInvalidError("GaussianHmm: negative probability");
    if (vars(i) < kVarFloor) throw ConfigInvalidError("GaussianHmm: variance below floor");
  }
}

double forward_loglik(const GaussianHmm& hmm, std::span<const double> window) {
  if (window.empty()) throw EmptyError("forward_loglik: empty window");
  const int N = hmm.n_states;
  VectorXd le(N), w(N), alpha(N), alpha_next(N);
  double loglik = 0.0;

  // Scaled forward pass; emissions are max-shifted before exponentiation so
  // even far-out samples cannot underflow to an all-zero step.
  log_emissions(hmm, window[0], le);
  double shift = le.maxCoeff();
  w = (le.array() - shift).exp();
  alpha = hmm.start.cwiseProduct(w);
  double c = alpha.sum();
  if (c <= 0.0) return -std::numeric_limits<double>::infinity();
  alpha /= c;
  loglik += std::log(c) + shift;

  for (std::size_t t = 1; t < window.size(); ++t) {
    log_emissions(hmm, window[t], le);
    shift = le.maxCoeff();
    w = (le.array() - shift).exp();
    alpha_next = (hmm.trans.transpose() * alpha).cwiseProduct(w);
    c = alpha_next.sum();
    if (c <= 0.0) return -std::numeric_limits<double>::infinity();
    alpha = alpha_next / c;
    loglik += std::log(c) + shift;
  }
  return loglik;
}

long free_parameters(int n_states) {
  const long N = n_states;
  return (N - 1) + N * (N - 1) + 2 * N;
}

double bic(const GaussianHmm& hmm, std::span<const double> obs) {
  if (obs.empty()) throw EmptyError("bic: empty observations");
  const double loglik = forward_loglik(hmm, obs);
  return -2.0 * loglik +
         static_cast<double>(free_parameters(hmm.n_states)) *
             std::log(static_cast<double>(obs.size()));
}

namespace {

// Seeded 1-D k-means over the sample values; returns per-sample assignments.
std::vector<int> kmeans_partition(std::span<const double> obs, int n_states, std::uint64_t seed) {
  const auto T = obs.size();
  rng::Engine eng(seed);

  std::vector<double> centers;
  centers.reserve(static_cast<std::size_t>(n_states));
  std::vector<std::size_t> idx(T);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::shuffle(idx, eng);
  for (std::size_t k = 0; k < T && static_cast<int>(centers.size()) < n_states; ++k) {
    const double v = obs[idx[k]];
    if (std::find(centers.begin(), centers.end(), v) == centers.end()) centers.push_back(v);
  }
  if (static_cast<int>(centers.size()) < n_states)
    throw DegenerateFitError("fit_baum_welch: fewer distinct values than states");

  std::vector<int> assign(T, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (std::size_t t = 0; t < T; ++t) {
      int best = 0;
      double best_d = std::abs(obs[t] - centers[0]);
      for (int k = 1; k < n_states; ++k) {
        const double d = std::abs(obs[t] - centers[static_cast<std::size_t>(k)]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[t] != best) {
        assign[t] = best;
        changed = true;
      }
    }
    std::vector<double> sums(static_cast<std::size_t>(n_states), 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_states), 0);
    for (std::size_t t = 0; t < T; ++t) {
      sums[static_cast<std::size_t>(assign[t])] += obs[t];
      ++counts[static_cast<std::size_t>(assign[t])];
    }
    for (int k = 0; k < n_states; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0)
        centers[static_cast<std::size_t>(k)] =
            sums[static_cast<std::size_t>(k)] / static_cast<double>(counts[static_cast<std::size_t>(k)]);
      else
        centers[static_cast<std::size_t>(k)] = obs[idx[static_cast<std::size_t>(
            static_cast<std::size_t>(k) % T)]];  // re-seed an empty cluster
    }
    if (!changed) break;
  }

  // Canonical state order: ascending center.
  std::vector<int> order(static_cast<std::size_t>(n_states));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return centers[static_cast<std::size_t>(a)] < centers[static_cast<std::size_t>(b)]; });
  std::vector<int> rank(static_cast<std::size_t>(n_states));
  for (int k = 0; k < n_states; ++k) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;
  for (auto& a : assign) a = rank[static_cast<std::size_t>(a)];
  return assign;
}

GaussianHmm init_from_partition(std::span<const double> obs, int n_states,
                                const std::vector<int>& assign) {
  const auto T = obs.size();
  GaussianHmm hmm;
  hmm.n_states = n_states;
  hmm.start = VectorXd::Zero(n_states);
  hmm.trans = MatrixXd::Zero(n_states, n_states);
  hmm.means = VectorXd::Zero(n_states);
  hmm.vars = VectorXd::Zero(n_states);

  std::vector<double> count(static_cast<std::size_t>(n_states), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(assign[t]);
    count[k] += 1.0;
    hmm.means(assign[t]) += obs[t];
  }
  for (int k = 0; k < n_states; ++k) {
    if (count[static_cast<std::size_t>(k)] < 1.0)
      throw DegenerateFitError("fit_baum_welch: empty initial cluster");
    hmm.means(k) /= count[static_cast<std::size_t>(k)];
  }
  for (std::size_t t = 0; t < T; ++t) {
    const double d = obs[t] - hmm.means(assign[t]);
    hmm.vars(assign[t]) += d * d;
  }
  for (int k = 0; k < n_states; ++k) {
    hmm.vars(k) = std::max(hmm.vars(k) / count[static_cast<std::size_t>(k)], kVarFloor);
    hmm.start(k) = count[static_cast<std::size_t>(k)] / static_cast<double>(T);
  }
  // Transition counts with +1 smoothing so no row starts at exactly zero.
  MatrixXd counts = MatrixXd::Ones(n_states, n_states);
  for (std::size_t t = 1; t < T; ++t) counts(assign[t - 1], assign[t]) += 1.0;
  for (int i = 0; i < n_states; ++i) hmm.trans.row(i) = counts.row(i) / counts.row(i).sum();
  return hmm;
}

}  // namespace

FitResult fit_baum_welch(std::span<const double> obs, int n_states, std::uint64_t seed,
                         const FitOptions& options) {
  if (n_states < 1) throw ConfigInvalidError("fit_baum_welch: n_states must be >= 1");
  if (obs.size() < static_cast<std::size_t>(10 * n_states))
    throw ConfigInvalidError("fit_baum_welch: need at least 10 * n_states samples");
  if (options.max_iters < 1) throw ConfigInvalidError("fit_baum_welch: max_iters must be >= 1");

  const auto T = static_cast<Index>(obs.size());
  const int N = n_states;
  GaussianHmm hmm = init_from_partition(obs, N, kmeans_partition(obs, N, seed));

  FitResult result;
  MatrixXd w(T, N);        // shifted emission weights
  VectorXd shift(T);       // per-step log shift
  MatrixXd alpha(T, N), beta(T, N);
  VectorXd c(T);

  for (int iter = 0; iter < options.max_iters; ++iter) {
    // E step: scaled forward/backward with max-shifted emissions.
    VectorXd le(N);
    for (Index t = 0; t < T; ++t) {
      log_emissions(hmm, obs[static_cast<std::size_t>(t)], le);
      shift(t) = le.maxCoeff();
      w.row(t) = (le.array() - shift(t)).exp();
    }

    double loglik = 0.0;
    alpha.row(0) = hmm.start.transpose().cwiseProduct(w.row(0));
    c(0) = alpha.row(0).sum();
    if (!(c(0) > 0.0)) throw DegenerateFitError("fit_baum_welch: zero forward mass");
    alpha.row(0) /= c(0);
    loglik += std::log(c(0)) + shift(0);
    for (Index t = 1; t < T; ++t) {
      alpha.row(t) = (alpha.row(t - 1) * hmm.trans).cwiseProduct(w.row(t));
      c(t) = alpha.row(t).sum();
      if (!(c(t) > 0.0)) throw DegenerateFitError("fit_baum_welch: zero forward mass");
      alpha.row(t) /= c(t);
      loglik += std::log(c(t)) + shift(t);
    }
    result.loglik_per_iter.push_back(loglik);

    beta.row(T - 1).setOnes();
    for (Index t = T - 2; t >= 0; --t)
      beta.row(t) =
          (hmm.trans * beta.row(t + 1).transpose().cwiseProduct(w.row(t + 1).transpose()))
              .transpose() /
          c(t + 1);

    // Accumulators. gamma rows sum to 1 by the scaling convention.
    VectorXd gamma_sum = VectorXd::Zero(N);       // over all t
    VectorXd gamma_sum_nolast = VectorXd::Zero(N);
    VectorXd mean_acc = VectorXd::Zero(N);
    MatrixXd xi_sum = MatrixXd::Zero(N, N);
    VectorXd gamma1(N), gamma(N), rhs(N);
    MatrixXd outer(N, N);
    for (Index t = 0; t < T; ++t) {
      gamma = alpha.row(t).cwiseProduct(beta.row(t)).transpose();
      if (t == 0) gamma1 = gamma;
      gamma_sum += gamma;
      mean_acc += gamma * obs[static_cast<std::size_t>(t)];
      if (t < T - 1) {
        gamma_sum_nolast += gamma;
        // xi(i,j) = alpha_t(i) A_ij w_{t+1}(j) beta_{t+1}(j) / c_{t+1}
        rhs = beta.row(t + 1).transpose().cwiseProduct(w.row(t + 1).transpose());
        outer.noalias() = alpha.row(t).transpose() * rhs.transpose();
        xi_sum += outer.cwiseProduct(hmm.trans) / c(t + 1);
      }
    }

    for (int i = 0; i < N; ++i) {
      if (gamma_sum(i) < 1.0)
        throw DegenerateFitError("fit_baum_welch: state " + std::to_string(i) +
                                 " responsibility mass collapsed");
    }

    // M step.
    GaussianHmm next = hmm;
    next.start = gamma1;
    for (int i = 0; i < N; ++i) {
      if (gamma_sum_nolast(i) > 0.0)
        next.trans.row(i) = xi_sum.row(i) / gamma_sum_nolast(i);
      next.means(i) = mean_acc(i) / gamma_sum(i);
    }
    VectorXd var_acc = VectorXd::Zero(N);
    VectorXd dev(N);
    for (Index t = 0; t < T; ++t) {
      gamma = alpha.row(t).cwiseProduct(beta.row(t)).transpose();
      dev = VectorXd::Constant(N, obs[static_cast<std::size_t>(t)]) - next.means;
      var_acc += gamma.cwiseProduct(dev.cwiseAbs2());
    }
    for (int i = 0; i < N; ++i) next.vars(i) = std::max(var_acc(i) / gamma_sum(i), kVarFloor);

    // Renormalize away accumulated rounding.
    next.start /= next.start.sum();
    for (int i = 0; i < N; ++i) next.trans.row(i) /= next.trans.row(i).sum();

    const double prev = iter > 0 ? result.loglik_per_iter[static_cast<std::size_t>(iter - 1)]
                                 : -std::numeric_limits<double>::infinity();
    hmm = std::move(next);
    if (iter > 0 && std::abs(loglik - prev) < options.tol * (std::abs(prev) + 1e-12)) break;
  }

  result.model = std::move(hmm);
  result.model.validate();
  return result;
}

SelectResult select_states_bic(std::span<const double> obs, int n_min, int n_max,
                               std::uint64_t seed, const FitOptions& options) {
  if (n_min < 1 || n_min > n_max)
    throw ConfigInvalidError("select_states_bic: need 1 <= n_min <= n_max");
  SelectResult out;
  bool have_best = false;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int n = n_min; n <= n_max; ++n) {
    BicRow row;
    row.n_states = n;
    try {
      FitResult fit = fit_baum_welch(obs, n, rng::seed_mix(seed, static_cast<std::uint64_t>(n)),
                                     options);
      row.loglik = forward_loglik(fit.model, obs);
      row.bic = -2.0 * row.loglik +
                static_cast<double>(free_parameters(n)) * std::log(static_cast<double>(obs.size()));
      row.ok = true;
      if (row.bic < best_bic) {  // strict: ties stay with the smaller N
        best_bic = row.bic;
        out.best = std::move(fit.model);
        have_best = true;
      }
    } catch (const DegenerateFitError& e) {
      row.ok = false;
      row.note = e.what();
    }
    out.table.push_back(std::move(row));
  }
  if (!have_best) throw DegenerateFitError("select_states_bic: every candidate state count failed");
  return out;
}

LikelihoodTable build_table(const GaussianHmm& hmm, const WindowSet& training_windows) {
  hmm.validate();
  const Index n = training_windows.count();
  LikelihoodTable table;
  table.loglik.resize(static_cast<std::size_t>(n));
  table.last_sample.resize(static_cast<std::size_t>(n));
  table.next_sample.resize(static_cast<std::size_t>(n));
  std::vector<double> buf(static_cast<std::size_t>(training_windows.t_x));
  for (Index k = 0; k < n; ++k) {
    for (int j = 0; j < training_windows.t_x; ++j)
      buf[static_cast<std::size_t>(j)] = training_windows.inputs(k, j);
    table.loglik[static_cast<std::size_t>(k)] = forward_loglik(hmm, buf);
    table.last_sample[static_cast<std::size_t>(k)] =
        training_windows.inputs(k, training_windows.t_x - 1);
    table.next_sample[static_cast<std::size_t>(k)] = training_windows.targets(k);
  }
  return table;
}

double hmm_forecast(const GaussianHmm& hmm, const LikelihoodTable& table,
                    std::span<const double> window) {
  if (table.size() == 0) throw EmptyError("hmm_forecast: empty likelihood table");
  const double lk = forward_loglik(hmm, window);
  std::size_t best = 0;
  double best_d = std::abs(table.loglik[0] - lk);
  for (std::size_t j = 1; j < table.size(); ++j) {
    const double d = std::abs(table.loglik[j] - lk);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  const double change = table.next_sample[best] - table.last_sample[best];
  return window.back() + change;
}

double hmm_predict_rmse(const GaussianHmm& hmm, const LikelihoodTable& table,
                        const QuasiStaticRecord& record, const ScalingParams& scaling, int t_x) {
  const std::vector<double> scaled = apply_scale(record.series, scaling);
  const WindowSet ws = make_windows(scaled, t_x, scaling);
  std::vector<double> preds(static_cast<std::size_t>(ws.count()));
  std::vector<double> buf(static_cast<std::size_t>(t_x));
  for (Index k = 0; k < ws.count(); ++k) {
    for (int j = 0; j < t_x; ++j) buf[static_cast<std::size_t>(j)] = ws.inputs(k, j);
    preds[static_cast<std::size_t>(k)] = hmm_forecast(hmm, table, buf);
  }
  return rmse(preds, std::span<const double>(ws.targets.data(),
                                             static_cast<std::size_t>(ws.targets.size())));
}

namespace {

json vec_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json vec_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

VectorXd vec_from(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

std::vector<double> stdvec_from(const json& j) {
  std::vector<double> v(j.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

void save_hmm(const std::filesystem::path& path, const GaussianHmm& hmm,
              const LikelihoodTable& table, const ScalingParams& scaling, int t_x) {
  json trans = json::array();
  for (int i = 0; i < hmm.n_states; ++i) trans.push_back(vec_json(hmm.trans.row(i).transpose()));
  const json j{{"kind", "hmm"},
               {"n_states", hmm.n_states},
               {"start", vec_json(hmm.start)},
               {"trans", trans},
               {"means", vec_json(hmm.means)},
               {"vars", vec_json(hmm.vars)},
               {"t_x", t_x},
               {"scaling", {{"min", scaling.min_val}, {"max", scaling.max_val}}},
               {"table",
                {{"loglik", vec_json(table.loglik)},
                 {"last_sample", vec_json(table.last_sample)},
                 {"next_sample", vec_json(table.next_sample)}}}};
  io::write_text_file(path, j.dump(2) + "\n");
}

LoadedHmm load_hmm(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError("hmm checkpoint " + path.string() + ": " + e.what());
  }
  try {
    LoadedHmm out;
    out.model.n_states = j.at("n_states").get<int>();
    out.model.start = vec_from(j.at("start"));
    out.model.means = vec_from(j.at("means"));
    out.model.vars = vec_from(j.at("vars"));
    const auto& trans = j.at("trans");
    out.model.trans.resize(out.model.n_states, out.model.n_states);
    for (int i = 0; i < out.model.n_states; ++i)
      out.model.trans.row(i) = vec_from(trans.at(static_cast<std::size_t>(i))).transpose();
    out.t_x = j.at("t_x").get<int>();
    out.scaling.min_val = j.at("scaling").at("min").get<double>();
    out.scaling.max_val = j.at("scaling").at("max").get<double>();
    const auto& t = j.at("table");
    out.table.loglik = stdvec_from(t.at("loglik"));
    out.table.last_sample = stdvec_from(t.at("last_sample"));
    out.table.next_sample = stdvec_from(t.at("next_sample"));
    if (out.table.last_sample.size() != out.table.loglik.size() ||
        out.table.next_sample.size() != out.table.loglik.size())
      throw ParseError("hmm checkpoint " + path.string() + ": ragged table");
    out.model.validate();
    return out;
  } catch (const json::exception& e) {
    throw ParseError("hmm checkpoint " + path.string() + ": " + e.what());
  }
}

void write_bic_csv(const std::filesystem::path& path, const std::vector<BicRow>& table) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.size());
  for (const auto& r : table) {
    if (!r.ok) continue;
    rows.push_back({std::to_string(r.n_states), io::format_double(r.loglik),
                    io::format_double(r.bic)});
  }
  io::write_csv(path, "n_states,loglik,bic", rows);
}

}  // namespace lbo::hmm
