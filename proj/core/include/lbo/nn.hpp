#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "lbo/series.hpp"

namespace lbo::nn {

enum class ModelKind { Lstm, Rnn };

/// Plain recurrent layer: h_new = tanh(W^T [h_prev; x] + b).
/// W has one row per entry of [h_prev; x] and one column per hidden unit.
struct RnnLayerParams {
  Eigen::MatrixXd W;  // (h_prev + in) x h
  Eigen::VectorXd b;  // h

  Eigen::Index hidden() const { return b.size(); }
};

/// LSTM layer with input/forget/output gates and cell candidate, each
/// mapping [h_prev; x] to the hidden size.
struct LstmLayerParams {
  Eigen::MatrixXd Wi, Wf, Wo, Wg;  // (h_prev + in) x h each
  Eigen::VectorXd bi, bf, bo, bg;  // h each

  Eigen::Index hidden() const { return bi.size(); }
};

using LayerParams = std::variant<RnnLayerParams, LstmLayerParams>;

/// ReLU dense layer followed by a scalar linear output.
struct DenseHeadParams {
  Eigen::MatrixXd Wd;  // n x p
  Eigen::VectorXd bd;  // p
  Eigen::VectorXd Wy;  // p
  double by = 0.0;
};

/// Two stacked recurrent layers (hidden sizes m then n) with a dense head.
/// Layer 1 consumes the scalar window samples; layer 2 consumes layer 1's
/// hidden sequence; the head maps the final hidden state to the next-step
/// prediction.
struct SequenceModel {
  ModelKind kind = ModelKind::Lstm;
  int t_x = 0;
  int m = 0, n = 0, p = 0;
  LayerParams layer1, layer2;
  DenseHeadParams head;
};

/// Gradients (and Adam moments) share the parameter layout.
struct ModelGrads {
  LayerParams layer1, layer2;
  DenseHeadParams head;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 50;
  int batch_size = 512;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int hidden_m = 32;
  int hidden_n = 32;
  int head_p = 16;
  double clip_norm = 0.0;     // 0 disables gradient clipping
  bool best_val = false;      // keep the best-validation-loss checkpoint

  void validate() const;
};

/// Single RNN cell step; entries of the result lie in (-1, 1).
Eigen::VectorXd rnn_cell_forward(const RnnLayerParams& params, const Eigen::VectorXd& h_prev,
                                 const Eigen::VectorXd& x_in);

/// Single LSTM cell step; returns (h_new, c_new).
std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_cell_forward(const LstmLayerParams& params,
                                                              const Eigen::VectorXd& h_prev,
                                                              const Eigen::VectorXd& c_prev,
                                                              const Eigen::VectorXd& x_in);

/// Cached activations from a batched forward pass, sufficient for exact
/// backpropagation through time.
struct ForwardTape {
  struct RnnLayerTape {
    std::vector<Eigen::MatrixXd> concat;  // per step: B x (h + in)
    std::vector<Eigen::MatrixXd> h;       // per step: B x h
  };
  struct LstmLayerTape {
    std::vector<Eigen::MatrixXd> concat;        // B x (h + in)
    std::vector<Eigen::MatrixXd> i, f, o, g;    // gate activations, B x h
    std::vector<Eigen::MatrixXd> c, tanh_c, h;  // B x h
  };
  std::variant<RnnLayerTape, LstmLayerTape> layer1, layer2;
  Eigen::MatrixXd head_in;    // B x n, final hidden states
  Eigen::MatrixXd d_pre;      // B x p, dense pre-activation
  Eigen::MatrixXd d_act;      // B x p, ReLU output
  Eigen::VectorXd yhat;       // B
};

/// Batched forward pass over windows (one row per window). When tape is
/// non-null it is filled for backward(). Initial hidden/cell states are zero.
Eigen::VectorXd forward_batch(const SequenceModel& model, const Eigen::MatrixXd& windows,
                              ForwardTape* tape = nullptr);

/// Spec-level single-window forward.
double forward(const SequenceModel& model, const Eigen::VectorXd& window,
               ForwardTape* tape = nullptr);

/// Mean squared error of a prediction batch.
double mse_loss(const Eigen::VectorXd& yhat, const Eigen::VectorXd& targets);

/// Exact gradient of mse_loss(yhat, targets) w.r.t. every model parameter.
ModelGrads backward(const SequenceModel& model, const ForwardTape& tape,
                    const Eigen::VectorXd& targets);

struct AdamState {
  ModelGrads m, v;
  long step = 0;  // number of applied updates

  static AdamState zeros_like(const SequenceModel& model);
};

/// One Adam update; step_index is 1-based and must equal state.step + 1.
void adam_step(SequenceModel& model, const ModelGrads& grads, AdamState& state,
               const TrainConfig& config, long step_index);

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  SequenceModel model;
  std::vector<EpochStats> history;
};

/// Seeded-deterministic minibatch training with Adam. Weights start
/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero; the shuffle is
/// re-seeded every epoch from config.seed. Throws TrainingFailedError if the
/// loss goes non-finite.
TrainResult train(ModelKind kind, const WindowSet& train_windows, const WindowSet& val_windows,
                  const TrainConfig& config);

/// Seeded initial model (exposed for tests and tooling).
SequenceModel init_model(ModelKind kind, int t_x, int m, int n, int p, std::uint64_t seed);

/// Scale the record with the training scaling, window it, predict every
/// window and return the RMSE against the next-step targets.
double predict_rmse(const SequenceModel& model, const QuasiStaticRecord& record,
                    const ScalingParams& scaling, int t_x);

/// Model checkpoint JSON (kind, dimensions, scaling, parameter arrays);
/// round-trips bit-exactly at double precision.
void save_model(const std::filesystem::path& path, const SequenceModel& model,
                const ScalingParams& scaling);
struct LoadedModel {
  SequenceModel model;
  ScalingParams scaling;
};
LoadedModel load_model(const std::filesystem::path& path);

/// History CSV: "epoch,train_loss,val_loss".
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

}  // namespace lbo::nn
