#include "lbo/nn.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "lbo/io.hpp"
#include "lbo/rng.hpp"

namespace lbo::nn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

MatrixXd sigmoid(const MatrixXd& pre) {
  return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
}

void check(bool ok, const char* msg) {
  if (!ok) throw ShapeMismatchError(msg);
}

Index layer_hidden(const LayerParams& p) {
  return std::visit([](const auto& l) { return l.hidden(); }, p);
}

Index layer_fan_in(const LayerParams& p) {
  return std::visit(
      [](const auto& l) {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, RnnLayerParams>)
          return l.W.rows();
        else
          return l.Wi.rows();
      },
      p);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigInvalidError("TrainConfig: learning_rate must be > 0");
  if (epochs < 1) throw ConfigInvalidError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ConfigInvalidError("TrainConfig: batch_size must be >= 1");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    throw ConfigInvalidError("TrainConfig: betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigInvalidError("TrainConfig: epsilon must be > 0");
  if (hidden_m < 1 || hidden_n < 1 || head_p < 1)
    throw ConfigInvalidError("TrainConfig: hidden sizes must be >= 1");
  if (clip_norm < 0.0) throw ConfigInvalidError("TrainConfig: clip_norm must be >= 0");
}

Eigen::VectorXd rnn_cell_forward(const RnnLayerParams& params, const VectorXd& h_prev,
                                 const VectorXd& x_in) {
  const Index h = params.hidden();
  check(params.W.cols() == h, "rnn_cell_forward: W column count != hidden size");
  check(params.W.rows() == h_prev.size() + x_in.size(),
        "rnn_cell_forward: W row count != h_prev + input size");
  check(h_prev.size() == h, "rnn_cell_forward: h_prev size mismatch");
  VectorXd concat(params.W.rows());
  concat << h_prev, x_in;
  return (params.W.transpose() * concat + params.b).array().tanh();
}

std::pair<VectorXd, VectorXd> lstm_cell_forward(const LstmLayerParams& params,
                                                const VectorXd& h_prev, const VectorXd& c_prev,
                                                const VectorXd& x_in) {
  const Index h = params.hidden();
  check(params.Wi.cols() == h && params.Wf.cols() == h && params.Wo.cols() == h &&
            params.Wg.cols() == h,
        "lstm_cell_forward: gate column mismatch");
  check(params.Wi.rows() == h_prev.size() + x_in.size(),
        "lstm_cell_forward: gate row count != h_prev + input size");
  check(h_prev.size() == h && c_prev.size() == h, "lstm_cell_forward: state size mismatch");
  VectorXd concat(params.Wi.rows());
  concat << h_prev, x_in;
  const auto sig = [](const VectorXd& v) -> VectorXd {
    return (1.0 / (1.0 + (-v.array()).exp())).matrix();
  };
  const VectorXd i = sig(params.Wi.transpose() * concat + params.bi);
  const VectorXd f = sig(params.Wf.transpose() * concat + params.bf);
  const VectorXd o = sig(params.Wo.transpose() * concat + params.bo);
  const VectorXd g = (params.Wg.transpose() * concat + params.bg).array().tanh();
  const VectorXd c_new = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  const VectorXd h_new = o.cwiseProduct(c_new.array().tanh().matrix());
  return {h_new, c_new};
}

namespace {

// One batched step of either layer kind. H (and C for LSTM) are B x h state
// matrices updated in place; x_in is the B x in input block for this step.
void step_rnn(const RnnLayerParams& P, const Eigen::Ref<const MatrixXd>& x_in, MatrixXd& H,
              ForwardTape::RnnLayerTape* tape, int t) {
  const Index B = H.rows(), h = P.hidden(), in = P.W.rows() - h;
  check(x_in.cols() == in, "forward: layer input width mismatch");
  MatrixXd concat(B, h + in);
  concat.leftCols(h) = H;
  concat.rightCols(in) = x_in;
  MatrixXd pre = concat * P.W;
  pre.rowwise() += P.b.transpose();
  H = pre.array().tanh();
  if (tape) {
    tape->concat[static_cast<std::size_t>(t)] = std::move(concat);
    tape->h[static_cast<std::size_t>(t)] = H;
  }
}

void step_lstm(const LstmLayerParams& P, const Eigen::Ref<const MatrixXd>& x_in, MatrixXd& H,
               MatrixXd& C, ForwardTape::LstmLayerTape* tape, int t) {
  const Index B = H.rows(), h = P.hidden(), in = P.Wi.rows() - h;
  check(x_in.cols() == in, "forward: layer input width mismatch");
  MatrixXd concat(B, h + in);
  concat.leftCols(h) = H;
  concat.rightCols(in) = x_in;
  MatrixXd pre_i = concat * P.Wi;
  pre_i.rowwise() += P.bi.transpose();
  MatrixXd pre_f = concat * P.Wf;
  pre_f.rowwise() += P.bf.transpose();
  MatrixXd pre_o = concat * P.Wo;
  pre_o.rowwise() += P.bo.transpose();
  MatrixXd pre_g = concat * P.Wg;
  pre_g.rowwise() += P.bg.transpose();
  MatrixXd i = sigmoid(pre_i);
  MatrixXd f = sigmoid(pre_f);
  MatrixXd o = sigmoid(pre_o);
  MatrixXd g = pre_g.array().tanh();
  C = f.cwiseProduct(C) + i.cwiseProduct(g);
  MatrixXd tanh_c = C.array().tanh();
  H = o.cwiseProduct(tanh_c);
  if (tape) {
    const auto ti = static_cast<std::size_t>(t);
    tape->concat[ti] = std::move(concat);
    tape->i[ti] = std::move(i);
    tape->f[ti] = std::move(f);
    tape->o[ti] = std::move(o);
    tape->g[ti] = std::move(g);
    tape->c[ti] = C;
    tape->tanh_c[ti] = std::move(tanh_c);
    tape->h[ti] = H;
  }
}

void resize_tape(ForwardTape::RnnLayerTape& t, int T) {
  t.concat.resize(static_cast<std::size_t>(T));
  t.h.resize(static_cast<std::size_t>(T));
}

void resize_tape(ForwardTape::LstmLayerTape& t, int T) {
  const auto n = static_cast<std::size_t>(T);
  t.concat.resize(n);
  t.i.resize(n);
  t.f.resize(n);
  t.o.resize(n);
  t.g.resize(n);
  t.c.resize(n);
  t.tanh_c.resize(n);
  t.h.resize(n);
}

}  // namespace

Eigen::VectorXd forward_batch(const SequenceModel& model, const MatrixXd& windows,
                              ForwardTape* tape) {
  const Index B = windows.rows();
  const int T = model.t_x;
  check(windows.cols() == T, "forward: window length != t_x");
  check(B > 0, "forward: empty batch");
  check(layer_fan_in(model.layer1) == model.m + 1, "forward: layer1 fan-in != m + 1");
  check(layer_fan_in(model.layer2) == model.n + model.m, "forward: layer2 fan-in != n + m");

  MatrixXd H1 = MatrixXd::Zero(B, model.m), C1 = MatrixXd::Zero(B, model.m);
  MatrixXd H2 = MatrixXd::Zero(B, model.n), C2 = MatrixXd::Zero(B, model.n);

  ForwardTape::RnnLayerTape *rt1 = nullptr, *rt2 = nullptr;
  ForwardTape::LstmLayerTape *lt1 = nullptr, *lt2 = nullptr;
  if (tape) {
    if (model.kind == ModelKind::Rnn) {
      tape->layer1 = ForwardTape::RnnLayerTape{};
      tape->layer2 = ForwardTape::RnnLayerTape{};
      rt1 = &std::get<ForwardTape::RnnLayerTape>(tape->layer1);
      rt2 = &std::get<ForwardTape::RnnLayerTape>(tape->layer2);
      resize_tape(*rt1, T);
      resize_tape(*rt2, T);
    } else {
      tape->layer1 = ForwardTape::LstmLayerTape{};
      tape->layer2 = ForwardTape::LstmLayerTape{};
      lt1 = &std::get<ForwardTape::LstmLayerTape>(tape->layer1);
      lt2 = &std::get<ForwardTape::LstmLayerTape>(tape->layer2);
      resize_tape(*lt1, T);
      resize_tape(*lt2, T);
    }
  }

  for (int t = 0; t < T; ++t) {
    if (model.kind == ModelKind::Rnn) {
      step_rnn(std::get<RnnLayerParams>(model.layer1), windows.col(t), H1, rt1, t);
      step_rnn(std::get<RnnLayerParams>(model.layer2), H1, H2, rt2, t);
    } else {
      step_lstm(std::get<LstmLayerParams>(model.layer1), windows.col(t), H1, C1, lt1, t);
      step_lstm(std::get<LstmLayerParams>(model.layer2), H1, H2, C2, lt2, t);
    }
  }

  const auto& head = model.head;
  check(head.Wd.rows() == model.n && head.Wd.cols() == model.p, "forward: head Wd shape");
  MatrixXd d_pre = H2 * head.Wd;
  d_pre.rowwise() += head.bd.transpose();
  MatrixXd d_act = d_pre.cwiseMax(0.0);
  VectorXd yhat = d_act * head.Wy;
  yhat.array() += head.by;

  if (tape) {
    tape->head_in = std::move(H2);
    tape->d_pre = std::move(d_pre);
    tape->d_act = std::move(d_act);
    tape->yhat = yhat;
  }
  return yhat;
}

double forward(const SequenceModel& model, const VectorXd& window, ForwardTape* tape) {
  return forward_batch(model, window.transpose(), tape)(0);
}

double mse_loss(const VectorXd& yhat, const VectorXd& targets) {
  if (yhat.size() != targets.size())
    throw LengthMismatchError("mse_loss: length mismatch");
  if (yhat.size() == 0) throw EmptyError("mse_loss: empty batch");
  return (yhat - targets).squaredNorm() / static_cast<double>(yhat.size());
}

namespace {

ModelGrads zero_grads(const SequenceModel& model) {
  const auto zero_layer = [](const LayerParams& p) -> LayerParams {
    if (const auto* r = std::get_if<RnnLayerParams>(&p)) {
      return RnnLayerParams{MatrixXd::Zero(r->W.rows(), r->W.cols()),
                            VectorXd::Zero(r->b.size())};
    }
    const auto& l = std::get<LstmLayerParams>(p);
    LstmLayerParams z;
    z.Wi = MatrixXd::Zero(l.Wi.rows(), l.Wi.cols());
    z.Wf = z.Wi;
    z.Wo = z.Wi;
    z.Wg = z.Wi;
    z.bi = VectorXd::Zero(l.bi.size());
    z.bf = z.bi;
    z.bo = z.bi;
    z.bg = z.bi;
    return z;
  };
  ModelGrads g;
  g.layer1 = zero_layer(model.layer1);
  g.layer2 = zero_layer(model.layer2);
  g.head.Wd = MatrixXd::Zero(model.head.Wd.rows(), model.head.Wd.cols());
  g.head.bd = VectorXd::Zero(model.head.bd.size());
  g.head.Wy = VectorXd::Zero(model.head.Wy.size());
  g.head.by = 0.0;
  return g;
}

// Backward through one layer, t descending. dH_inject(t) supplies the
// gradient arriving at h_t from above (the head or the next layer);
// dX_out(t) receives the gradient w.r.t. the layer's step-t input.
void backward_rnn_layer(const RnnLayerParams& P, const ForwardTape::RnnLayerTape& tape,
                        RnnLayerParams& grads, int T, Index B,
                        const std::function<MatrixXd(int)>& dH_inject,
                        const std::function<void(int, const MatrixXd&)>& dX_out) {
  const Index h = P.hidden(), in = P.W.rows() - h;
  MatrixXd dH_rec = MatrixXd::Zero(B, h);
  for (int t = T - 1; t >= 0; --t) {
    const auto ti = static_cast<std::size_t>(t);
    MatrixXd dH = dH_inject(t) + dH_rec;
    const MatrixXd& Ht = tape.h[ti];
    MatrixXd dpre = dH.array() * (1.0 - Ht.array().square());
    grads.W.noalias() += tape.concat[ti].transpose() * dpre;
    grads.b += dpre.colwise().sum().transpose();
    MatrixXd dconcat = dpre * P.W.transpose();
    dH_rec = dconcat.leftCols(h);
    dX_out(t, dconcat.rightCols(in));
  }
}

void backward_lstm_layer(const LstmLayerParams& P, const ForwardTape::LstmLayerTape& tape,
                         LstmLayerParams& grads, int T, Index B,
                         const std::function<MatrixXd(int)>& dH_inject,
                         const std::function<void(int, const MatrixXd&)>& dX_out) {
  const Index h = P.hidden(), in = P.Wi.rows() - h;
  MatrixXd dH_rec = MatrixXd::Zero(B, h);
  MatrixXd dC_rec = MatrixXd::Zero(B, h);
  for (int t = T - 1; t >= 0; --t) {
    const auto ti = static_cast<std::size_t>(t);
    const MatrixXd dH = dH_inject(t) + dH_rec;
    const MatrixXd& i = tape.i[ti];
    const MatrixXd& f = tape.f[ti];
    const MatrixXd& o = tape.o[ti];
    const MatrixXd& g = tape.g[ti];
    const MatrixXd& tanh_c = tape.tanh_c[ti];

    MatrixXd do_ = dH.cwiseProduct(tanh_c);
    MatrixXd dc = dC_rec + (dH.cwiseProduct(o).array() * (1.0 - tanh_c.array().square())).matrix();
    MatrixXd di = dc.cwiseProduct(g);
    MatrixXd dg = dc.cwiseProduct(i);
    MatrixXd df;
    if (t > 0)
      df = dc.cwiseProduct(tape.c[ti - 1]);
    else
      df = MatrixXd::Zero(B, h);  // c_prev is the zero initial state
    dC_rec = dc.cwiseProduct(f);

    MatrixXd dpre_i = di.array() * i.array() * (1.0 - i.array());
    MatrixXd dpre_f = df.array() * f.array() * (1.0 - f.array());
    MatrixXd dpre_o = do_.array() * o.array() * (1.0 - o.array());
    MatrixXd dpre_g = dg.array() * (1.0 - g.array().square());

    const MatrixXd& concat = tape.concat[ti];
    grads.Wi.noalias() += concat.transpose() * dpre_i;
    grads.Wf.noalias() += concat.transpose() * dpre_f;
    grads.Wo.noalias() += concat.transpose() * dpre_o;
    grads.Wg.noalias() += concat.transpose() * dpre_g;
    grads.bi += dpre_i.colwise().sum().transpose();
    grads.bf += dpre_f.colwise().sum().transpose();
    grads.bo += dpre_o.colwise().sum().transpose();
    grads.bg += dpre_g.colwise().sum().transpose();

    MatrixXd dconcat = dpre_i * P.Wi.transpose();
    dconcat.noalias() += dpre_f * P.Wf.transpose();
    dconcat.noalias() += dpre_o * P.Wo.transpose();
    dconcat.noalias() += dpre_g * P.Wg.transpose();
    dH_rec = dconcat.leftCols(h);
    dX_out(t, dconcat.rightCols(in));
  }
}

}  // namespace

ModelGrads backward(const SequenceModel& model, const ForwardTape& tape,
                    const VectorXd& targets) {
  const Index B = tape.yhat.size();
  if (targets.size() != B) throw LengthMismatchError("backward: target batch size mismatch");
  ModelGrads grads = zero_grads(model);
  const int T = model.t_x;

  // Head: L = mean((yhat - y)^2).
  VectorXd dyhat = 2.0 / static_cast<double>(B) * (tape.yhat - targets);
  grads.head.Wy = tape.d_act.transpose() * dyhat;
  grads.head.by = dyhat.sum();
  MatrixXd dd_act = dyhat * model.head.Wy.transpose();
  MatrixXd dd_pre =
      (dd_act.array() * (tape.d_pre.array() > 0.0).cast<double>()).matrix();
  grads.head.Wd = tape.head_in.transpose() * dd_pre;
  grads.head.bd = dd_pre.colwise().sum().transpose();
  MatrixXd dh_last = dd_pre * model.head.Wd.transpose();

  // Layer 2: the head's gradient arrives only at the final step. Each step's
  // input gradient feeds layer 1's hidden state at the same step.
  std::vector<MatrixXd> dA(static_cast<std::size_t>(T));
  const auto inject2 = [&](int t) -> MatrixXd {
    if (t == T - 1) return dh_last;
    return MatrixXd::Zero(B, model.n);
  };
  const auto collect_dA = [&](int t, const MatrixXd& dx) { dA[static_cast<std::size_t>(t)] = dx; };
  const auto inject1 = [&](int t) -> MatrixXd { return dA[static_cast<std::size_t>(t)]; };
  const auto drop_dX = [](int, const MatrixXd&) {};

  if (model.kind == ModelKind::Rnn) {
    backward_rnn_layer(std::get<RnnLayerParams>(model.layer2),
                       std::get<ForwardTape::RnnLayerTape>(tape.layer2),
                       std::get<RnnLayerParams>(grads.layer2), T, B, inject2, collect_dA);
    backward_rnn_layer(std::get<RnnLayerParams>(model.layer1),
                       std::get<ForwardTape::RnnLayerTape>(tape.layer1),
                       std::get<RnnLayerParams>(grads.layer1), T, B, inject1, drop_dX);
  } else {
    backward_lstm_layer(std::get<LstmLayerParams>(model.layer2),
                        std::get<ForwardTape::LstmLayerTape>(tape.layer2),
                        std::get<LstmLayerParams>(grads.layer2), T, B, inject2, collect_dA);
    backward_lstm_layer(std::get<LstmLayerParams>(model.layer1),
                        std::get<ForwardTape::LstmLayerTape>(tape.layer1),
                        std::get<LstmLayerParams>(grads.layer1), T, B, inject1, drop_dX);
  }
  return grads;
}

namespace {

// Applies fn(param*, grad*, m*, v*, len) to every parameter tensor; the
// visit order is part of the determinism contract.
template <typename Fn>
void for_each_tensor(SequenceModel& model, const ModelGrads& grads, AdamState& state, Fn&& fn) {
  const auto visit_layer = [&](LayerParams& p, const LayerParams& g, LayerParams& m,
                               LayerParams& v) {
    if (auto* rp = std::get_if<RnnLayerParams>(&p)) {
      const auto& rg = std::get<RnnLayerParams>(g);
      auto& rm = std::get<RnnLayerParams>(m);
      auto& rv = std::get<RnnLayerParams>(v);
      fn(rp->W.data(), rg.W.data(), rm.W.data(), rv.W.data(), rp->W.size());
      fn(rp->b.data(), rg.b.data(), rm.b.data(), rv.b.data(), rp->b.size());
      return;
    }
    auto& lp = std::get<LstmLayerParams>(p);
    const auto& lg = std::get<LstmLayerParams>(g);
    auto& lm = std::get<LstmLayerParams>(m);
    auto& lv = std::get<LstmLayerParams>(v);
    fn(lp.Wi.data(), lg.Wi.data(), lm.Wi.data(), lv.Wi.data(), lp.Wi.size());
    fn(lp.Wf.data(), lg.Wf.data(), lm.Wf.data(), lv.Wf.data(), lp.Wf.size());
    fn(lp.Wo.data(), lg.Wo.data(), lm.Wo.data(), lv.Wo.data(), lp.Wo.size());
    fn(lp.Wg.data(), lg.Wg.data(), lm.Wg.data(), lv.Wg.data(), lp.Wg.size());
    fn(lp.bi.data(), lg.bi.data(), lm.bi.data(), lv.bi.data(), lp.bi.size());
    fn(lp.bf.data(), lg.bf.data(), lm.bf.data(), lv.bf.data(), lp.bf.size());
    fn(lp.bo.data(), lg.bo.data(), lm.bo.data(), lv.bo.data(), lp.bo.size());
    fn(lp.bg.data(), lg.bg.data(), lm.bg.data(), lv.bg.data(), lp.bg.size());
  };
  visit_layer(model.layer1, grads.layer1, state.m.layer1, state.v.layer1);
  visit_layer(model.layer2, grads.layer2, state.m.layer2, state.v.layer2);
  fn(model.head.Wd.data(), grads.head.Wd.data(), state.m.head.Wd.data(), state.v.head.Wd.data(),
     model.head.Wd.size());
  fn(model.head.bd.data(), grads.head.bd.data(), state.m.head.bd.data(), state.v.head.bd.data(),
     model.head.bd.size());
  fn(model.head.Wy.data(), grads.head.Wy.data(), state.m.head.Wy.data(), state.v.head.Wy.data(),
     model.head.Wy.size());
  fn(&model.head.by, &grads.head.by, &state.m.head.by, &state.v.head.by, Index{1});
}

template <typename Fn>
void for_each_grad(ModelGrads& grads, Fn&& fn) {
  const auto visit_layer = [&](LayerParams& g) {
    if (auto* rg = std::get_if<RnnLayerParams>(&g)) {
      fn(rg->W.data(), rg->W.size());
      fn(rg->b.data(), rg->b.size());
      return;
    }
    auto& lg = std::get<LstmLayerParams>(g);
    fn(lg.Wi.data(), lg.Wi.size());
    fn(lg.Wf.data(), lg.Wf.size());
    fn(lg.Wo.data(), lg.Wo.size());
    fn(lg.Wg.data(), lg.Wg.size());
    fn(lg.bi.data(), lg.bi.size());
    fn(lg.bf.data(), lg.bf.size());
    fn(lg.bo.data(), lg.bo.size());
    fn(lg.bg.data(), lg.bg.size());
  };
  visit_layer(grads.layer1);
  visit_layer(grads.layer2);
  fn(grads.head.Wd.data(), grads.head.Wd.size());
  fn(grads.head.bd.data(), grads.head.bd.size());
  fn(grads.head.Wy.data(), grads.head.Wy.size());
  fn(&grads.head.by, Index{1});
}

}  // namespace

AdamState AdamState::zeros_like(const SequenceModel& model) {
  AdamState s;
  s.m = zero_grads(model);
  s.v = zero_grads(model);
  s.step = 0;
  return s;
}

void adam_step(SequenceModel& model, const ModelGrads& grads, AdamState& state,
               const TrainConfig& config, long step_index) {
  if (step_index < 1 || step_index != state.step + 1)
    throw ConfigInvalidError("adam_step: step_index must be state.step + 1 and >= 1");
  const double b1 = config.beta1, b2 = config.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_index));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_index));
  const double lr = config.learning_rate, eps = config.epsilon;
  for_each_tensor(model, grads, state,
                  [&](double* p, const double* g, double* m, double* v, Index len) {
                    for (Index k = 0; k < len; ++k) {
                      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                      const double mhat = m[k] / corr1;
                      const double vhat = v[k] / corr2;
                      p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
                    }
                  });
  state.step = step_index;
}

namespace {

MatrixXd init_weight(Index rows, Index cols, rng::Engine& eng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  MatrixXd W(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) W(i, j) = rng::uniform(eng, -bound, bound);
  return W;
}

LayerParams init_layer(ModelKind kind, Index in, Index h, rng::Engine& eng) {
  if (kind == ModelKind::Rnn) {
    return RnnLayerParams{init_weight(h + in, h, eng), VectorXd::Zero(h)};
  }
  LstmLayerParams p;
  p.Wi = init_weight(h + in, h, eng);
  p.Wf = init_weight(h + in, h, eng);
  p.Wo = init_weight(h + in, h, eng);
  p.Wg = init_weight(h + in, h, eng);
  p.bi = VectorXd::Zero(h);
  p.bf = VectorXd::Zero(h);
  p.bo = VectorXd::Zero(h);
  p.bg = VectorXd::Zero(h);
  return p;
}

}  // namespace

SequenceModel init_model(ModelKind kind, int t_x, int m, int n, int p, std::uint64_t seed) {
  if (t_x < 1 || m < 1 || n < 1 || p < 1)
    throw ConfigInvalidError("init_model: all dimensions must be >= 1");
  rng::Engine eng(seed);
  SequenceModel model;
  model.kind = kind;
  model.t_x = t_x;
  model.m = m;
  model.n = n;
  model.p = p;
  model.layer1 = init_layer(kind, 1, m, eng);
  model.layer2 = init_layer(kind, m, n, eng);
  model.head.Wd = init_weight(n, p, eng);
  model.head.bd = VectorXd::Zero(p);
  model.head.Wy = init_weight(p, 1, eng);
  model.head.by = 0.0;
  return model;
}

namespace {

VectorXd predict_chunked(const SequenceModel& model, const MatrixXd& windows) {
  constexpr Index kChunk = 4096;
  const Index N = windows.rows();
  VectorXd out(N);
  for (Index start = 0; start < N; start += kChunk) {
    const Index len = std::min(kChunk, N - start);
    out.segment(start, len) = forward_batch(model, windows.middleRows(start, len));
  }
  return out;
}

}  // namespace

TrainResult train(ModelKind kind, const WindowSet& train_windows, const WindowSet& val_windows,
                  const TrainConfig& config) {
  config.validate();
  const Index N = train_windows.count();
  if (N == 0 || val_windows.count() == 0)
    throw ConfigInvalidError("train: empty train or validation split");

  SequenceModel model = init_model(kind, train_windows.t_x, config.hidden_m, config.hidden_n,
                                   config.head_p, config.seed);
  AdamState state = AdamState::zeros_like(model);

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(config.epochs));
  double best_val = std::numeric_limits<double>::infinity();
  SequenceModel best_model = model;

  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng::Engine eng(rng::seed_mix(config.seed, static_cast<std::uint64_t>(epoch) + 1));
    rng::shuffle(order, eng);

    double sq_sum = 0.0;
    for (Index start = 0; start < N; start += config.batch_size) {
      const Index len = std::min<Index>(config.batch_size, N - start);
      MatrixXd Xb(len, train_windows.t_x);
      VectorXd yb(len);
      for (Index r = 0; r < len; ++r) {
        const Index src = order[static_cast<std::size_t>(start + r)];
        Xb.row(r) = train_windows.inputs.row(src);
        yb(r) = train_windows.targets(src);
      }
      ForwardTape tape;
      const VectorXd yhat = forward_batch(model, Xb, &tape);
      sq_sum += (yhat - yb).squaredNorm();
      ModelGrads grads = backward(model, tape, yb);
      if (config.clip_norm > 0.0) {
        double norm_sq = 0.0;
        for_each_grad(grads, [&](double* g, Index len_g) {
          for (Index k = 0; k < len_g; ++k) norm_sq += g[k] * g[k];
        });
        const double norm = std::sqrt(norm_sq);
        if (norm > config.clip_norm) {
          const double scale = config.clip_norm / norm;
          for_each_grad(grads, [&](double* g, Index len_g) {
            for (Index k = 0; k < len_g; ++k) g[k] *= scale;
          });
        }
      }
      adam_step(model, grads, state, config, state.step + 1);
    }

    EpochStats stats;
    stats.train_loss = sq_sum / static_cast<double>(N);
    stats.val_loss = mse_loss(predict_chunked(model, val_windows.inputs), val_windows.targets);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
      throw TrainingFailedError("train: loss became non-finite at epoch " +
                                std::to_string(epoch + 1));
    result.history.push_back(stats);
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      if (config.best_val) best_model = model;
    }
  }

  result.model = config.best_val ? std::move(best_model) : std::move(model);
  return result;
}

double predict_rmse(const SequenceModel& model, const QuasiStaticRecord& record,
                    const ScalingParams& scaling, int t_x) {
  const std::vector<double> scaled = apply_scale(record.series, scaling);
  const WindowSet ws = make_windows(scaled, t_x, scaling);
  const VectorXd preds = predict_chunked(model, ws.inputs);
  return rmse(preds, ws.targets);
}

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  if (rows == 0) throw ParseError("checkpoint: empty matrix");
  const auto cols = static_cast<Index>(j.at(0).size());
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != cols) throw ParseError("checkpoint: ragged matrix");
    for (Index jj = 0; jj < cols; ++jj) m(i, jj) = row.at(static_cast<std::size_t>(jj)).get<double>();
  }
  return m;
}

VectorXd vector_from_json(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json layer_to_json(const LayerParams& p) {
  if (const auto* r = std::get_if<RnnLayerParams>(&p))
    return json{{"W", matrix_to_json(r->W)}, {"b", vector_to_json(r->b)}};
  const auto& l = std::get<LstmLayerParams>(p);
  return json{{"Wi", matrix_to_json(l.Wi)}, {"Wf", matrix_to_json(l.Wf)},
              {"Wo", matrix_to_json(l.Wo)}, {"Wg", matrix_to_json(l.Wg)},
              {"bi", vector_to_json(l.bi)}, {"bf", vector_to_json(l.bf)},
              {"bo", vector_to_json(l.bo)}, {"bg", vector_to_json(l.bg)}};
}

LayerParams layer_from_json(ModelKind kind, const json& j) {
  if (kind == ModelKind::Rnn)
    return RnnLayerParams{matrix_from_json(j.at("W")), vector_from_json(j.at("b"))};
  LstmLayerParams l;
  l.Wi = matrix_from_json(j.at("Wi"));
  l.Wf = matrix_from_json(j.at("Wf"));
  l.Wo = matrix_from_json(j.at("Wo"));
  l.Wg = matrix_from_json(j.at("Wg"));
  l.bi = vector_from_json(j.at("bi"));
  l.bf = vector_from_json(j.at("bf"));
  l.bo = vector_from_json(j.at("bo"));
  l.bg = vector_from_json(j.at("bg"));
  return l;
}

}  // namespace

void save_model(const std::filesystem::path& path, const SequenceModel& model,
                const ScalingParams& scaling) {
  const json j{{"kind", model.kind == ModelKind::Lstm ? "lstm" : "rnn"},
               {"t_x", model.t_x},
               {"m", model.m},
               {"n", model.n},
               {"p", model.p},
               {"scaling", {{"min", scaling.min_val}, {"max", scaling.max_val}}},
               {"layer1", layer_to_json(model.layer1)},
               {"layer2", layer_to_json(model.layer2)},
               {"head",
                {{"Wd", matrix_to_json(model.head.Wd)},
                 {"bd", vector_to_json(model.head.bd)},
                 {"Wy", vector_to_json(model.head.Wy)},
                 {"by", model.head.by}}}};
  io::write_text_file(path, j.dump(2) + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    LoadedModel out;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "lstm")
      out.model.kind = ModelKind::Lstm;
    else if (kind == "rnn")
      out.model.kind = ModelKind::Rnn;
    else
      throw ParseError("checkpoint " + path.string() + ": unknown kind '" + kind + "'");
    out.model.t_x = j.at("t_x").get<int>();
    out.model.m = j.at("m").get<int>();
    out.model.n = j.at("n").get<int>();
    out.model.p = j.at("p").get<int>();
    out.scaling.min_val = j.at("scaling").at("min").get<double>();
    out.scaling.max_val = j.at("scaling").at("max").get<double>();
    out.model.layer1 = layer_from_json(out.model.kind, j.at("layer1"));
    out.model.layer2 = layer_from_json(out.model.kind, j.at("layer2"));
    const auto& h = j.at("head");
    out.model.head.Wd = matrix_from_json(h.at("Wd"));
    out.model.head.bd = vector_from_json(h.at("bd"));
    out.model.head.Wy = vector_from_json(h.at("Wy"));
    out.model.head.by = h.at("by").get<double>();
    if (layer_fan_in(out.model.layer1) != out.model.m + 1 ||
        layer_hidden(out.model.layer1) != out.model.m ||
        layer_fan_in(out.model.layer2) != out.model.n + out.model.m ||
        layer_hidden(out.model.layer2) != out.model.n ||
        out.model.head.Wd.rows() != out.model.n || out.model.head.Wd.cols() != out.model.p ||
        out.model.head.Wy.size() != out.model.p)
      throw ParseError("checkpoint " + path.string() + ": inconsistent dimensions");
    return out;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(history.size());
  for (std::size_t e = 0; e < history.size(); ++e)
    rows.push_back({std::to_string(e + 1), io::format_double(history[e].train_loss),
                    io::format_double(history[e].val_loss)});
  io::write_csv(path, "epoch,train_loss,val_loss", rows);
}

}  // namespace lbo::nn
