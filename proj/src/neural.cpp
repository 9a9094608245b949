#include "mmg/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace mmg {

std::array<double, kEdgeFeatures> edge_features(
    const StressInvariants& inv, const PlasticInternalVariables& piv) {
  return {inv.p,       inv.q,       inv.theta,     piv.eps_p_bar,
          piv.eps_p_v, piv.eps_p_s, piv.void_ratio};
}

void FeatureWindow::reset(const std::array<double, kEdgeFeatures>& f0) {
  buf_.assign((std::size_t)window_ * kEdgeFeatures, 0.0);
  for (int k = 0; k < window_; ++k)
    std::copy(f0.begin(), f0.end(), buf_.begin() + (std::size_t)k * kEdgeFeatures);
}

void FeatureWindow::push(const std::array<double, kEdgeFeatures>& f) {
  if (buf_.empty()) {
    reset(f);
    return;
  }
  std::rotate(buf_.begin(), buf_.begin() + kEdgeFeatures, buf_.end());
  std::copy(f.begin(), f.end(), buf_.end() - kEdgeFeatures);
}

std::vector<InverseRow> compute_inverse_targets(
    const std::vector<PathSequence>& sequences, EdgeId elasticity,
    const ParameterVector& params) {
  std::vector<InverseRow> rows;
  int seq_id = 0;
  for (const auto& seq : sequences) {
    PlasticInternalVariables piv;
    if (!seq.empty()) piv.void_ratio = seq.front().void_ratio;
    bool prev_plastic = false;
    for (std::size_t n = 0; n + 1 < seq.size(); ++n) {
      const StressInvariants inv = invariants(seq[n].stress);
      const ElasticModuli em = eval_elastic_moduli(elasticity, params, inv, piv);
      const Tensor4 ce = Tensor4::isotropic(em.K, em.G);
      const SymmetricTensor2 d_eps = seq[n + 1].strain - seq[n].strain;
      const SymmetricTensor2 d_sig = seq[n + 1].stress - seq[n].stress;
      const SymmetricTensor2 d_eps_p = d_eps - ce.solve(d_sig);

      InverseRow row;
      row.features = edge_features(inv, piv);
      row.sequence = seq_id;
      row.step = (int)n;
      row.d_lambda = d_eps_p.norm();
      const double lambda_tol = 1e-4 * std::max(d_eps.norm(), 1e-300);
      row.plastic = row.d_lambda > lambda_tol;
      row.transition = row.plastic && !prev_plastic && n > 0;
      prev_plastic = row.plastic;
      if (row.plastic) {
        row.m_flow = d_eps_p * (1.0 / row.d_lambda);
        row.n_load = row.m_flow;
        const SymmetricTensor2 cm = ce.apply(row.m_flow);
        row.hardening =
            row.n_load.ddot(ce.apply(d_eps)) / row.d_lambda -
            row.n_load.ddot(cm);
      }
      rows.push_back(row);

      piv = update_internal_variables(
          piv, row.plastic ? d_eps_p : SymmetricTensor2::zero(),
          row.plastic ? row.d_lambda : 0.0, d_eps.trace());
    }
    ++seq_id;
  }
  return rows;
}

namespace {

std::vector<double> target_of(const InverseRow& r, RegressionTarget t) {
  switch (t) {
    case RegressionTarget::LoadingDirection:
      return {r.n_load[0], r.n_load[1], r.n_load[2],
              r.n_load[3], r.n_load[4], r.n_load[5]};
    case RegressionTarget::FlowDirection:
      return {r.m_flow[0], r.m_flow[1], r.m_flow[2],
              r.m_flow[3], r.m_flow[4], r.m_flow[5]};
    case RegressionTarget::HardeningModulus:
      return {r.hardening};
  }
  throw std::logic_error("unreachable");
}

}  // namespace

NeuralEdge train_neural_edge(const std::vector<InverseRow>& rows,
                             RegressionTarget target,
                             const NeuralTrainOptions& opts) {
  // Build per-sequence feature tracks (all rows feed the history, plastic
  // rows carry targets).
  std::vector<std::vector<const InverseRow*>> seqs;
  for (const auto& r : rows) {
    if ((int)seqs.size() <= r.sequence) seqs.resize(r.sequence + 1);
    seqs[r.sequence].push_back(&r);
  }

  struct Example {
    std::vector<double> x;
    std::vector<double> y;
  };
  std::vector<Example> examples;
  for (auto& seq : seqs) {
    if (seq.empty()) continue;
    FeatureWindow w(opts.window);
    w.reset(seq.front()->features);
    for (const auto* r : seq) {
      w.push(r->features);
      if (r->plastic && !r->transition)
        examples.push_back({w.flat(), target_of(*r, target)});
    }
  }
  if (examples.empty())
    throw std::invalid_argument("no plastic rows to train the regressor");

  const int out_dim = (int)examples.front().y.size();
  NeuralEdge edge;
  edge.window_ = opts.window;

  // Per-feature scaling across the window; per-dim scaling on outputs.
  edge.in_mean_.fill(0.0);
  edge.in_std_.fill(0.0);
  const double n_in = (double)examples.size() * opts.window;
  for (const auto& ex : examples)
    for (std::size_t i = 0; i < ex.x.size(); ++i)
      edge.in_mean_[i % kEdgeFeatures] += ex.x[i] / n_in;
  for (const auto& ex : examples)
    for (std::size_t i = 0; i < ex.x.size(); ++i) {
      const double d = ex.x[i] - edge.in_mean_[i % kEdgeFeatures];
      edge.in_std_[i % kEdgeFeatures] += d * d / n_in;
    }
  for (auto& s : edge.in_std_) s = std::max(std::sqrt(s), 1e-12);

  edge.out_mean_.assign(out_dim, 0.0);
  edge.out_std_.assign(out_dim, 0.0);
  for (const auto& ex : examples)
    for (int j = 0; j < out_dim; ++j)
      edge.out_mean_[j] += ex.y[j] / (double)examples.size();
  for (const auto& ex : examples)
    for (int j = 0; j < out_dim; ++j) {
      const double d = ex.y[j] - edge.out_mean_[j];
      edge.out_std_[j] += d * d / (double)examples.size();
    }
  for (auto& s : edge.out_std_) s = std::max(std::sqrt(s), 1e-12);

  const int in_dim = opts.window * kEdgeFeatures;
  Eigen::MatrixXd X(in_dim, (int)examples.size());
  Eigen::MatrixXd Y(out_dim, (int)examples.size());
  for (int k = 0; k < (int)examples.size(); ++k) {
    for (int i = 0; i < in_dim; ++i)
      X(i, k) = (examples[k].x[i] - edge.in_mean_[i % kEdgeFeatures]) /
                edge.in_std_[i % kEdgeFeatures];
    for (int j = 0; j < out_dim; ++j)
      Y(j, k) = (examples[k].y[j] - edge.out_mean_[j]) / edge.out_std_[j];
  }

  std::mt19937_64 rng(opts.seed);
  edge.net_ = Mlp({in_dim, 64, 64, out_dim}, rng);

  std::vector<int> order((std::size_t)examples.size());
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, opts.batch);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int loss_n = 0;
    for (int start = 0; start < (int)order.size(); start += batch) {
      const int bs = std::min(batch, (int)order.size() - start);
      Eigen::MatrixXd xb(in_dim, bs), yb(out_dim, bs);
      for (int k = 0; k < bs; ++k) {
        xb.col(k) = X.col(order[start + k]);
        yb.col(k) = Y.col(order[start + k]);
      }
      Mlp::Trace tr = edge.net_.forward_trace(xb);
      Eigen::MatrixXd diff = tr.act.back() - yb;
      loss_sum += diff.array().square().sum();
      loss_n += bs * out_dim;
      Eigen::MatrixXd g = 2.0 * diff / (double)(bs * out_dim);
      edge.net_.train_step(tr, g, opts.lr);
    }
    const double epoch_loss = loss_sum / std::max(loss_n, 1);
    if (epoch == 0) edge.stats_.first_epoch_loss = epoch_loss;
    edge.stats_.last_epoch_loss = epoch_loss;
  }
  edge.stats_.rows = (int)examples.size();
  return edge;
}

std::vector<double> NeuralEdge::predict(
    const std::vector<double>& flat_window) const {
  const int in_dim = window_ * kEdgeFeatures;
  if ((int)flat_window.size() != in_dim)
    throw std::invalid_argument("feature window size mismatch");
  Eigen::VectorXd x(in_dim);
  for (int i = 0; i < in_dim; ++i)
    x(i) = (flat_window[i] - in_mean_[i % kEdgeFeatures]) /
           in_std_[i % kEdgeFeatures];
  Eigen::VectorXd y = net_.forward(x);
  std::vector<double> out((std::size_t)y.size());
  for (int j = 0; j < (int)y.size(); ++j)
    out[j] = y(j) * out_std_[j] + out_mean_[j];
  return out;
}

SymmetricTensor2 NeuralEdge::predict_direction(const FeatureWindow& w) const {
  const auto v = predict(w.flat());
  if (v.size() != 6)
    throw std::logic_error("direction regressor has wrong output dimension");
  SymmetricTensor2 t(v[0], v[1], v[2], v[3], v[4], v[5]);
  const double n = t.norm();
  if (n < 1e-12) throw ApexError("regressor produced a degenerate direction");
  return t * (1.0 / n);
}

double NeuralEdge::predict_scalar(const FeatureWindow& w) const {
  const auto v = predict(w.flat());
  if (v.size() != 1)
    throw std::logic_error("scalar regressor has wrong output dimension");
  return v[0];
}

void NeuralEdge::save(const std::string& bin_path,
                      const std::string& json_path) const {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path);
  net_.save(bin);

  nlohmann::ordered_json j;
  j["window"] = window_;
  j["layers"] = net_.layer_sizes();
  j["in_mean"] = in_mean_;
  j["in_std"] = in_std_;
  j["out_mean"] = out_mean_;
  j["out_std"] = out_std_;
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write " + json_path);
  js << j.dump(2) << "\n";
}

NeuralEdge NeuralEdge::load(const std::string& bin_path,
                            const std::string& json_path) {
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + bin_path);
  NeuralEdge e;
  e.net_ = Mlp::load(bin);

  std::ifstream js(json_path);
  if (!js) throw std::runtime_error("cannot read " + json_path);
  nlohmann::json j;
  js >> j;
  e.window_ = j.at("window").get<int>();
  auto im = j.at("in_mean").get<std::vector<double>>();
  auto is = j.at("in_std").get<std::vector<double>>();
  if (im.size() != kEdgeFeatures || is.size() != kEdgeFeatures)
    throw std::runtime_error("bad scaling block in " + json_path);
  std::copy(im.begin(), im.end(), e.in_mean_.begin());
  std::copy(is.begin(), is.end(), e.in_std_.begin());
  e.out_mean_ = j.at("out_mean").get<std::vector<double>>();
  e.out_std_ = j.at("out_std").get<std::vector<double>>();
  for (double s : e.out_std_)
    if (!(s > 0.0)) throw std::runtime_error("non-positive stored std");
  return e;
}

}  // namespace mmg
