#include "mmg/mlp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mmg {

Mlp::Mlp(const std::vector<int>& sizes, std::mt19937_64& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("need >= 2 layer sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int nin = sizes[i], nout = sizes[i + 1];
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / nin));
    Eigen::MatrixXd w(nout, nin);
    for (int r = 0; r < nout; ++r)
      for (int c = 0; c < nin; ++c) w(r, c) = dist(rng);
    W_.push_back(w);
    b_.push_back(Eigen::VectorXd::Zero(nout));
    mW_.push_back(Eigen::MatrixXd::Zero(nout, nin));
    vW_.push_back(Eigen::MatrixXd::Zero(nout, nin));
    mb_.push_back(Eigen::VectorXd::Zero(nout));
    vb_.push_back(Eigen::VectorXd::Zero(nout));
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    h = (W_[l] * h + b_[l]).eval();
    if (l + 1 < W_.size()) h = h.array().tanh();
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd h = X;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    h = ((W_[l] * h).colwise() + b_[l]).eval();
    if (l + 1 < W_.size()) h = h.array().tanh();
  }
  return h;
}

Mlp::Trace Mlp::forward_trace(const Eigen::MatrixXd& X) const {
  Trace t;
  t.act.push_back(X);
  for (std::size_t l = 0; l < W_.size(); ++l) {
    Eigen::MatrixXd h = (W_[l] * t.act.back()).colwise() + b_[l];
    if (l + 1 < W_.size()) h = h.array().tanh();
    t.act.push_back(std::move(h));
  }
  return t;
}

void Mlp::train_step(const Trace& t, const Eigen::MatrixXd& dloss_dout,
                     double lr) {
  const int L = (int)W_.size();
  Eigen::MatrixXd delta = dloss_dout;
  std::vector<Eigen::MatrixXd> gW(L);
  std::vector<Eigen::VectorXd> gb(L);
  for (int l = L - 1; l >= 0; --l) {
    gW[l] = delta * t.act[l].transpose();
    gb[l] = delta.rowwise().sum();
    if (l > 0) {
      // back through tanh of the previous layer's output
      Eigen::MatrixXd back = W_[l].transpose() * delta;
      delta = back.array() * (1.0 - t.act[l].array().square());
    }
  }
  ++step_;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double corr1 = 1.0 - std::pow(b1, (double)step_);
  const double corr2 = 1.0 - std::pow(b2, (double)step_);
  for (int l = 0; l < L; ++l) {
    mW_[l] = b1 * mW_[l] + (1.0 - b1) * gW[l];
    vW_[l] = b2 * vW_[l] + (1.0 - b2) * gW[l].array().square().matrix();
    mb_[l] = b1 * mb_[l] + (1.0 - b1) * gb[l];
    vb_[l] = b2 * vb_[l] + (1.0 - b2) * gb[l].array().square().matrix();
    W_[l] -= lr * ((mW_[l] / corr1).array() /
                   ((vW_[l] / corr2).array().sqrt() + eps))
                      .matrix();
    b_[l] -= lr * ((mb_[l] / corr1).array() /
                   ((vb_[l] / corr2).array().sqrt() + eps))
                      .matrix();
  }
}

std::vector<int> Mlp::layer_sizes() const {
  std::vector<int> s;
  if (W_.empty()) return s;
  s.push_back((int)W_.front().cols());
  for (const auto& w : W_) s.push_back((int)w.rows());
  return s;
}

void Mlp::save(std::ostream& os) const {
  const auto sizes = layer_sizes();
  const std::int64_t n = (std::int64_t)sizes.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (int s : sizes) {
    const std::int64_t v = s;
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  for (std::size_t l = 0; l < W_.size(); ++l) {
    os.write(reinterpret_cast<const char*>(W_[l].data()),
             (std::streamsize)(sizeof(double) * W_[l].size()));
    os.write(reinterpret_cast<const char*>(b_[l].data()),
             (std::streamsize)(sizeof(double) * b_[l].size()));
  }
}

Mlp Mlp::load(std::istream& is) {
  std::int64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!is || n < 2 || n > 64) throw std::runtime_error("bad network file");
  std::vector<int> sizes((std::size_t)n);
  for (auto& s : sizes) {
    std::int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    s = (int)v;
  }
  std::mt19937_64 rng(0);
  Mlp net(sizes, rng);
  for (std::size_t l = 0; l < net.W_.size(); ++l) {
    is.read(reinterpret_cast<char*>(net.W_[l].data()),
            (std::streamsize)(sizeof(double) * net.W_[l].size()));
    is.read(reinterpret_cast<char*>(net.b_[l].data()),
            (std::streamsize)(sizeof(double) * net.b_[l].size()));
  }
  if (!is) throw std::runtime_error("truncated network file");
  return net;
}

}  // namespace mmg
