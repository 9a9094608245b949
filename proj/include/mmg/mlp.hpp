#pragma once

#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace mmg {

/// Fully connected network with tanh hidden layers and a linear output
/// layer. Columns of the batch matrices are samples. Training is Adam on a
/// caller-supplied output gradient, which lets the policy/value heads and
/// plain regression share one implementation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& sizes, std::mt19937_64& rng);

  int input_dim() const { return W_.empty() ? 0 : (int)W_.front().cols(); }
  int output_dim() const { return W_.empty() ? 0 : (int)W_.back().rows(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X) const;

  struct Trace {
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act.back() = output
  };
  Trace forward_trace(const Eigen::MatrixXd& X) const;

  /// Accumulates one Adam step from dLoss/dOutput evaluated on the trace.
  void train_step(const Trace& t, const Eigen::MatrixXd& dloss_dout,
                  double lr);

  void save(std::ostream& os) const;
  static Mlp load(std::istream& is);

  std::vector<int> layer_sizes() const;

 private:
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
  // Adam accumulators
  std::vector<Eigen::MatrixXd> mW_, vW_;
  std::vector<Eigen::VectorXd> mb_, vb_;
  long step_ = 0;
};

}  // namespace mmg
