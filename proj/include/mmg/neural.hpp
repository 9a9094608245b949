#pragma once

#include <array>
#include <string>
#include <vector>

#include "mmg/edges.hpp"
#include "mmg/mlp.hpp"
#include "mmg/state.hpp"

namespace mmg {

/// One step of an observed stress/strain path (what the regressor edges are
/// trained from).
struct PathSample {
  SymmetricTensor2 strain;
  SymmetricTensor2 stress;
  double void_ratio = 0.0;
};
using PathSequence = std::vector<PathSample>;

constexpr int kEdgeFeatures = 7;  // p, q, theta, eps_p_bar, eps_p_v, eps_p_s, e

std::array<double, kEdgeFeatures> edge_features(
    const StressInvariants& inv, const PlasticInternalVariables& piv);

/// Rolling window of per-step features, oldest first.
class FeatureWindow {
 public:
  explicit FeatureWindow(int window = 20) : window_(window) {}
  int window() const { return window_; }
  void reset(const std::array<double, kEdgeFeatures>& f0);
  void push(const std::array<double, kEdgeFeatures>& f);
  const std::vector<double>& flat() const { return buf_; }
  bool empty() const { return buf_.empty(); }

 private:
  int window_;
  std::vector<double> buf_;
};

/// Per-step training row recovered from data by inverting the incremental
/// stress-strain relations with a chosen elasticity law.
struct InverseRow {
  std::array<double, kEdgeFeatures> features{};  // state at step start
  SymmetricTensor2 m_flow;                       // unit, plastic rows only
  SymmetricTensor2 n_load;                       // = m_flow (associative)
  double hardening = 0.0;
  double d_lambda = 0.0;
  bool plastic = false;
  /// First plastic row after an elastic stretch: the increment straddles
  /// the yield transition, so its inverted hardening modulus mixes elastic
  /// and plastic response. Excluded from regressor training.
  bool transition = false;
  int sequence = 0;
  int step = 0;
};

/// Inverts each increment: d_eps_p = d_eps - C^-1 : d_sigma, then the flow
/// direction, loading direction (associative) and hardening modulus.
/// Rows with d_lambda below the threshold are emitted as elastic rows.
std::vector<InverseRow> compute_inverse_targets(
    const std::vector<PathSequence>& sequences, EdgeId elasticity,
    const ParameterVector& params);

enum class RegressionTarget { LoadingDirection, FlowDirection, HardeningModulus };

struct NeuralTrainOptions {
  int window = 20;  // current value plus 19 history values
  int epochs = 200;
  int batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct NeuralTrainStats {
  double first_epoch_loss = 0.0;
  double last_epoch_loss = 0.0;
  int rows = 0;
};

/// Feed-forward regressor over a flattened feature history window with
/// standard scaling on inputs and outputs.
class NeuralEdge {
 public:
  NeuralEdge() = default;

  int window() const { return window_; }
  int output_dim() const { return out_mean_.size() ? (int)out_mean_.size() : 0; }

  std::vector<double> predict(const std::vector<double>& flat_window) const;
  SymmetricTensor2 predict_direction(const FeatureWindow& w) const;
  double predict_scalar(const FeatureWindow& w) const;

  void save(const std::string& bin_path, const std::string& json_path) const;
  static NeuralEdge load(const std::string& bin_path,
                         const std::string& json_path);

  const NeuralTrainStats& stats() const { return stats_; }

  friend NeuralEdge train_neural_edge(const std::vector<InverseRow>& rows,
                                      RegressionTarget target,
                                      const NeuralTrainOptions& opts);

 private:
  Mlp net_;
  int window_ = 20;
  std::array<double, kEdgeFeatures> in_mean_{}, in_std_{};
  std::vector<double> out_mean_, out_std_;
  NeuralTrainStats stats_;
};

NeuralEdge train_neural_edge(const std::vector<InverseRow>& rows,
                             RegressionTarget target,
                             const NeuralTrainOptions& opts = {});

}  // namespace mmg
