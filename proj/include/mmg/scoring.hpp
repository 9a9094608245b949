#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmg/integrator.hpp"
#include "mmg/lab.hpp"
#include "mmg/model_graph.hpp"

namespace mmg {

struct ScoreConfig {
  double percentile = 80.0;  // P%
  double eps_crit = 1e-5;
  // performance weights: calibration accuracy, prediction accuracy
  std::array<double, 2> weights = {0.5, 0.5};
  int eval_steps = 200;  // driving steps for game-time model evaluation
  SubsteppingParams substepping;
};

struct ScoreReport {
  double a_cal = 0.0;
  double a_pred = 0.0;
  double thermo = 0.0;  // critical feature, {0, 1}
  double score = 0.0;
  std::vector<std::pair<std::string, double>> per_test_mse;  // mean per test
  std::string failure;  // nonempty when an integration failed
  double percentile = 80.0;
  double eps_crit = 1e-5;

  std::string to_json() const;
};

/// Standardization constants per output feature (the 6 stress components),
/// fit on the union of the calibration targets.
struct FeatureScaler {
  std::array<double, 6> mean{};
  std::array<double, 6> std{};
  static FeatureScaler fit(const std::vector<const TestRecord*>& records);
  double scaled(int feature, double value) const {
    return (value - mean[feature]) / std[feature];
  }
};

/// Per-sample MSE between a model run and a data record at matching strain
/// stations; stride maps model step k onto data step k*stride.
std::vector<double> sample_mse(const TestRecord& model_rec,
                               const TestRecord& data_rec,
                               const FeatureScaler& scaling, int stride = 1);

/// Step-function percentile: value at rank ceil(P/100 * N), 1-based.
double ecdf_percentile(std::vector<double> mse_list, double percentile);

double accuracy(const std::vector<double>& mse_list, const ScoreConfig& cfg);

/// 1 if the plastic dissipation increment is non-negative at every step of
/// every record (within roundoff), else 0. Records must carry integrator
/// diagnostics.
int thermodynamic_check(const std::vector<const TestRecord*>& model_records);

/// Runs the model over one data record at the evaluation resolution.
TestRecord evaluate_model_on(const ModelGraph& model, const TestRecord& data,
                             const ScoreConfig& cfg, int* stride_out = nullptr);

/// Cross-validated composite score: critical-feature product times the
/// weighted calibration/prediction accuracies.
ScoreReport model_score(const ModelGraph& model,
                        const std::vector<const TestRecord*>& calibration,
                        const std::vector<const TestRecord*>& validation,
                        const ScoreConfig& cfg);

struct CalibrationOptions {
  int restarts = 5;
  int budget_per_restart = 2000;  // model-path evaluations
  std::uint64_t seed = 0;
  ScoreConfig eval;               // resolution/tolerances for the objective
  NeuralTrainOptions neural;      // for regressor edges
};

struct CalibrationResult {
  double objective = 0.0;  // mean sample MSE on the calibration set
  long evaluations = 0;
  bool budget_exhausted = false;
};

/// Fits the model's free parameters to the calibration records by
/// derivative-free simplex search within the admissible ranges; trains any
/// regressor edges from inversely computed targets. Deterministic for a
/// fixed seed. A zero budget leaves the midpoint-of-range initial guess.
CalibrationResult calibrate(ModelGraph& model,
                            const std::vector<const TestRecord*>& calibration,
                            const CalibrationOptions& opts);

}  // namespace mmg
