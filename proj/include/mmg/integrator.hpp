#pragma once

#include <functional>

#include "mmg/model_graph.hpp"
#include "mmg/protocol.hpp"
#include "mmg/state.hpp"

namespace mmg {

/// Mixed stress/strain loading constraints S dsigma + E deps = dY, one row
/// per generalized component. Strain rows act on engineering shears.
struct ConstraintSet {
  Matrix6 S = Matrix6::Zero();
  Matrix6 E = Matrix6::Zero();
  Vector6 dY = Vector6::Zero();  // per driving step
};

ConstraintSet constraint_matrices(const TestProtocol& protocol);

struct SubsteppingParams {
  double stol = 1e-4;      // relative substep error tolerance
  double eps = 1e-16;      // error floor
  double ftol = 1e-9;      // yield intersection tolerance
  int max_substeps = 10000;
  double min_dT = 1e-6;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StepDiagnostics {
  double max_r = 0.0;      // largest accepted substep error estimate
  int substeps = 0;
  double d_lambda = 0.0;
  SymmetricTensor2 d_eps_p;
  double f_end = 0.0;      // yield value after the step (surface models)
  bool plastic = false;
};

/// Elastic-to-plastic intersection fraction along a trial increment.
/// f_along(alpha) must satisfy f_along(0) <= 0 < f_along(1).
double pegasus_intersection(const std::function<double(double)>& f_along,
                            double ftol);

/// One driving step of the explicit scheme: constraint solve, trial stress,
/// loading check, Pegasus intersection and modified-Euler substepping with
/// automatic error control. Mutates state and the model's edge state.
StepDiagnostics integrate_step(ModelGraph& model, MaterialState& state,
                               const ConstraintSet& constraints,
                               const SubsteppingParams& params);

/// Runs a full protocol from the isotropically consolidated initial state.
/// The returned record has n_steps+1 entries including the initial state.
TestRecord run_test(ModelGraph& model, const TestProtocol& protocol,
                    const SubsteppingParams& params);

}  // namespace mmg
