#pragma once

#include "mmg/tensor.hpp"

namespace mmg {

/// Mean stress p, deviatoric stress measure q = sqrt(3 J2), and Lode angle
/// theta in [-pi/6, pi/6]. theta = +pi/6 on the triaxial compression
/// meridian under the tension-positive convention used throughout.
struct StressInvariants {
  double p = 0.0;      // kPa
  double q = 0.0;      // kPa
  double theta = 0.0;  // rad
};

StressInvariants invariants(const SymmetricTensor2& stress);

SymmetricTensor2 deviator(const SymmetricTensor2& stress);

/// d(theta)/d(sigma). Returns zero near the triaxial meridians where the
/// Lode angle is stationary in the deviatoric plane (|sin 3theta| -> 1).
SymmetricTensor2 lode_angle_gradient(const SymmetricTensor2& stress);

/// Strain-like plastic internal variables accumulated over the loading
/// history, plus the void ratio.
struct PlasticInternalVariables {
  double lambda_acc = 0.0;  // accumulated plastic multiplier
  double eps_p_bar = 0.0;   // accumulated total plastic strain
  double eps_p_v = 0.0;     // accumulated volumetric plastic strain
  double eps_p_s = 0.0;     // accumulated deviatoric plastic strain
  double void_ratio = 0.0;  // e > 0 where the material model uses it
};

/// Accumulates one plastic increment. d_eps_v_total is the increment of
/// total volumetric strain, which drives the void ratio: de = (1+e) d_eps_v.
PlasticInternalVariables update_internal_variables(
    const PlasticInternalVariables& piv, const SymmetricTensor2& d_eps_p,
    double d_lambda, double d_eps_v_total);

/// Stress, strain and internal variables at a time step. The cached
/// invariants always equal invariants(stress).
struct MaterialState {
  SymmetricTensor2 stress;
  SymmetricTensor2 strain;
  PlasticInternalVariables piv;
  StressInvariants inv;

  void set_stress(const SymmetricTensor2& s) {
    stress = s;
    inv = invariants(s);
  }

  static MaterialState consolidated(double p0, double e0) {
    MaterialState st;
    st.piv.void_ratio = e0;
    st.set_stress(SymmetricTensor2::isotropic(p0));
    return st;
  }
};

}  // namespace mmg
