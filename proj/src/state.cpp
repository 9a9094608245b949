#include "mmg/state.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmg {

SymmetricTensor2 deviator(const SymmetricTensor2& stress) {
  return stress.deviator();
}

StressInvariants invariants(const SymmetricTensor2& stress) {
  StressInvariants r;
  r.p = stress.trace() / 3.0;
  const SymmetricTensor2 s = stress.deviator();
  const double j2 = 0.5 * s.ddot(s);
  r.q = std::sqrt(3.0 * std::max(j2, 0.0));

  // Degenerate deviator: the arcsine argument is 0/0, define theta = 0.
  const double q_tol = 1e-10 * std::max(std::abs(r.p), 1.0);
  if (r.q < q_tol) {
    r.theta = 0.0;
    return r;
  }
  const double j3 = s.square().ddot(s) / 3.0;
  double arg = -1.5 * std::sqrt(3.0) * j3 / std::pow(j2, 1.5);
  arg = std::clamp(arg, -1.0, 1.0);
  r.theta = std::asin(arg) / 3.0;
  return r;
}

SymmetricTensor2 lode_angle_gradient(const SymmetricTensor2& stress) {
  const SymmetricTensor2 s = stress.deviator();
  const double j2 = 0.5 * s.ddot(s);
  if (j2 <= 0.0) return SymmetricTensor2::zero();
  const double j3 = s.square().ddot(s) / 3.0;
  const double u = std::clamp(-1.5 * std::sqrt(3.0) * j3 / std::pow(j2, 1.5),
                              -1.0, 1.0);
  // On the triaxial meridians the surface is symmetric about the meridian
  // plane and the theta term of any isotropic gradient vanishes.
  if (1.0 - u * u < 1e-12) return SymmetricTensor2::zero();
  // dJ3/dsigma = dev(s.s), dJ2/dsigma = s
  const SymmetricTensor2 dj3 = s.square().deviator();
  const double c = -1.5 * std::sqrt(3.0);
  SymmetricTensor2 du =
      dj3 * (c / std::pow(j2, 1.5)) - s * (1.5 * c * j3 / std::pow(j2, 2.5));
  return du * (1.0 / (3.0 * std::sqrt(1.0 - u * u)));
}

PlasticInternalVariables update_internal_variables(
    const PlasticInternalVariables& piv, const SymmetricTensor2& d_eps_p,
    double d_lambda, double d_eps_v_total) {
  if (d_lambda < 0.0)
    throw std::invalid_argument("negative plastic multiplier increment");
  PlasticInternalVariables r = piv;
  r.lambda_acc += d_lambda;
  r.eps_p_bar += d_eps_p.norm();
  r.eps_p_v += d_eps_p.trace();
  r.eps_p_s += d_eps_p.deviator().norm();
  r.void_ratio += (1.0 + r.void_ratio) * d_eps_v_total;
  return r;
}

}  // namespace mmg
