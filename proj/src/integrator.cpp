#include "mmg/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace mmg {

const char* test_kind_name(TestKind k) {
  switch (k) {
    case TestKind::OneDimensional: return "one-dimensional";
    case TestKind::DrainedTriaxial: return "drained-triaxial";
    case TestKind::UndrainedTriaxial: return "undrained-triaxial";
    case TestKind::SimpleShear: return "simple-shear";
    case TestKind::TrueTriaxial: return "true-triaxial";
  }
  throw std::logic_error("bad test kind");
}

TestKind test_kind_from_name(const std::string& name) {
  for (TestKind k :
       {TestKind::OneDimensional, TestKind::DrainedTriaxial,
        TestKind::UndrainedTriaxial, TestKind::SimpleShear,
        TestKind::TrueTriaxial})
    if (name == test_kind_name(k)) return k;
  throw std::invalid_argument("unknown test kind: " + name);
}

ConstraintSet constraint_matrices(const TestProtocol& pr) {
  ConstraintSet cs;
  const double d_driven = pr.sign * pr.target_strain / pr.n_steps;
  switch (pr.kind) {
    case TestKind::DrainedTriaxial:
      cs.E(0, 0) = 1.0;
      cs.dY(0) = d_driven;
      for (int i = 1; i < 6; ++i) cs.S(i, i) = 1.0;
      break;
    case TestKind::UndrainedTriaxial:
      cs.E(0, 0) = 1.0;
      cs.dY(0) = d_driven;
      cs.E(1, 0) = cs.E(1, 1) = cs.E(1, 2) = 1.0;  // volume preserved
      cs.S(2, 1) = 1.0;
      cs.S(2, 2) = -1.0;  // d sigma22 = d sigma33
      for (int i = 3; i < 6; ++i) cs.S(i, i) = 1.0;
      break;
    case TestKind::OneDimensional:
      cs.E(0, 0) = 1.0;
      cs.dY(0) = d_driven;
      for (int i = 1; i < 6; ++i) cs.E(i, i) = 1.0;
      break;
    case TestKind::SimpleShear:
      cs.S(0, 0) = 1.0;
      cs.S(1, 1) = 1.0;
      cs.E(2, 2) = 1.0;
      cs.E(3, 3) = 1.0;
      cs.dY(3) = 2.0 * std::abs(d_driven);  // engineering shear, gamma = 2 eps
      cs.E(4, 4) = 1.0;
      cs.E(5, 5) = 1.0;
      break;
    case TestKind::TrueTriaxial:
      cs.E(0, 0) = 1.0;
      cs.dY(0) = d_driven;
      // b (sigma11 - sigma33) = sigma22 - sigma33 held incrementally
      cs.S(1, 0) = -pr.b;
      cs.S(1, 1) = 1.0;
      cs.S(1, 2) = pr.b - 1.0;
      cs.S(2, 2) = 1.0;
      for (int i = 3; i < 6; ++i) cs.S(i, i) = 1.0;
      break;
  }
  return cs;
}

double pegasus_intersection(const std::function<double(double)>& f_along,
                            double ftol) {
  double a0 = 0.0, a1 = 1.0;
  double f0 = f_along(0.0), f1 = f_along(1.0);
  if (f1 <= 0.0)
    throw IntegrationError("pegasus: trial state not outside the surface");
  const double scale = std::max(std::abs(f1), 1.0);
  if (std::abs(f0) <= ftol * scale) return 0.0;
  if (f0 > 0.0)
    throw IntegrationError("pegasus: start state already outside the surface");

  double a2 = a0, f2 = f0;
  for (int it = 0; it < 50; ++it) {
    a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
    f2 = f_along(a2);
    if (std::abs(f2) <= ftol * scale) return a2;
    if (f2 * f1 < 0.0) {
      a0 = a1;
      f0 = f1;
    } else {
      f0 = f0 * f1 / (f1 + f2);  // Pegasus scaling keeps superlinear rate
    }
    a1 = a2;
    f1 = f2;
  }
  return a2;
}

namespace {

Vector6 solve_constraints(const Matrix6& S, const Matrix6& E,
                          const Matrix6& D, const Vector6& rhs) {
  const Matrix6 M = S * D + E;
  Vector6 x = M.partialPivLu().solve(rhs);
  const double res = (M * x - rhs).norm();
  if (!x.allFinite() || res > 1e-6 * (rhs.norm() + 1.0))
    throw IntegrationError("singular constraint system");
  return x;
}

// Consistent drift correction: the residual f > 0 after an accepted
// substep is relaxed by the plastic flow the frozen-modulus stages missed,
// delta_lambda = f / (H + n:C:m), updating stress and internal variables
// together. For J2 this reduces to scaling the deviator.
void correct_drift(ModelGraph& model, SymmetricTensor2& stress,
                   PlasticInternalVariables& piv, StepDiagnostics& diag,
                   double ftol_abs) {
  for (int it = 0; it < 10; ++it) {
    const StressInvariants inv = invariants(stress);
    const ElasticModuli em = model.moduli(inv, piv);
    const double f = model.yield(stress, piv, em.G);
    if (f <= ftol_abs) return;
    SymmetricTensor2 n, m;
    try {
      n = model.loading_direction(stress, inv, piv, em.G, nullptr);
      m = model.flow_direction(stress, inv, piv, nullptr);
    } catch (const ApexError&) {
      return;
    }
    const Tensor4 ce = Tensor4::isotropic(em.K, em.G);
    const SymmetricTensor2 cm = ce.apply(m);
    const double h = model.hardening_modulus(stress, inv, piv, m, em.G);
    const double chi = h + n.ddot(cm);
    if (!(chi > 0.0)) return;
    const double dl = f / chi;
    model.advance_edge_state(stress, inv, piv, m * dl, dl);
    stress -= cm * dl;
    piv = update_internal_variables(piv, m * dl, dl, 0.0);
    diag.d_lambda += dl;
    diag.d_eps_p += m * dl;
  }
}

}  // namespace

StepDiagnostics integrate_step(ModelGraph& model, MaterialState& state,
                               const ConstraintSet& cs,
                               const SubsteppingParams& sp) {
  StepDiagnostics diag;
  const ElasticModuli em = model.moduli(state.inv, state.piv);
  const Tensor4 ce = Tensor4::isotropic(em.K, em.G);

  const Vector6 deps_v = solve_constraints(cs.S, cs.E, ce.matrix(), cs.dY);
  const SymmetricTensor2 d_eps = SymmetricTensor2::from_voigt_strain(deps_v);
  const SymmetricTensor2 d_sig_e = ce.apply(d_eps);

  // Deviatoric direction of the trial increment, used to seed directions
  // at states with a vanishing stress deviator.
  SymmetricTensor2 hint_t = d_sig_e.deviator();
  const double hint_n = hint_t.norm();
  const SymmetricTensor2* hint = nullptr;
  if (hint_n > 1e-12 * (d_sig_e.norm() + 1e-300)) {
    hint_t *= 1.0 / hint_n;
    hint = &hint_t;
  }

  bool plastic = false;
  double f_start = 0.0;
  if (model.has_yield_surface()) {
    const double f_trial =
        model.yield(state.stress + d_sig_e, state.piv, em.G);
    plastic = f_trial > 0.0;
    f_start = model.yield(state.stress, state.piv, em.G);
  } else {
    const SymmetricTensor2 n = model.loading_direction(
        state.stress, state.inv, state.piv, em.G, hint);
    plastic = n.ddot(d_sig_e) > 1e-10 * d_sig_e.norm();
  }

  if (!plastic) {
    state.set_stress(state.stress + d_sig_e);
    state.strain += d_eps;
    state.piv = update_internal_variables(state.piv, SymmetricTensor2::zero(),
                                          0.0, d_eps.trace());
    if (model.has_yield_surface())
      diag.f_end = model.yield(state.stress, state.piv, em.G);
    return diag;
  }
  diag.plastic = true;

  // Pegasus intersection for the elastic portion (yield-surface models with
  // the start state strictly inside).
  double alpha = 0.0;
  if (model.has_yield_surface()) {
    const double scale = std::max(std::abs(f_start), 1.0);
    if (f_start < -sp.ftol * scale) {
      alpha = pegasus_intersection(
          [&](double a) {
            return model.yield(state.stress + d_sig_e * a, state.piv, em.G);
          },
          sp.ftol);
    }
  }

  SymmetricTensor2 sig_t = state.stress + d_sig_e * alpha;
  SymmetricTensor2 eps_t = state.strain + d_eps * alpha;
  // The void ratio advances once per driving step (below) so that the
  // stored column obeys the step-level recurrence e += (1+e) d_eps_v
  // exactly; plastic variables accumulate per accepted substep.
  const double e_start = state.piv.void_ratio;
  PlasticInternalVariables piv = state.piv;

  double T = 0.0, dT = 1.0;
  int substeps = 0;
  while (T < 1.0 - 1e-12) {
    if (++substeps > sp.max_substeps)
      throw IntegrationError("substep limit exceeded");
    const StressInvariants inv_t = invariants(sig_t);
    const ElasticModuli em_t = model.moduli(inv_t, piv);
    const Tensor4 ce_t = Tensor4::isotropic(em_t.K, em_t.G);

    const SymmetricTensor2 n1 =
        model.loading_direction(sig_t, inv_t, piv, em_t.G, hint);
    const SymmetricTensor2 m1 =
        model.flow_direction(sig_t, inv_t, piv, hint);
    const double h = model.hardening_modulus(sig_t, inv_t, piv, m1, em_t.G);
    const SymmetricTensor2 cm1 = ce_t.apply(m1);
    const SymmetricTensor2 cn1 = ce_t.apply(n1);
    const double chi = h + n1.ddot(cm1);
    if (!(chi > 1e-8 * std::abs(n1.ddot(cm1))))
      throw IntegrationError("vanishing plastic denominator");

    Matrix6 dep = ce_t.matrix() -
                  (cm1.voigt_stress() * cn1.voigt_stress().transpose()) / chi;
    const Vector6 rhs = (1.0 - alpha) * dT * cs.dY;
    Vector6 deps_sub_v;
    try {
      deps_sub_v = solve_constraints(cs.S, cs.E, dep, rhs);
    } catch (const IntegrationError&) {
      // Softening can make the elasto-plastic system ill-posed for this
      // substep size; retry smaller before giving up.
      if (dT > sp.min_dT) {
        dT = std::max(0.5 * dT, sp.min_dT);
        continue;
      }
      throw;
    }
    const SymmetricTensor2 deps_sub =
        SymmetricTensor2::from_voigt_strain(deps_sub_v);
    const SymmetricTensor2 dsig_e_sub = ce_t.apply(deps_sub);

    const double dl1 = std::max(0.0, n1.ddot(dsig_e_sub) / chi);
    const SymmetricTensor2 dsig1 = dsig_e_sub - cm1 * dl1;

    const SymmetricTensor2 sig2 = sig_t + dsig1;
    const StressInvariants inv2 = invariants(sig2);
    const SymmetricTensor2 n2 =
        model.loading_direction(sig2, inv2, piv, em_t.G, hint);
    const SymmetricTensor2 m2 = model.flow_direction(sig2, inv2, piv, hint);
    const double dl2 = std::max(0.0, n2.ddot(dsig_e_sub) / chi);
    const SymmetricTensor2 dsig2 = dsig_e_sub - ce_t.apply(m2) * dl2;

    const SymmetricTensor2 sig_new = sig_t + (dsig1 + dsig2) * 0.5;
    const double err_num = (dsig2 - dsig1).norm();
    const double r =
        std::max(err_num / (2.0 * std::max(sig_new.norm(), 1e-12)), sp.eps);

    const double factor =
        std::clamp(0.9 * std::sqrt(sp.stol / r), 0.1, 2.0);
    if (r <= sp.stol) {
      const double dl = 0.5 * (dl1 + dl2);
      const SymmetricTensor2 deps_p = (m1 * dl1 + m2 * dl2) * 0.5;

      if (model.has_yield_surface()) {
        // Yield drift the frozen-chi error estimate cannot see (rapidly
        // changing hardening modulus): re-substep instead of committing, so
        // the mixed-constraint rows stay within the substepping tolerance.
        PlasticInternalVariables piv_try =
            update_internal_variables(piv, deps_p, dl, 0.0);
        const double fd = model.yield(sig_new, piv_try, em_t.G);
        const double sig_ref =
            std::max({invariants(sig_new).q, std::abs(inv_t.p), 1.0});
        if (fd > std::max(0.25 * sp.stol, 1e-5) * sig_ref &&
            dT > sp.min_dT * (1.0 + 1e-9)) {
          dT = std::max(0.5 * dT, sp.min_dT);
          continue;
        }
      }

      model.advance_edge_state(sig_t, inv_t, piv, deps_p, dl);
      piv = update_internal_variables(piv, deps_p, dl, 0.0);
      sig_t = sig_new;
      eps_t += deps_sub;
      diag.d_lambda += dl;
      diag.d_eps_p += deps_p;
      diag.max_r = std::max(diag.max_r, r);
      T += dT;

      if (model.has_yield_surface()) {
        const double sig_ref =
            std::max({invariants(sig_t).q, std::abs(inv_t.p), 1.0});
        correct_drift(model, sig_t, piv, diag, sp.ftol * sig_ref);
      }
      dT = std::min(dT * factor, 1.0 - T);
      dT = std::max(dT, sp.min_dT);
    } else {
      if (dT <= sp.min_dT * (1.0 + 1e-9))
        throw IntegrationError("substep error above STOL at minimum step");
      dT = std::max(dT * factor, sp.min_dT);
    }
  }

  // Drift corrections perturb the stress rows of the constraint system and
  // vice versa; alternate the two projections until both hold.
  {
    std::vector<int> rows;
    for (int i = 0; i < 6; ++i)
      if (cs.S.row(i).norm() > 0.0) rows.push_back(i);
    Eigen::MatrixXd s_act((int)rows.size(), 6);
    for (int i = 0; i < (int)rows.size(); ++i)
      s_act.row(i) = cs.S.row(rows[i]);
    const Vector6 deps_tot = (eps_t - state.strain).voigt_strain();
    for (int pass = 0; pass < 8 && !rows.empty(); ++pass) {
      const Vector6 dsig_tot = (sig_t - state.stress).voigt_stress();
      const Vector6 res = cs.dY - cs.S * dsig_tot - cs.E * deps_tot;
      Eigen::VectorXd r_act((int)rows.size());
      for (int i = 0; i < (int)rows.size(); ++i) r_act(i) = res(rows[i]);
      const Eigen::VectorXd delta =
          s_act.transpose() *
          (s_act * s_act.transpose()).ldlt().solve(r_act);
      sig_t += SymmetricTensor2::from_voigt_stress(delta);
      if (!model.has_yield_surface()) break;
      const StressInvariants iv = invariants(sig_t);
      const ElasticModuli em_c = model.moduli(iv, piv);
      const double sig_ref = std::max({iv.q, std::abs(iv.p), 1.0});
      if (model.yield(sig_t, piv, em_c.G) <= sp.ftol * sig_ref) break;
      correct_drift(model, sig_t, piv, diag, sp.ftol * sig_ref);
    }
  }

  piv.void_ratio = e_start + (1.0 + e_start) * (eps_t - state.strain).trace();
  state.set_stress(sig_t);
  state.strain = eps_t;
  state.piv = piv;
  diag.substeps = substeps;
  if (model.has_yield_surface()) {
    const ElasticModuli em_end = model.moduli(state.inv, state.piv);
    diag.f_end = model.yield(state.stress, state.piv, em_end.G);
  }
  return diag;
}

TestRecord run_test(ModelGraph& model, const TestProtocol& protocol,
                    const SubsteppingParams& sp) {
  if (protocol.n_steps < 1)
    throw std::invalid_argument("protocol needs n_steps >= 1");
  TestRecord rec;
  rec.protocol_id = protocol.id;
  rec.protocol = protocol;

  model.reset_runtime(protocol.p0, protocol.e0);
  MaterialState st = MaterialState::consolidated(protocol.p0, protocol.e0);
  const ConstraintSet cs = constraint_matrices(protocol);

  auto push = [&rec](const MaterialState& s) {
    rec.strain.push_back(s.strain);
    rec.stress.push_back(s.stress);
    rec.void_ratio.push_back(s.piv.void_ratio);
    rec.p.push_back(s.inv.p);
    rec.q.push_back(s.inv.q);
    rec.theta.push_back(s.inv.theta);
  };
  push(st);

  for (int step = 0; step < protocol.n_steps; ++step) {
    StepDiagnostics d;
    try {
      d = integrate_step(model, st, cs, sp);
    } catch (const std::exception& ex) {
      throw IntegrationError("test " + protocol.id + " failed at step " +
                             std::to_string(step + 1) + ": " + ex.what());
    }
    model.push_history(st.inv, st.piv);
    push(st);
    rec.d_eps_p.push_back(d.d_eps_p);
    rec.d_lambda.push_back(d.d_lambda);
    rec.max_r.push_back(d.max_r);
    rec.f_end.push_back(d.f_end);
  }
  return rec;
}

}  // namespace mmg
