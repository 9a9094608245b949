#include "mmg/edges.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

namespace mmg {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct IdInfo {
  EdgeId id;
  char slot;
  const char* name;
};

const IdInfo kIds[] = {
    {EdgeId::E1, 'E', "E1"},   {EdgeId::E2, 'E', "E2"},
    {EdgeId::E3, 'E', "E3"},   {EdgeId::L1, 'L', "L1"},
    {EdgeId::L2, 'L', "L2"},   {EdgeId::L3, 'L', "L3"},
    {EdgeId::L4, 'L', "L4"},   {EdgeId::L5, 'L', "L5"},
    {EdgeId::L6, 'L', "L6"},   {EdgeId::L7, 'L', "L7"},
    {EdgeId::L8, 'L', "L8"},   {EdgeId::L9, 'L', "L9"},
    {EdgeId::L10, 'L', "L10"}, {EdgeId::LNN, 'L', "L-NN"},
    {EdgeId::P1, 'P', "P1"},   {EdgeId::P2, 'P', "P2"},
    {EdgeId::P3, 'P', "P3"},   {EdgeId::P4, 'P', "P4"},
    {EdgeId::P5, 'P', "P5"},   {EdgeId::P6, 'P', "P6"},
    {EdgeId::P7, 'P', "P7"},   {EdgeId::PNN, 'P', "P-NN"},
    {EdgeId::H1, 'H', "H1"},   {EdgeId::H2, 'H', "H2"},
    {EdgeId::H3, 'H', "H3"},   {EdgeId::HNN, 'H', "H-NN"},
};

const IdInfo& info(EdgeId id) {
  for (const auto& e : kIds)
    if (e.id == id) return e;
  throw std::invalid_argument("unknown edge id");
}

std::vector<EdgeChoice> build_catalog(bool with_nn) {
  using P = ParamSpec;
  std::vector<EdgeChoice> cat;
  auto add = [&cat](EdgeId id, std::vector<ParamSpec> ps, bool ys, bool vr) {
    const auto& i = info(id);
    cat.push_back(EdgeChoice{id, i.slot, i.name, std::move(ps), ys, vr});
  };

  add(EdgeId::E1, {P{"K0", 1e4, 1e6, true}, P{"G0", 5e3, 5e5, true}}, false,
      false);
  add(EdgeId::E2,
      {P{"K0", 1e4, 1e6, true}, P{"G0", 5e3, 5e5, true}, P{"a", 0.05, 1.0}},
      false, false);
  add(EdgeId::E3, {P{"G0_dim", 20.0, 500.0, true}, P{"nu", 0.05, 0.45}}, false,
      true);

  add(EdgeId::L1, {P{"sigma_y0", 10.0, 1000.0, true}, P{"H0", 0.0, 5e4}}, true,
      false);
  add(EdgeId::L2, {P{"sigma_y0", 10.0, 1000.0, true}, P{"n_pow", 0.02, 0.9}},
      true, false);
  add(EdgeId::L3,
      {P{"sigma_y0", 10.0, 1000.0, true}, P{"H0", 0.0, 5e4},
       P{"H_inf", 0.0, 2000.0}, P{"b_voce", 1.0, 500.0, true}},
      true, false);
  add(EdgeId::L4,
      {P{"a0", 0.05, 1.5}, P{"a1", 0.0, 10.0}, P{"a2", -0.01, 0.01},
       P{"a3", 0.0, 100.0}},
      true, false);
  add(EdgeId::L5,
      {P{"a0", 0.05, 1.5}, P{"a1", 0.0, 2.0}, P{"k_hard", 1e-3, 1.0, true}},
      true, false);
  add(EdgeId::L6,
      {P{"c0", 9.05, 30.0}, P{"a1", 0.0, 500.0}, P{"a2", -0.01, 0.01},
       P{"a3", 0.0, 100.0}, P{"m_exp", 0.0, 2.0}},
      true, false);
  add(EdgeId::L7,
      {P{"rho", 0.6, 1.0}, P{"N_ns", 0.0, 0.45}, P{"Nbar_ns", 0.0, 0.45},
       P{"M_cs", 0.8, 1.8}, P{"h_ns", 20.0, 1000.0, true},
       P{"e_c0", 0.3, 1.2}, P{"lambda_cs", 0.005, 0.2, true},
       P{"a_cs", 0.1, 1.0}},
      true, true);
  add(EdgeId::L8,
      {P{"rho", 0.6, 1.0}, P{"m_cone", 0.02, 0.3}, P{"M_cs", 0.8, 1.8},
       P{"n_b", 0.5, 4.0}, P{"h_dm", 20.0, 3000.0, true}, P{"e_c0", 0.3, 1.2},
       P{"lambda_cs", 0.005, 0.2, true}, P{"a_cs", 0.1, 1.0}},
      true, true);
  add(EdgeId::L9, {P{"alpha_gp", 0.2, 0.8}, P{"M_f", 0.4, 2.0}}, false, false);
  add(EdgeId::L10,
      {P{"alpha_gp", 0.2, 0.8}, P{"M_f", 0.4, 2.0}, P{"m_f", 0.2, 10.0}},
      false, true);

  add(EdgeId::P1, {}, false, false);
  add(EdgeId::P2, {P{"beta_0", 0.0, 1.0}}, false, false);
  add(EdgeId::P3, {P{"alpha_mn", 0.1, 1.0}}, false, false);
  add(EdgeId::P4,
      {P{"rho_bar", 0.6, 1.0}, P{"M_cs", 0.8, 1.8}, P{"Nbar_ns", 0.0, 0.45}},
      false, false);
  add(EdgeId::P5,
      {P{"A_d", 0.1, 5.0}, P{"n_d", 0.5, 4.0}, P{"rho", 0.6, 1.0},
       P{"m_cone", 0.02, 0.3}, P{"M_cs", 0.8, 1.8}, P{"e_c0", 0.3, 1.2},
       P{"lambda_cs", 0.005, 0.2, true}, P{"a_cs", 0.1, 1.0}},
      false, true);
  add(EdgeId::P6, {P{"M_g", 0.4, 2.0}, P{"alpha_gp", 0.2, 0.8}}, false, false);
  add(EdgeId::P7,
      {P{"M_g", 0.4, 2.0}, P{"m_g", 0.2, 10.0}, P{"e_c0", 0.3, 1.2},
       P{"lambda_cs", 0.005, 0.2, true}, P{"a_cs", 0.1, 1.0},
       P{"alpha_gp", 0.2, 0.8}},
      false, true);

  add(EdgeId::H1, {}, false, false);
  add(EdgeId::H2,
      {P{"H0", 5.0, 2e4, true}, P{"alpha_f", 0.2, 0.8},
       P{"beta_0", 0.5, 50.0, true}, P{"beta_1", 0.0, 10.0},
       P{"M_f", 0.4, 2.0}, P{"M_g", 0.4, 2.0}},
      false, false);
  add(EdgeId::H3,
      {P{"H_L0", 5.0, 2e4, true}, P{"m_0", 0.0, 10.0}, P{"m_b", 0.2, 10.0},
       P{"alpha_f", 0.2, 0.8}, P{"M_f", 0.4, 2.0}, P{"M_g", 0.4, 2.0},
       P{"e_c0", 0.3, 1.2}, P{"lambda_cs", 0.005, 0.2, true},
       P{"a_cs", 0.1, 1.0}},
      false, true);

  if (with_nn) {
    add(EdgeId::LNN, {}, false, false);
    add(EdgeId::PNN, {}, false, false);
    add(EdgeId::HNN, {}, false, false);
  }
  return cat;
}

double floored_p(double p) { return std::min(p, -0.1); }

}  // namespace

char edge_slot(EdgeId id) { return info(id).slot; }
const std::string& edge_name(EdgeId id) {
  static std::map<EdgeId, std::string> names = [] {
    std::map<EdgeId, std::string> m;
    for (const auto& e : kIds) m[e.id] = e.name;
    return m;
  }();
  return names.at(id);
}

std::optional<EdgeId> edge_from_name(const std::string& name) {
  for (const auto& e : kIds)
    if (name == e.name) return e.id;
  return std::nullopt;
}

const std::vector<EdgeChoice>& edge_catalog(bool with_nn) {
  static const std::vector<EdgeChoice> full = build_catalog(true);
  static const std::vector<EdgeChoice> no_nn = build_catalog(false);
  return with_nn ? full : no_nn;
}

const EdgeChoice& edge_choice(EdgeId id) {
  for (const auto& c : edge_catalog(true))
    if (c.id == id) return c;
  throw std::invalid_argument("unknown edge id");
}

void ParameterVector::set(const std::string& name, double value) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) {
      values_[i] = value;
      return;
    }
  names_.push_back(name);
  values_.push_back(value);
}

double ParameterVector::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return values_[i];
  throw std::out_of_range("parameter not set: " + name);
}

bool ParameterVector::has(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

void ParameterVector::merge(const ParameterVector& other) {
  for (std::size_t i = 0; i < other.size(); ++i)
    if (!has(other.name(i))) set(other.name(i), other.value(i));
}

namespace edges {

ElasticModuli eval_e1(double K0, double G0) {
  if (!(K0 > 0.0) || !(G0 > 0.0))
    throw std::invalid_argument("elastic moduli must be positive");
  return {K0, G0, false};
}

ElasticModuli eval_e2(double K0, double G0, double a, double p) {
  if (!(K0 > 0.0) || !(G0 > 0.0))
    throw std::invalid_argument("elastic moduli must be positive");
  const bool degenerate = p > -0.1;
  const double ratio = floored_p(p) / kAtmosphericPressure;
  const double scale = std::pow(ratio, a);
  return {K0 * scale, G0 * scale, degenerate};
}

ElasticModuli eval_e3(double G0_dim, double nu, double p, double e) {
  const bool degenerate = p > -0.1;
  const double ratio = floored_p(p) / kAtmosphericPressure;
  const double G = G0_dim * std::abs(kAtmosphericPressure) *
                   (2.97 - e) * (2.97 - e) / (1.0 + e) * std::sqrt(ratio);
  const double K = 2.0 * (1.0 + nu) / (3.0 * (1.0 - 2.0 * nu)) * G;
  if (!(K > 0.0) || !(G > 0.0))
    throw std::invalid_argument("degenerate E3 moduli");
  return {K, G, degenerate};
}

SymmetricTensor2 dq_dsigma(const EvalArgs& a) {
  const SymmetricTensor2 s = a.stress.deviator();
  const double q_tol = 1e-10 * std::max(std::abs(a.inv.p), 1.0);
  if (a.inv.q > q_tol) return s * (1.5 / a.inv.q);
  if (a.dev_hint) return *a.dev_hint * std::sqrt(1.5);
  return SymmetricTensor2::zero();
}

SymmetricTensor2 unit_deviator(const EvalArgs& a) {
  const SymmetricTensor2 s = a.stress.deviator();
  const double n = s.norm();
  const double q_tol = 1e-10 * std::max(std::abs(a.inv.p), 1.0);
  if (a.inv.q > q_tol && n > 0.0) return s * (1.0 / n);
  if (a.dev_hint) return *a.dev_hint;
  return SymmetricTensor2::zero();
}

double lode_shape(double theta, double rho) {
  return ((1.0 + rho) + (1.0 - rho) * std::cos(3.0 * (theta + kPi / 6.0))) /
         (2.0 * rho);
}

double lode_shape_dtheta(double theta, double rho) {
  return -3.0 * (1.0 - rho) * std::sin(3.0 * (theta + kPi / 6.0)) / (2.0 * rho);
}

double state_parameter(double e, double e_c0, double lambda_cs, double a_cs,
                       double p) {
  const double ratio = floored_p(p) / kAtmosphericPressure;
  return e - e_c0 + lambda_cs * std::pow(ratio, a_cs);
}

double l2_yield_stress(double sigma_y0, double n_pow, double G,
                       double eps_p_bar) {
  if (!(G > 0.0))
    throw std::invalid_argument("L2 yield stress needs the shear modulus");
  const double c = 3.0 * G * eps_p_bar / sigma_y0;
  auto g = [&](double x) { return x - std::pow(x + c, n_pow); };
  double lo = 1.0, hi = 2.0 + c;
  const double glo = g(lo), ghi = g(hi);
  if (std::abs(glo) < 1e-14) return sigma_y0;
  if (glo > 0.0 || ghi < 0.0)
    throw BracketError("L2 power-law root not bracketed (sigma_y0=" +
                       std::to_string(sigma_y0) + ", n=" +
                       std::to_string(n_pow) + ", G=" + std::to_string(G) +
                       ", eps_p_bar=" + std::to_string(eps_p_bar) + ")");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-10 * hi) break;
  }
  return sigma_y0 * 0.5 * (lo + hi);
}

namespace {

// Drucker-Prager friction coefficient and its derivatives.
struct DpAlpha {
  double alpha;
  double d_epb;  // d alpha / d eps_p_bar
  double d_p;    // d alpha / d p
};

DpAlpha dp_alpha(EdgeId l, const ParameterVector& prm, double p, double epb) {
  if (l == EdgeId::L4) {
    const double a0 = prm.get("a0"), a1 = prm.get("a1"), a2 = prm.get("a2"),
                 a3 = prm.get("a3");
    const double ex = std::exp(a2 * p - a3 * epb);
    return {a0 + a1 * epb * ex, a1 * ex * (1.0 - a3 * epb), a1 * epb * a2 * ex};
  }
  if (l == EdgeId::L5) {
    const double a0 = prm.get("a0"), a1 = prm.get("a1"), k = prm.get("k_hard");
    const double eb = std::max(epb, 1e-12);
    const double sq = std::sqrt(k * eb);
    const double alpha = a0 + 2.0 * a1 * std::sqrt(k * epb) / (k + epb);
    const double d_epb = a1 * k * (k - eb) / (sq * (k + eb) * (k + eb));
    return {alpha, d_epb, 0.0};
  }
  throw std::invalid_argument("dp_alpha needs L4 or L5");
}

// Matsuoka-Nakai invariants of the (tension-positive) stress tensor.
struct MnInvariants {
  double i1, i2, i3;
  SymmetricTensor2 di1, di2, di3;
};

MnInvariants mn_invariants(const SymmetricTensor2& sig) {
  MnInvariants r;
  r.i1 = sig.trace();
  r.i2 = 0.5 * (r.i1 * r.i1 - sig.ddot(sig));
  r.i3 = sig.full().determinant();
  r.di1 = SymmetricTensor2::identity();
  r.di2 = SymmetricTensor2::identity() * r.i1 - sig;
  r.di3 = sig.square() - sig * r.i1 + SymmetricTensor2::identity() * r.i2;
  return r;
}

double cbrt_sq_inv(double u) {
  // 1 / cbrt(u)^2, guarded away from zero.
  const double c = std::cbrt(u);
  const double c2 = std::max(c * c, 1e-30);
  return 1.0 / c2;
}

struct MnK {
  double k;       // k1 or k2
  double dk_di1;  // partial derivative w.r.t. I1
  double dk_depb;
};

MnK mn_k(const ParameterVector& prm, double coupling, double i1, double epb) {
  const double c0 = prm.get("c0"), a1 = prm.get("a1"), a2 = prm.get("a2"),
               a3 = prm.get("a3"), m = prm.get("m_exp");
  const double i1_eff = std::min(i1, -1e-6);
  const double kappa1 = a1 * epb * std::exp(a2 * i1_eff - a3 * epb);
  const double pw = std::pow(kAtmosphericPressure / i1_eff, m);
  MnK r;
  r.k = c0 + coupling * kappa1 * pw;
  r.dk_di1 = coupling * (a2 - m / i1_eff) * kappa1 * pw;
  r.dk_depb = coupling * pw * a1 * std::exp(a2 * i1_eff - a3 * epb) *
              (1.0 - a3 * epb);
  return r;
}

// Nor-Sand stress-ratio function eta(p, p_i) and the bits needed for the
// gradient and the consistency chain.
struct NsEta {
  double eta;
  double d_etap_dp;  // d(eta p)/dp at fixed p_i
  double d_eta_dpi;
};

NsEta ns_eta(double M, double N, double p, double p_i) {
  const double pe = std::min(p, -1e-6);
  const double pi = std::min(p_i, -1e-6);
  NsEta r;
  if (N < 1e-9) {
    r.eta = M * (1.0 + std::log(pi / pe));
    r.d_etap_dp = r.eta - M;
    r.d_eta_dpi = M / pi;
  } else {
    const double w = std::pow(pe / pi, N / (1.0 - N));
    r.eta = (M / N) * (1.0 - (1.0 - N) * w);
    r.d_etap_dp = r.eta - M * w;
    r.d_eta_dpi = M * w / pi;
  }
  return r;
}

double ns_image_target(const ParameterVector& prm, double p, double p_i,
                       double e) {
  const double M = prm.get("M_cs"), N = prm.get("N_ns"),
               Nb = prm.get("Nbar_ns");
  const double abar = -3.5 * (1.0 - Nb) / (1.0 - N);
  const double psi_i = state_parameter(e, prm.get("e_c0"),
                                       prm.get("lambda_cs"), prm.get("a_cs"),
                                       p_i);
  const double pe = std::min(p, -1e-6);
  if (N < 1e-9 && Nb < 1e-9) return pe * std::exp(abar * psi_i / M);
  const double base = std::max(1.0 - abar * psi_i * N / M, 1e-6);
  return pe * std::pow(base, (N - 1.0) / N);
}

// Dafalias cone quantities shared by L8 and P5.
struct ConeState {
  SymmetricTensor2 r;      // s - p*alpha
  SymmetricTensor2 n_hat;  // unit direction of (s/p - alpha)
  double psi;
  double zeta;
};

ConeState cone_state(const ParameterVector& prm, const EvalArgs& a) {
  ConeState cs;
  const SymmetricTensor2 s = a.stress.deviator();
  const double p = std::min(a.inv.p, -1e-6);
  cs.r = s - a.edge_state.back_stress * a.inv.p;
  SymmetricTensor2 nd = s * (1.0 / p) - a.edge_state.back_stress;
  const double nn = nd.norm();
  if (nn > 1e-14) {
    cs.n_hat = nd * (1.0 / nn);
  } else if (a.dev_hint) {
    // At the cone axis the ratio direction comes from the trial increment;
    // the sign flip mirrors s/p with p < 0.
    cs.n_hat = *a.dev_hint * -1.0;
  } else {
    cs.n_hat = SymmetricTensor2::zero();
  }
  cs.psi = state_parameter(a.piv.void_ratio, prm.get("e_c0"),
                           prm.get("lambda_cs"), prm.get("a_cs"), a.inv.p);
  cs.zeta = lode_shape(a.inv.theta, prm.get("rho"));
  return cs;
}

SymmetricTensor2 cone_alpha_target(const ParameterVector& prm,
                                   const ConeState& cs, double exp_sign) {
  const double M = prm.get("M_cs"), m = prm.get("m_cone");
  const double n_exp = exp_sign < 0.0 ? prm.get("n_b") : prm.get("n_d");
  const double mag =
      std::sqrt(2.0 / 3.0) *
      (M / cs.zeta * std::exp(exp_sign * n_exp * cs.psi) - m);
  return cs.n_hat * mag;
}

}  // namespace

double yield_value(EdgeId l, const ParameterVector& prm, const EvalArgs& a) {
  const double q = a.inv.q, p = a.inv.p, epb = a.piv.eps_p_bar;
  switch (l) {
    case EdgeId::L1:
      return q - (prm.get("sigma_y0") + prm.get("H0") * epb);
    case EdgeId::L2:
      return q - l2_yield_stress(prm.get("sigma_y0"), prm.get("n_pow"), a.G,
                                 epb);
    case EdgeId::L3:
      return q - (prm.get("sigma_y0") + prm.get("H0") * epb +
                  prm.get("H_inf") *
                      (1.0 - std::exp(-prm.get("b_voce") * epb)));
    case EdgeId::L4:
    case EdgeId::L5:
      return q + dp_alpha(l, prm, p, epb).alpha * p;
    case EdgeId::L6: {
      const MnInvariants mi = mn_invariants(a.stress);
      const MnK k1 = mn_k(prm, 1.0, mi.i1, epb);
      return std::cbrt(k1.k * mi.i3) - std::cbrt(mi.i1 * mi.i2);
    }
    case EdgeId::L7: {
      const NsEta ne = ns_eta(prm.get("M_cs"), prm.get("N_ns"), p,
                              a.edge_state.p_image);
      return lode_shape(a.inv.theta, prm.get("rho")) * q + ne.eta * p;
    }
    case EdgeId::L8: {
      const ConeState cs = cone_state(prm, a);
      return cs.r.norm() + std::sqrt(2.0 / 3.0) * p * prm.get("m_cone");
    }
    default:
      throw std::invalid_argument("no yield surface for " + edge_name(l));
  }
}

double yield_dq_sensitivity(EdgeId l, const ParameterVector& prm,
                            const EvalArgs& a) {
  switch (l) {
    case EdgeId::L1:
    case EdgeId::L2:
    case EdgeId::L3:
    case EdgeId::L4:
    case EdgeId::L5:
      return 1.0;
    case EdgeId::L7:
      return lode_shape(a.inv.theta, prm.get("rho"));
    default:
      return 0.0;  // caller falls back to iterative correction
  }
}

SymmetricTensor2 yield_gradient(EdgeId l, const ParameterVector& prm,
                                const EvalArgs& a) {
  const SymmetricTensor2 third = SymmetricTensor2::identity() * (1.0 / 3.0);
  const double p = a.inv.p, epb = a.piv.eps_p_bar;
  switch (l) {
    case EdgeId::L1:
    case EdgeId::L2:
    case EdgeId::L3:
      return dq_dsigma(a);
    case EdgeId::L4:
    case EdgeId::L5: {
      const DpAlpha da = dp_alpha(l, prm, p, epb);
      return dq_dsigma(a) + third * (da.alpha + p * da.d_p);
    }
    case EdgeId::L6: {
      const MnInvariants mi = mn_invariants(a.stress);
      const MnK k1 = mn_k(prm, 1.0, mi.i1, epb);
      const double ca = cbrt_sq_inv(k1.k * mi.i3) / 3.0;
      const double cb = cbrt_sq_inv(mi.i1 * mi.i2) / 3.0;
      SymmetricTensor2 ga = (mi.di1 * (mi.i3 * k1.dk_di1) + mi.di3 * k1.k) * ca;
      SymmetricTensor2 gb = (mi.di1 * mi.i2 + mi.di2 * mi.i1) * cb;
      return ga - gb;
    }
    case EdgeId::L7: {
      const double zeta = lode_shape(a.inv.theta, prm.get("rho"));
      const double dz = lode_shape_dtheta(a.inv.theta, prm.get("rho"));
      const NsEta ne = ns_eta(prm.get("M_cs"), prm.get("N_ns"), p,
                              a.edge_state.p_image);
      return dq_dsigma(a) * zeta + lode_angle_gradient(a.stress) * (a.inv.q * dz) +
             third * ne.d_etap_dp;
    }
    case EdgeId::L8: {
      const ConeState cs = cone_state(prm, a);
      const double rn = cs.r.norm();
      SymmetricTensor2 rhat =
          rn > 1e-14 ? cs.r * (1.0 / rn) : cs.n_hat * -1.0;
      const double vol = std::sqrt(2.0 / 3.0) * prm.get("m_cone") -
                         rhat.ddot(a.edge_state.back_stress);
      return rhat + third * vol;
    }
    default:
      throw std::invalid_argument("no yield surface for " + edge_name(l));
  }
}

double yield_lambda_chain(EdgeId l, const ParameterVector& prm,
                          const EvalArgs& a, const SymmetricTensor2& m_flow) {
  const double p = a.inv.p, epb = a.piv.eps_p_bar;
  switch (l) {
    case EdgeId::L1:
      return -prm.get("H0");
    case EdgeId::L2: {
      const double sy0 = prm.get("sigma_y0"), n = prm.get("n_pow");
      const double sy = l2_yield_stress(sy0, n, a.G, epb);
      const double c = 3.0 * a.G * epb / sy0;
      const double x = sy / sy0;
      const double d = n * std::pow(x + c, n - 1.0);
      const double denom = std::max(1.0 - d, 1e-10);
      return -3.0 * a.G * d / denom;
    }
    case EdgeId::L3:
      return -(prm.get("H0") + prm.get("H_inf") * prm.get("b_voce") *
                                   std::exp(-prm.get("b_voce") * epb));
    case EdgeId::L4:
    case EdgeId::L5:
      return p * dp_alpha(l, prm, p, epb).d_epb;
    case EdgeId::L6: {
      const MnInvariants mi = mn_invariants(a.stress);
      const MnK k1 = mn_k(prm, 1.0, mi.i1, epb);
      return cbrt_sq_inv(k1.k * mi.i3) / 3.0 * mi.i3 * k1.dk_depb;
    }
    case EdgeId::L7: {
      const NsEta ne = ns_eta(prm.get("M_cs"), prm.get("N_ns"), p,
                              a.edge_state.p_image);
      const double pi_star = ns_image_target(prm, a.inv.p,
                                             a.edge_state.p_image,
                                             a.piv.void_ratio);
      const double dpi_dl = -std::sqrt(2.0 / 3.0) * prm.get("h_ns") *
                            (a.edge_state.p_image - pi_star) *
                            m_flow.deviator().norm();
      return p * ne.d_eta_dpi * dpi_dl;
    }
    case EdgeId::L8: {
      const ConeState cs = cone_state(prm, a);
      const double rn = cs.r.norm();
      SymmetricTensor2 rhat =
          rn > 1e-14 ? cs.r * (1.0 / rn) : cs.n_hat * -1.0;
      const SymmetricTensor2 ab = cone_alpha_target(prm, cs, -1.0);
      const SymmetricTensor2 dadl =
          (ab - a.edge_state.back_stress) * (2.0 / 3.0 * prm.get("h_dm"));
      return -p * rhat.ddot(dadl);
    }
    default:
      throw std::invalid_argument("no yield surface for " + edge_name(l));
  }
}

SymmetricTensor2 potential_gradient(EdgeId pslot, EdgeId l,
                                    const ParameterVector& prm,
                                    const EvalArgs& a) {
  const SymmetricTensor2 third = SymmetricTensor2::identity() * (1.0 / 3.0);
  switch (pslot) {
    case EdgeId::P1:
      return dq_dsigma(a);
    case EdgeId::P2: {
      // beta = alpha - beta_0 inherits alpha's pressure dependence, which
      // keeps (L4, P2 at beta_0 = 0) exactly associative.
      const DpAlpha da = dp_alpha(l, prm, a.inv.p, a.piv.eps_p_bar);
      return dq_dsigma(a) +
             third * (da.alpha - prm.get("beta_0") + a.inv.p * da.d_p);
    }
    case EdgeId::P3: {
      const MnInvariants mi = mn_invariants(a.stress);
      const MnK k2 = mn_k(prm, prm.get("alpha_mn"), mi.i1, a.piv.eps_p_bar);
      const double ca = cbrt_sq_inv(k2.k * mi.i3) / 3.0;
      const double cb = cbrt_sq_inv(mi.i1 * mi.i2) / 3.0;
      SymmetricTensor2 ga = (mi.di1 * (mi.i3 * k2.dk_di1) + mi.di3 * k2.k) * ca;
      SymmetricTensor2 gb = (mi.di1 * mi.i2 + mi.di2 * mi.i1) * cb;
      return ga - gb;
    }
    case EdgeId::P4: {
      // The free image pressure puts the potential through the current
      // stress point, so eta_bar is read off the state directly.
      const double rho_bar = prm.get("rho_bar");
      const double M = prm.get("M_cs"), Nb = prm.get("Nbar_ns");
      const double zeta = lode_shape(a.inv.theta, rho_bar);
      const double dz = lode_shape_dtheta(a.inv.theta, rho_bar);
      const double pe = std::min(a.inv.p, -1e-6);
      const double eta_bar = -zeta * a.inv.q / pe;
      double detap_dp;
      if (Nb < 1e-9) {
        detap_dp = eta_bar - M;
      } else {
        const double w = (1.0 - eta_bar * Nb / M) / (1.0 - Nb);
        detap_dp = eta_bar - M * w;
      }
      return dq_dsigma(a) * zeta +
             lode_angle_gradient(a.stress) * (a.inv.q * dz) + third * detap_dp;
    }
    default:
      throw std::invalid_argument("no plastic potential for " +
                                  edge_name(pslot));
  }
}

SymmetricTensor2 gp_direction(double d, const EvalArgs& a) {
  const double den = std::sqrt(1.0 + d * d);
  const double nv = d / den;
  const double ns = 1.0 / den;
  // Conjugate (p, q) basis with the volumetric leg oriented so that
  // compressive loading projects positively; tension-positive convention.
  SymmetricTensor2 t = SymmetricTensor2::identity() * (-nv / 3.0) +
                       dq_dsigma(a) * ns;
  const double n = t.norm();
  if (n < 1e-12)
    throw ApexError("generalized-plasticity direction undefined at this state");
  return t * (1.0 / n);
}

void advance_edge_state(EdgeId l, const ParameterVector& prm, EdgeState& es,
                        const EvalArgs& before, const SymmetricTensor2& d_eps_p,
                        double d_lambda) {
  if (l == EdgeId::L7) {
    const double pi_star = ns_image_target(prm, before.inv.p, es.p_image,
                                           before.piv.void_ratio);
    es.p_image += -std::sqrt(2.0 / 3.0) * prm.get("h_ns") *
                  (es.p_image - pi_star) * d_eps_p.deviator().norm();
    es.p_image = std::min(es.p_image, -1e-6);
  } else if (l == EdgeId::L8) {
    const ConeState cs = cone_state(prm, before);
    const SymmetricTensor2 ab = cone_alpha_target(prm, cs, -1.0);
    es.back_stress +=
        (ab - es.back_stress) * (2.0 / 3.0 * prm.get("h_dm") * d_lambda);
  }
}

namespace {

SymmetricTensor2 normalize_with_apex_retry(
    const std::function<SymmetricTensor2(const SymmetricTensor2&)>& grad_at,
    const SymmetricTensor2& stress, double p) {
  SymmetricTensor2 g = grad_at(stress);
  double n = g.norm();
  if (n >= 1e-10) return g * (1.0 / n);
  // Cone apex: nudge along the hydrostatic axis and retry once.
  const double delta = 1e-8 * std::max(std::abs(p), 1.0);
  SymmetricTensor2 nudged = stress - SymmetricTensor2::identity() * delta;
  g = grad_at(nudged);
  n = g.norm();
  if (n >= 1e-10) return g * (1.0 / n);
  throw ApexError("vanishing surface gradient at stress apex");
}

}  // namespace

}  // namespace edges

ElasticModuli eval_elastic_moduli(EdgeId choice, const ParameterVector& params,
                                  const StressInvariants& inv,
                                  const PlasticInternalVariables& piv) {
  switch (choice) {
    case EdgeId::E1:
      return edges::eval_e1(params.get("K0"), params.get("G0"));
    case EdgeId::E2:
      return edges::eval_e2(params.get("K0"), params.get("G0"),
                            params.get("a"), inv.p);
    case EdgeId::E3:
      return edges::eval_e3(params.get("G0_dim"), params.get("nu"), inv.p,
                            piv.void_ratio);
    default:
      throw std::invalid_argument("not an elasticity edge");
  }
}

double eval_yield(EdgeId choice, const ParameterVector& params,
                  const SymmetricTensor2& stress,
                  const PlasticInternalVariables& piv, const EdgeState& es,
                  double G) {
  const StressInvariants inv = invariants(stress);
  EvalArgs a{stress, inv, piv, es, G, nullptr};
  return edges::yield_value(choice, params, a);
}

SymmetricTensor2 eval_loading_direction(EdgeId choice,
                                        const ParameterVector& params,
                                        const SymmetricTensor2& stress,
                                        const PlasticInternalVariables& piv,
                                        const EdgeState& es,
                                        const SymmetricTensor2* dev_hint,
                                        double G) {
  const StressInvariants inv = invariants(stress);
  EvalArgs a{stress, inv, piv, es, G, dev_hint};
  switch (choice) {
    case EdgeId::L9: {
      const double pe = std::min(inv.p, -1e-6);
      const double d = (1.0 + params.get("alpha_gp")) *
                       (params.get("M_f") + inv.q / pe);
      return edges::gp_direction(d, a);
    }
    case EdgeId::L10: {
      const double pe = std::min(inv.p, -1e-6);
      const double d = (1.0 + params.get("alpha_gp")) *
                       (params.get("M_f") *
                            std::exp(params.get("m_f") *
                                     (1.0 - piv.void_ratio)) +
                        inv.q / pe);
      return edges::gp_direction(d, a);
    }
    case EdgeId::LNN:
      throw std::invalid_argument(
          "L-NN loading direction requires a trained regressor");
    default:
      break;
  }
  auto grad_at = [&](const SymmetricTensor2& s) {
    const StressInvariants si = invariants(s);
    EvalArgs aa{s, si, piv, es, G, dev_hint};
    return edges::yield_gradient(choice, params, aa);
  };
  return edges::normalize_with_apex_retry(grad_at, stress, inv.p);
}

SymmetricTensor2 eval_flow_direction(EdgeId choice, EdgeId l_choice,
                                     const ParameterVector& params,
                                     const SymmetricTensor2& stress,
                                     const PlasticInternalVariables& piv,
                                     const EdgeState& es,
                                     const SymmetricTensor2* dev_hint) {
  const StressInvariants inv = invariants(stress);
  EvalArgs a{stress, inv, piv, es, 0.0, dev_hint};
  switch (choice) {
    case EdgeId::P1:
    case EdgeId::P2:
    case EdgeId::P3:
    case EdgeId::P4: {
      auto grad_at = [&](const SymmetricTensor2& s) {
        const StressInvariants si = invariants(s);
        EvalArgs aa{s, si, piv, es, 0.0, dev_hint};
        return edges::potential_gradient(choice, l_choice, params, aa);
      };
      return edges::normalize_with_apex_retry(grad_at, stress, inv.p);
    }
    case EdgeId::P5: {
      const edges::ConeState cs = edges::cone_state(params, a);
      if (cs.n_hat.norm() < 1e-12)
        throw ApexError("cone flow direction undefined at this state");
      const double rho = params.get("rho");
      const double cos3t = std::cos(3.0 * (inv.theta + kPi / 6.0));
      const double B = 1.0 + 1.5 * (1.0 - rho) / (rho * cs.zeta) * cos3t;
      const double C = 3.0 * std::sqrt(1.5) * (1.0 - rho) / (rho * cs.zeta);
      const SymmetricTensor2 ad = edges::cone_alpha_target(params, cs, 1.0);
      const double D = params.get("A_d") *
                       (ad - es.back_stress).ddot(cs.n_hat);
      const SymmetricTensor2 n2 = cs.n_hat.square();
      const SymmetricTensor2 n2dev =
          n2 - SymmetricTensor2::identity() * (n2.trace() / 3.0);
      // Deviatoric flow along -n and contraction for positive D under the
      // tension-positive convention.
      SymmetricTensor2 raw = cs.n_hat * (-B) + n2dev * C -
                             SymmetricTensor2::identity() * (D / 3.0);
      const double n = raw.norm();
      if (n < 1e-12)
        throw ApexError("cone flow direction degenerate");
      return raw * (1.0 / n);
    }
    case EdgeId::P6: {
      const double pe = std::min(inv.p, -1e-6);
      const double d = (1.0 + params.get("alpha_gp")) *
                       (params.get("M_g") + inv.q / pe);
      return edges::gp_direction(d, a);
    }
    case EdgeId::P7: {
      const double pe = std::min(inv.p, -1e-6);
      const double psi = edges::state_parameter(
          piv.void_ratio, params.get("e_c0"), params.get("lambda_cs"),
          params.get("a_cs"), inv.p);
      const double d = (1.0 + params.get("alpha_gp")) *
                       (params.get("M_g") * std::exp(params.get("m_g") * psi) +
                        inv.q / pe);
      return edges::gp_direction(d, a);
    }
    case EdgeId::PNN:
      throw std::invalid_argument(
          "P-NN flow direction requires a trained regressor");
    default:
      throw std::invalid_argument("not a flow-direction edge");
  }
  throw std::logic_error("unreachable");
}

double eval_hardening_modulus(EdgeId choice, EdgeId l_choice,
                              const ParameterVector& params,
                              const SymmetricTensor2& stress,
                              const PlasticInternalVariables& piv,
                              const SymmetricTensor2& m_flow,
                              const EdgeState& es, double G) {
  const StressInvariants inv = invariants(stress);
  EvalArgs a{stress, inv, piv, es, G, nullptr};
  switch (choice) {
    case EdgeId::H1: {
      const SymmetricTensor2 grad =
          edges::yield_gradient(l_choice, params, a);
      const double gn = grad.norm();
      if (gn < 1e-10)
        throw ApexError("H1 undefined at vanishing surface gradient");
      const double chain =
          edges::yield_lambda_chain(l_choice, params, a, m_flow);
      return -chain / gn;
    }
    case EdgeId::H2: {
      const double pe = std::min(inv.p, -1e-6);
      const double eta_f = inv.q / (pe * params.get("M_f"));
      const double af = params.get("alpha_f");
      const double hf = std::pow(1.0 + eta_f * af / (1.0 + af), 4.0);
      const double hv = 1.0 + inv.q / (pe * params.get("M_g"));
      const double hs = params.get("beta_0") * params.get("beta_1") *
                        std::exp(-params.get("beta_0") * piv.eps_p_s);
      return params.get("H0") * (-pe) * hf * (hv + hs);
    }
    case EdgeId::H3: {
      const double pe = std::min(inv.p, -1e-6);
      const double psi = edges::state_parameter(
          piv.void_ratio, params.get("e_c0"), params.get("lambda_cs"),
          params.get("a_cs"), inv.p);
      const double mb = params.get("M_g") * std::exp(-params.get("m_b") * psi);
      const double eta_f = inv.q / (pe * params.get("M_f"));
      const double af = params.get("alpha_f");
      const double hf = std::pow(1.0 + eta_f * af / (1.0 + af), 4.0);
      const double h0 =
          params.get("H_L0") * std::exp(params.get("m_0") *
                                        (1.0 - piv.void_ratio));
      return h0 * std::sqrt(pe / edges::kAtmosphericPressure) * hf *
             (1.0 + inv.q / (pe * mb));
    }
    case EdgeId::HNN:
      throw std::invalid_argument(
          "H-NN hardening modulus requires a trained regressor");
    default:
      throw std::invalid_argument("not a hardening edge");
  }
}

}  // namespace mmg
