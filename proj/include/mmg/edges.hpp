#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmg/state.hpp"
#include "mmg/tensor.hpp"

namespace mmg {

/// Catalog identifiers for the four component slots: elasticity (E),
/// loading direction (L), plastic flow direction (P), hardening modulus (H).
enum class EdgeId {
  E1, E2, E3,
  L1, L2, L3, L4, L5, L6, L7, L8, L9, L10, LNN,
  P1, P2, P3, P4, P5, P6, P7, PNN,
  H1, H2, H3, HNN,
};

char edge_slot(EdgeId id);
const std::string& edge_name(EdgeId id);
std::optional<EdgeId> edge_from_name(const std::string& name);

struct ParamSpec {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
};

struct EdgeChoice {
  EdgeId id;
  char slot;
  std::string name;
  std::vector<ParamSpec> params;  // parameters this edge declares
  bool requires_yield_surface = false;
  bool requires_void_ratio = false;
};

/// Full edge catalog; NN regressor edges included unless disabled.
const std::vector<EdgeChoice>& edge_catalog(bool with_nn = true);
const EdgeChoice& edge_choice(EdgeId id);

/// Ordered list of named real parameter values.
class ParameterVector {
 public:
  void set(const std::string& name, double value);
  double get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  double value(std::size_t i) const { return values_[i]; }
  double& value(std::size_t i) { return values_[i]; }

  /// Merges another vector; existing names keep their first value.
  void merge(const ParameterVector& other);

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
};

/// Private evolving state owned by the stateful surface edges.
struct EdgeState {
  double p_image = 0.0;          // Nor-Sand image pressure (L7/P4)
  SymmetricTensor2 back_stress;  // cone back-stress ratio (L8/P5)
};

struct ElasticModuli {
  double K = 0.0;  // kPa
  double G = 0.0;  // kPa
  bool degenerate_state = false;  // p floored for a pressure-dependent law
};

/// Everything an edge formula may read at one material state.
struct EvalArgs {
  const SymmetricTensor2& stress;
  const StressInvariants& inv;
  const PlasticInternalVariables& piv;
  const EdgeState& edge_state;
  double G = 0.0;  // current elastic shear modulus (used by L2)
  /// Unit deviator fallback used when the stress deviator vanishes and a
  /// deviatoric direction is still needed (supplied from the trial
  /// increment by the integrator).
  const SymmetricTensor2* dev_hint = nullptr;
};

struct ApexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace edges {

constexpr double kAtmosphericPressure = -100.0;  // kPa

// -------- elasticity --------
ElasticModuli eval_e1(double K0, double G0);
ElasticModuli eval_e2(double K0, double G0, double a, double p);
ElasticModuli eval_e3(double G0_dim, double nu, double p, double e);

// -------- yield surfaces (gradient-based loading directions) --------
// Each surface provides the scalar value f, the stress gradient df/dsigma,
// and the consistency chain d f / d lambda at fixed stress (for H1).

double yield_value(EdgeId l, const ParameterVector& p, const EvalArgs& a);
SymmetricTensor2 yield_gradient(EdgeId l, const ParameterVector& p,
                                const EvalArgs& a);
double yield_lambda_chain(EdgeId l, const ParameterVector& p,
                          const EvalArgs& a, const SymmetricTensor2& m_flow);

// df/dq at fixed (p, theta, internal variables); used by drift correction.
double yield_dq_sensitivity(EdgeId l, const ParameterVector& p,
                            const EvalArgs& a);

// -------- plastic potentials (gradient-based flow directions) --------
SymmetricTensor2 potential_gradient(EdgeId pslot, EdgeId l,
                                    const ParameterVector& p,
                                    const EvalArgs& a);

// -------- direct (generalized-plasticity) directions --------
SymmetricTensor2 gp_direction(double d, const EvalArgs& a);

// Solves the implicit power-law yield stress of L2.
double l2_yield_stress(double sigma_y0, double n_pow, double G, double eps_p_bar);

// State parameter psi = e - e_c0 + lambda_cs (p/p_at)^a_cs.
double state_parameter(double e, double e_c0, double lambda_cs, double a_cs,
                       double p);

// Lode shape function and its theta derivative.
double lode_shape(double theta, double rho);
double lode_shape_dtheta(double theta, double rho);

// d q / d sigma with the vanishing-deviator convention (zero or dev hint).
SymmetricTensor2 dq_dsigma(const EvalArgs& a);
// Unit deviator direction with the same convention.
SymmetricTensor2 unit_deviator(const EvalArgs& a);

// Internal-state evolution for the stateful edges, applied once per
// accepted substep.
void advance_edge_state(EdgeId l, const ParameterVector& p, EdgeState& es,
                        const EvalArgs& before, const SymmetricTensor2& d_eps_p,
                        double d_lambda);

}  // namespace edges

// -------- spec-level operations over the catalog --------

ElasticModuli eval_elastic_moduli(EdgeId choice, const ParameterVector& params,
                                  const StressInvariants& inv,
                                  const PlasticInternalVariables& piv);

double eval_yield(EdgeId choice, const ParameterVector& params,
                  const SymmetricTensor2& stress,
                  const PlasticInternalVariables& piv,
                  const EdgeState& es = {}, double G = 0.0);

SymmetricTensor2 eval_loading_direction(EdgeId choice,
                                        const ParameterVector& params,
                                        const SymmetricTensor2& stress,
                                        const PlasticInternalVariables& piv,
                                        const EdgeState& es = {},
                                        const SymmetricTensor2* dev_hint = nullptr,
                                        double G = 0.0);

SymmetricTensor2 eval_flow_direction(EdgeId choice, EdgeId l_choice,
                                     const ParameterVector& params,
                                     const SymmetricTensor2& stress,
                                     const PlasticInternalVariables& piv,
                                     const EdgeState& es = {},
                                     const SymmetricTensor2* dev_hint = nullptr);

double eval_hardening_modulus(EdgeId choice, EdgeId l_choice,
                              const ParameterVector& params,
                              const SymmetricTensor2& stress,
                              const PlasticInternalVariables& piv,
                              const SymmetricTensor2& m_flow,
                              const EdgeState& es = {}, double G = 0.0);

}  // namespace mmg
