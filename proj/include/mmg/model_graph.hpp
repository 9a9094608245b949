#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmg/edges.hpp"
#include "mmg/neural.hpp"
#include "mmg/state.hpp"

namespace mmg {

/// Labeled directed multigraph: physical quantities as vertices, relations
/// as labeled edges with explicit source/target maps. Parallel edges with
/// the same label realize multi-input relations.
struct MultigraphEdge {
  std::string label;
  std::string source;
  std::string target;
  bool selectable = false;          // definition edges are always present
  std::optional<EdgeId> choice;     // set for selectable edges
};

struct Multigraph {
  std::vector<std::string> vertices;
  std::vector<MultigraphEdge> edges;

  bool has_vertex(const std::string& v) const;
};

/// The elasto-plasticity board: roots (eps_n, sig_n, d_eps) to the leaf
/// (d_sig) with one candidate edge set per component slot.
Multigraph catalog(bool with_nn = true);

struct Selection {
  EdgeId e, l, p, h;
  bool operator==(const Selection&) const = default;
};

struct PartialSelection {
  std::optional<EdgeId> e, l, p, h;
  int filled() const {
    return (e ? 1 : 0) + (l ? 1 : 0) + (p ? 1 : 0) + (h ? 1 : 0);
  }
  bool complete() const { return filled() == 4; }
  Selection selection() const { return {*e, *l, *p, *h}; }
};

/// Choices admissible for the next unfilled slot (slot order E->L->P->H).
std::vector<EdgeId> compatible(const PartialSelection& partial,
                               bool with_nn = true);

bool selection_compatible(const Selection& sel);

/// Union of the parameter specs declared by the selected edges, first
/// declaration wins for shared names.
std::vector<ParamSpec> merged_param_specs(const Selection& sel);

ParameterVector midpoint_params(const Selection& sel);

struct IncompatibleSelection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One assembled constitutive model: a compatible (E, L, P, H) selection
/// with parameter values, plus the episode-confined evolving state owned by
/// its stateful edges. Copies are independent.
class ModelGraph {
 public:
  ModelGraph() = default;

  const Selection& selection() const { return sel_; }
  const ParameterVector& params() const { return params_; }
  ParameterVector& params() { return params_; }
  bool calibrated() const { return calibrated_; }
  void set_calibrated(bool c) { calibrated_ = c; }

  /// Diagnostic hook: -1 flips the plastic flow direction, producing a
  /// dissipation-violating counterexample for the admissibility gate.
  int flow_sign() const { return flow_sign_; }
  void set_flow_sign(int s) { flow_sign_ = s; }

  bool has_yield_surface() const;
  bool uses_regressor() const;

  ElasticModuli moduli(const StressInvariants& inv,
                       const PlasticInternalVariables& piv) const;

  double yield(const SymmetricTensor2& stress,
               const PlasticInternalVariables& piv, double G) const;

  SymmetricTensor2 loading_direction(const SymmetricTensor2& stress,
                                     const StressInvariants& inv,
                                     const PlasticInternalVariables& piv,
                                     double G,
                                     const SymmetricTensor2* dev_hint) const;

  SymmetricTensor2 flow_direction(const SymmetricTensor2& stress,
                                  const StressInvariants& inv,
                                  const PlasticInternalVariables& piv,
                                  const SymmetricTensor2* dev_hint) const;

  double hardening_modulus(const SymmetricTensor2& stress,
                           const StressInvariants& inv,
                           const PlasticInternalVariables& piv,
                           const SymmetricTensor2& m_flow, double G) const;

  /// Evolves the private edge state after an accepted plastic substep.
  void advance_edge_state(const SymmetricTensor2& stress,
                          const StressInvariants& inv,
                          const PlasticInternalVariables& piv,
                          const SymmetricTensor2& d_eps_p, double d_lambda);

  /// Appends the current state to the regressor feature window (once per
  /// driving step).
  void push_history(const StressInvariants& inv,
                    const PlasticInternalVariables& piv);

  /// Resets evolving state for a fresh loading path.
  void reset_runtime(double p0, double e0);

  void attach_regressors(std::shared_ptr<const NeuralEdge> flow,
                         std::shared_ptr<const NeuralEdge> load,
                         std::shared_ptr<const NeuralEdge> hard);
  const NeuralEdge* flow_regressor() const { return nn_flow_.get(); }
  const NeuralEdge* hardening_regressor() const { return nn_hard_.get(); }

  const EdgeState& edge_state() const { return edge_state_; }

  std::string to_json() const;
  static ModelGraph from_json(const std::string& text);

  friend ModelGraph assemble(const Selection& sel,
                             const ParameterVector& params);

 private:
  Selection sel_{EdgeId::E1, EdgeId::L1, EdgeId::P1, EdgeId::H1};
  ParameterVector params_;
  bool calibrated_ = false;
  int flow_sign_ = 1;

  EdgeState edge_state_;
  FeatureWindow history_{20};
  std::shared_ptr<const NeuralEdge> nn_flow_, nn_load_, nn_hard_;
};

/// Validates compatibility, parameter presence and ranges, and the
/// acyclicity/connectivity of the induced subgraph.
ModelGraph assemble(const Selection& sel, const ParameterVector& params);

/// Independent structural check used by tests: Kahn topological sort over
/// the induced subgraph plus root-to-leaf reachability.
bool induced_subgraph_is_valid_dag(const Selection& sel);

}  // namespace mmg
