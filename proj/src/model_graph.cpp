#include "mmg/model_graph.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mmg {

namespace {

const std::vector<std::string> kVertices = {
    "eps_n",   "sig_n",  "d_eps",  "d_sig",   "d_eps_e", "d_eps_p", "d_lambda",
    "C_e",     "n_load", "m_flow", "H",       "sig_ivr", "xi_piv"};

const char* target_of_slot(char slot) {
  switch (slot) {
    case 'E': return "C_e";
    case 'L': return "n_load";
    case 'P': return "m_flow";
    case 'H': return "H";
  }
  throw std::logic_error("bad slot");
}

std::vector<MultigraphEdge> definition_edges() {
  std::vector<MultigraphEdge> d;
  auto add = [&d](const char* label, const char* s, const char* t) {
    d.push_back(MultigraphEdge{label, s, t, false, std::nullopt});
  };
  add("def-1", "C_e", "d_sig");
  add("def-1", "d_eps_e", "d_sig");
  add("def-2", "d_eps", "d_eps_e");
  add("def-2", "d_eps_p", "d_eps_e");
  add("def-3", "d_lambda", "d_eps_p");
  add("def-3", "m_flow", "d_eps_p");
  add("def-4", "n_load", "d_lambda");
  add("def-4", "C_e", "d_lambda");
  add("def-4", "d_eps", "d_lambda");
  add("def-4", "H", "d_lambda");
  add("def-4", "m_flow", "d_lambda");
  add("stress-invariants", "sig_n", "sig_ivr");
  add("internal-variables", "eps_n", "xi_piv");
  add("internal-variables", "sig_n", "xi_piv");
  return d;
}

}  // namespace

bool Multigraph::has_vertex(const std::string& v) const {
  return std::find(vertices.begin(), vertices.end(), v) != vertices.end();
}

Multigraph catalog(bool with_nn) {
  Multigraph g;
  g.vertices = kVertices;
  g.edges = definition_edges();
  for (const auto& c : edge_catalog(with_nn)) {
    const char* tgt = target_of_slot(c.slot);
    g.edges.push_back(MultigraphEdge{c.name, "sig_ivr", tgt, true, c.id});
    g.edges.push_back(MultigraphEdge{c.name, "xi_piv", tgt, true, c.id});
  }
  return g;
}

namespace {

std::vector<EdgeId> p_options(EdgeId l, bool with_nn) {
  std::vector<EdgeId> opts;
  switch (l) {
    case EdgeId::L1:
    case EdgeId::L2:
    case EdgeId::L3: opts = {EdgeId::P1}; break;
    case EdgeId::L4:
    case EdgeId::L5: opts = {EdgeId::P2}; break;
    case EdgeId::L6: opts = {EdgeId::P3}; break;
    case EdgeId::L7: opts = {EdgeId::P4}; break;
    case EdgeId::L8: opts = {EdgeId::P5}; break;
    case EdgeId::L9: opts = {EdgeId::P6}; break;
    case EdgeId::L10: opts = {EdgeId::P7}; break;
    case EdgeId::LNN: opts = {}; break;
    default: throw std::logic_error("bad L choice");
  }
  if (with_nn) opts.push_back(EdgeId::PNN);
  return opts;
}

std::vector<EdgeId> h_options(EdgeId l, bool with_nn) {
  std::vector<EdgeId> opts;
  switch (l) {
    case EdgeId::L1:
    case EdgeId::L2:
    case EdgeId::L3:
    case EdgeId::L4:
    case EdgeId::L5:
    case EdgeId::L6:
    case EdgeId::L7:
    case EdgeId::L8: opts = {EdgeId::H1}; break;
    case EdgeId::L9: opts = {EdgeId::H2}; break;
    case EdgeId::L10: opts = {EdgeId::H2, EdgeId::H3}; break;
    case EdgeId::LNN: opts = {}; break;
    default: throw std::logic_error("bad L choice");
  }
  if (with_nn) opts.push_back(EdgeId::HNN);
  return opts;
}

}  // namespace

std::vector<EdgeId> compatible(const PartialSelection& partial, bool with_nn) {
  std::vector<EdgeId> opts;
  if (!partial.e) {
    for (const auto& c : edge_catalog(with_nn))
      if (c.slot == 'E') opts.push_back(c.id);
    return opts;
  }
  if (!partial.l) {
    for (const auto& c : edge_catalog(with_nn))
      if (c.slot == 'L') opts.push_back(c.id);
    return opts;
  }
  if (!partial.p) return p_options(*partial.l, with_nn);
  if (!partial.h) return h_options(*partial.l, with_nn);
  return {};
}

bool selection_compatible(const Selection& sel) {
  if (edge_slot(sel.e) != 'E' || edge_slot(sel.l) != 'L' ||
      edge_slot(sel.p) != 'P' || edge_slot(sel.h) != 'H')
    return false;
  const auto ps = p_options(sel.l, true);
  if (std::find(ps.begin(), ps.end(), sel.p) == ps.end()) return false;
  const auto hs = h_options(sel.l, true);
  return std::find(hs.begin(), hs.end(), sel.h) != hs.end();
}

std::vector<ParamSpec> merged_param_specs(const Selection& sel) {
  std::vector<ParamSpec> specs;
  auto add = [&specs](EdgeId id) {
    for (const auto& p : edge_choice(id).params) {
      bool seen = false;
      for (const auto& s : specs)
        if (s.name == p.name) seen = true;
      if (!seen) specs.push_back(p);
    }
  };
  add(sel.e);
  add(sel.l);
  add(sel.p);
  add(sel.h);
  return specs;
}

ParameterVector midpoint_params(const Selection& sel) {
  ParameterVector pv;
  for (const auto& s : merged_param_specs(sel)) {
    const double mid = s.log_scale
                           ? std::sqrt(std::max(s.lo, 1e-300) * s.hi)
                           : 0.5 * (s.lo + s.hi);
    pv.set(s.name, mid);
  }
  return pv;
}

bool induced_subgraph_is_valid_dag(const Selection& sel) {
  const Multigraph g = catalog(true);
  std::vector<const MultigraphEdge*> edges;
  for (const auto& e : g.edges) {
    if (!e.selectable) {
      edges.push_back(&e);
    } else if (e.choice == sel.e || e.choice == sel.l || e.choice == sel.p ||
               e.choice == sel.h) {
      edges.push_back(&e);
    }
  }
  // Kahn topological sort
  std::map<std::string, int> indeg;
  for (const auto& v : g.vertices) indeg[v] = 0;
  for (const auto* e : edges) {
    if (!g.has_vertex(e->source) || !g.has_vertex(e->target)) return false;
    ++indeg[e->target];
  }
  std::queue<std::string> ready;
  for (const auto& [v, d] : indeg)
    if (d == 0) ready.push(v);
  int visited = 0;
  while (!ready.empty()) {
    const std::string v = ready.front();
    ready.pop();
    ++visited;
    for (const auto* e : edges)
      if (e->source == v && --indeg[e->target] == 0) ready.push(e->target);
  }
  if (visited != (int)g.vertices.size()) return false;  // cycle

  // All three roots must reach the leaf.
  for (const char* root : {"eps_n", "sig_n", "d_eps"}) {
    std::set<std::string> seen{root};
    std::queue<std::string> bfs;
    bfs.push(root);
    while (!bfs.empty()) {
      const std::string v = bfs.front();
      bfs.pop();
      for (const auto* e : edges)
        if (e->source == v && seen.insert(e->target).second)
          bfs.push(e->target);
    }
    if (!seen.count("d_sig")) return false;
  }
  return true;
}

ModelGraph assemble(const Selection& sel, const ParameterVector& params) {
  if (!selection_compatible(sel))
    throw IncompatibleSelection(
        "incompatible component selection (" + edge_name(sel.e) + ", " +
        edge_name(sel.l) + ", " + edge_name(sel.p) + ", " + edge_name(sel.h) +
        ")");
  for (const auto& spec : merged_param_specs(sel)) {
    if (!params.has(spec.name))
      throw std::invalid_argument("missing parameter " + spec.name);
    const double v = params.get(spec.name);
    if (v < spec.lo - 1e-12 || v > spec.hi + 1e-12)
      throw std::invalid_argument(
          "parameter " + spec.name + " = " + std::to_string(v) +
          " outside admissible range [" + std::to_string(spec.lo) + ", " +
          std::to_string(spec.hi) + "]");
  }
  if (!induced_subgraph_is_valid_dag(sel))
    throw IncompatibleSelection("induced subgraph is not a root-to-leaf DAG");
  ModelGraph m;
  m.sel_ = sel;
  m.params_ = params;
  return m;
}

bool ModelGraph::has_yield_surface() const {
  return edge_choice(sel_.l).requires_yield_surface;
}

bool ModelGraph::uses_regressor() const {
  return sel_.l == EdgeId::LNN || sel_.p == EdgeId::PNN ||
         sel_.h == EdgeId::HNN;
}

ElasticModuli ModelGraph::moduli(const StressInvariants& inv,
                                 const PlasticInternalVariables& piv) const {
  return eval_elastic_moduli(sel_.e, params_, inv, piv);
}

double ModelGraph::yield(const SymmetricTensor2& stress,
                         const PlasticInternalVariables& piv, double G) const {
  const StressInvariants inv = invariants(stress);
  EvalArgs a{stress, inv, piv, edge_state_, G, nullptr};
  return edges::yield_value(sel_.l, params_, a);
}

SymmetricTensor2 ModelGraph::loading_direction(
    const SymmetricTensor2& stress, const StressInvariants& inv,
    const PlasticInternalVariables& piv, double G,
    const SymmetricTensor2* dev_hint) const {
  (void)inv;
  if (sel_.l == EdgeId::LNN) {
    // Associative by construction: the loading direction comes from the
    // trained flow regressor.
    if (!nn_flow_) throw std::runtime_error("L-NN regressor not trained");
    return nn_flow_->predict_direction(history_);
  }
  return eval_loading_direction(sel_.l, params_, stress, piv, edge_state_,
                                dev_hint, G);
}

SymmetricTensor2 ModelGraph::flow_direction(
    const SymmetricTensor2& stress, const StressInvariants& inv,
    const PlasticInternalVariables& piv,
    const SymmetricTensor2* dev_hint) const {
  (void)inv;
  if (sel_.p == EdgeId::PNN) {
    if (!nn_flow_) throw std::runtime_error("P-NN regressor not trained");
    return nn_flow_->predict_direction(history_) * (double)flow_sign_;
  }
  return eval_flow_direction(sel_.p, sel_.l, params_, stress, piv, edge_state_,
                             dev_hint) *
         (double)flow_sign_;
}

double ModelGraph::hardening_modulus(const SymmetricTensor2& stress,
                                     const StressInvariants& inv,
                                     const PlasticInternalVariables& piv,
                                     const SymmetricTensor2& m_flow,
                                     double G) const {
  (void)inv;
  if (sel_.h == EdgeId::HNN) {
    if (!nn_hard_) throw std::runtime_error("H-NN regressor not trained");
    return nn_hard_->predict_scalar(history_);
  }
  return eval_hardening_modulus(sel_.h, sel_.l, params_, stress, piv, m_flow,
                                edge_state_, G);
}

void ModelGraph::advance_edge_state(const SymmetricTensor2& stress,
                                    const StressInvariants& inv,
                                    const PlasticInternalVariables& piv,
                                    const SymmetricTensor2& d_eps_p,
                                    double d_lambda) {
  if (sel_.l != EdgeId::L7 && sel_.l != EdgeId::L8) return;
  EvalArgs a{stress, inv, piv, edge_state_, 0.0, nullptr};
  edges::advance_edge_state(sel_.l, params_, edge_state_, a, d_eps_p,
                            d_lambda);
}

void ModelGraph::push_history(const StressInvariants& inv,
                              const PlasticInternalVariables& piv) {
  if (!uses_regressor()) return;
  history_.push(edge_features(inv, piv));
}

void ModelGraph::reset_runtime(double p0, double e0) {
  edge_state_.p_image = p0;
  edge_state_.back_stress = SymmetricTensor2::zero();
  PlasticInternalVariables piv;
  piv.void_ratio = e0;
  StressInvariants inv;
  inv.p = p0;
  history_.reset(edge_features(inv, piv));
}

void ModelGraph::attach_regressors(std::shared_ptr<const NeuralEdge> flow,
                                   std::shared_ptr<const NeuralEdge> load,
                                   std::shared_ptr<const NeuralEdge> hard) {
  nn_flow_ = std::move(flow);
  nn_load_ = std::move(load);
  nn_hard_ = std::move(hard);
}

std::string ModelGraph::to_json() const {
  nlohmann::ordered_json j;
  j["E"] = edge_name(sel_.e);
  j["L"] = edge_name(sel_.l);
  j["P"] = edge_name(sel_.p);
  j["H"] = edge_name(sel_.h);
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < params_.size(); ++i)
    params[params_.name(i)] = params_.value(i);
  j["params"] = params;
  j["calibrated"] = calibrated_;
  if (flow_sign_ != 1) j["flow_sign"] = flow_sign_;
  return j.dump(2);
}

ModelGraph ModelGraph::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Selection sel;
  auto get_id = [&j](const char* slot) {
    const std::string name = j.at(slot).get<std::string>();
    const auto id = edge_from_name(name);
    if (!id) throw std::runtime_error("unknown edge id " + name);
    return *id;
  };
  sel.e = get_id("E");
  sel.l = get_id("L");
  sel.p = get_id("P");
  sel.h = get_id("H");
  ParameterVector pv;
  for (const auto& [k, v] : j.at("params").items())
    pv.set(k, v.get<double>());
  ModelGraph m = assemble(sel, pv);
  m.set_calibrated(j.value("calibrated", false));
  m.set_flow_sign(j.value("flow_sign", 1));
  return m;
}

}  // namespace mmg
