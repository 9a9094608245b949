#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "mmg/model_graph.hpp"

using namespace mmg;

namespace {

bool contains(const std::vector<EdgeId>& v, EdgeId id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

ParameterVector j2_params() {
  ParameterVector pv;
  pv.set("K0", 1e5);
  pv.set("G0", 6e4);
  pv.set("sigma_y0", 100.0);
  pv.set("H0", 1000.0);
  return pv;
}

}  // namespace

TEST_CASE("catalog multigraph structure") {
  const Multigraph g = catalog(true);
  // every edge endpoint is a declared vertex
  for (const auto& e : g.edges) {
    CHECK(g.has_vertex(e.source));
    CHECK(g.has_vertex(e.target));
  }
  // definition edges are present and not selectable
  int defs = 0;
  for (const auto& e : g.edges)
    if (!e.selectable) ++defs;
  CHECK(defs >= 11);

  // selectable edges per slot: two parallel edges per catalog entry
  std::set<std::string> labels;
  int selectable = 0;
  for (const auto& e : g.edges)
    if (e.selectable) {
      ++selectable;
      labels.insert(e.label);
    }
  CHECK(labels.size() == 26);
  CHECK(selectable == 52);

  const Multigraph g2 = catalog(false);
  std::set<std::string> labels2;
  for (const auto& e : g2.edges)
    if (e.selectable) labels2.insert(e.label);
  CHECK(labels2.size() == 23);
}

TEST_CASE("compatibility table") {
  SUBCASE("empty selection offers all elasticity choices") {
    const auto opts = compatible(PartialSelection{});
    CHECK(opts.size() == 3);
    CHECK(contains(opts, EdgeId::E1));
    CHECK(contains(opts, EdgeId::E3));
  }
  SUBCASE("after L1, the flow slot offers P1 and the regressor only") {
    PartialSelection ps;
    ps.e = EdgeId::E1;
    ps.l = EdgeId::L1;
    const auto opts = compatible(ps);
    CHECK(opts.size() == 2);
    CHECK(contains(opts, EdgeId::P1));
    CHECK(contains(opts, EdgeId::PNN));
  }
  SUBCASE("after L9: P6/P-NN, then H2/H-NN") {
    PartialSelection ps;
    ps.e = EdgeId::E2;
    ps.l = EdgeId::L9;
    auto opts = compatible(ps);
    CHECK(opts.size() == 2);
    CHECK(contains(opts, EdgeId::P6));
    CHECK(contains(opts, EdgeId::PNN));
    ps.p = EdgeId::P6;
    opts = compatible(ps);
    CHECK(opts.size() == 2);
    CHECK(contains(opts, EdgeId::H2));
    CHECK(contains(opts, EdgeId::HNN));
  }
  SUBCASE("regressor edges can be excluded") {
    PartialSelection ps;
    ps.e = EdgeId::E1;
    ps.l = EdgeId::L10;
    const auto opts = compatible(ps, false);
    CHECK(opts.size() == 1);
    CHECK(contains(opts, EdgeId::P7));
  }
  SUBCASE("monotonicity: extending never re-enables an excluded choice") {
    PartialSelection ps;
    ps.e = EdgeId::E1;
    const auto l_opts = compatible(ps);
    for (EdgeId l : l_opts) {
      PartialSelection ext = ps;
      ext.l = l;
      for (EdgeId p : compatible(ext)) {
        PartialSelection ext2 = ext;
        ext2.p = p;
        for (EdgeId h : compatible(ext2)) {
          Selection sel{*ext2.e, *ext2.l, *ext2.p, h};
          CHECK(selection_compatible(sel));
        }
      }
    }
  }
}

TEST_CASE("assembly") {
  SUBCASE("classical J2 selection is valid") {
    const ModelGraph m =
        assemble({EdgeId::E1, EdgeId::L1, EdgeId::P1, EdgeId::H1}, j2_params());
    CHECK(m.has_yield_surface());
    CHECK_FALSE(m.uses_regressor());
  }
  SUBCASE("the critical-state generalized-plasticity combination is valid") {
    ParameterVector pv;
    pv.set("K0", 5e4);
    pv.set("G0", 3e4);
    pv.set("a", 0.6);
    pv.set("alpha_gp", 0.45);
    pv.set("M_f", 1.1);
    pv.set("m_f", 4.0);
    pv.set("M_g", 1.25);
    pv.set("m_g", 4.0);
    pv.set("e_c0", 0.62);
    pv.set("lambda_cs", 0.013);
    pv.set("a_cs", 0.7);
    pv.set("H0", 800.0);
    pv.set("alpha_f", 0.45);
    pv.set("beta_0", 4.2);
    pv.set("beta_1", 0.2);
    const ModelGraph m =
        assemble({EdgeId::E2, EdgeId::L10, EdgeId::P7, EdgeId::H2}, pv);
    CHECK_FALSE(m.has_yield_surface());
  }
  SUBCASE("cross-family pairing is rejected") {
    CHECK_THROWS_AS(
        assemble({EdgeId::E1, EdgeId::L1, EdgeId::P4, EdgeId::H1}, j2_params()),
        IncompatibleSelection);
  }
  SUBCASE("out-of-range parameter is rejected") {
    ParameterVector pv = j2_params();
    pv.set("sigma_y0", -5.0);
    CHECK_THROWS_AS(
        assemble({EdgeId::E1, EdgeId::L1, EdgeId::P1, EdgeId::H1}, pv),
        std::invalid_argument);
  }
  SUBCASE("missing parameter is rejected") {
    ParameterVector pv;
    pv.set("K0", 1e5);
    CHECK_THROWS_AS(
        assemble({EdgeId::E1, EdgeId::L1, EdgeId::P1, EdgeId::H1}, pv),
        std::invalid_argument);
  }
  SUBCASE("every complete compatible selection assembles to a valid DAG") {
    for (const auto& ec : edge_catalog(true)) {
      if (ec.slot != 'L') continue;
      PartialSelection ps;
      ps.e = EdgeId::E1;
      ps.l = ec.id;
      for (EdgeId p : compatible(ps)) {
        PartialSelection ps2 = ps;
        ps2.p = p;
        for (EdgeId h : compatible(ps2)) {
          Selection sel{EdgeId::E1, ec.id, p, h};
          const ParameterVector pv = midpoint_params(sel);
          CHECK_NOTHROW(assemble(sel, pv));
          CHECK(induced_subgraph_is_valid_dag(sel));
        }
      }
    }
  }
}

TEST_CASE("model JSON round trip") {
  ModelGraph m =
      assemble({EdgeId::E1, EdgeId::L1, EdgeId::P1, EdgeId::H1}, j2_params());
  m.set_calibrated(true);
  const std::string text = m.to_json();
  const ModelGraph back = ModelGraph::from_json(text);
  CHECK(back.selection() == m.selection());
  CHECK(back.calibrated());
  CHECK(back.params().get("sigma_y0") == doctest::Approx(100.0));
  CHECK(back.params().get("H0") == doctest::Approx(1000.0));
}

TEST_CASE("midpoint parameters sit inside their ranges") {
  const Selection sel{EdgeId::E2, EdgeId::L10, EdgeId::P7, EdgeId::H3};
  const ParameterVector pv = midpoint_params(sel);
  for (const auto& spec : merged_param_specs(sel)) {
    const double v = pv.get(spec.name);
    CHECK(v >= spec.lo);
    CHECK(v <= spec.hi);
  }
}
