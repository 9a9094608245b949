#pragma once

#include <string>
#include <vector>

#include "mmg/tensor.hpp"

namespace mmg {

enum class TestKind {
  OneDimensional,
  DrainedTriaxial,
  UndrainedTriaxial,
  SimpleShear,
  TrueTriaxial,
};

const char* test_kind_name(TestKind k);
TestKind test_kind_from_name(const std::string& name);

/// Loading-constraint definition for one virtual experiment.
struct TestProtocol {
  std::string id;
  TestKind kind = TestKind::DrainedTriaxial;
  int sign = -1;          // -1 compression, +1 extension of the driven strain
  double b = 0.0;         // intermediate stress ratio, true-triaxial only
  double p0 = -200.0;     // kPa, initial isotropic consolidation
  double e0 = 0.6;        // initial void ratio
  int n_steps = 1000;
  double target_strain = 0.2;  // magnitude of the driven strain component
};

/// Per-step stress/strain/void-ratio series produced by the integrator or
/// ingested from file. Step 0 is the consolidated initial state. The
/// diagnostic arrays are in-memory only and empty for ingested data.
struct TestRecord {
  std::string protocol_id;
  TestProtocol protocol;
  std::vector<SymmetricTensor2> strain;
  std::vector<SymmetricTensor2> stress;
  std::vector<double> void_ratio;
  std::vector<double> p, q, theta;

  // diagnostics per increment (length = steps, entry i covers i -> i+1)
  std::vector<SymmetricTensor2> d_eps_p;
  std::vector<double> d_lambda;
  std::vector<double> max_r;
  std::vector<double> f_end;

  std::size_t steps() const { return stress.empty() ? 0 : stress.size() - 1; }
  bool has_diagnostics() const { return !d_eps_p.empty(); }
};

}  // namespace mmg
