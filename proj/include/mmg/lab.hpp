#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmg/integrator.hpp"
#include "mmg/model_graph.hpp"
#include "mmg/neural.hpp"
#include "mmg/protocol.hpp"

namespace mmg {

/// Named collection of test records with a provenance tag.
struct Dataset {
  std::vector<std::string> ids;  // insertion order
  std::map<std::string, TestRecord> records;
  std::string provenance = "synthetic";  // synthetic | ingested
  std::uint64_t fingerprint = 0;

  void add(const std::string& id, TestRecord rec);
  const TestRecord& at(const std::string& id) const;
  bool empty() const { return ids.empty(); }
  void refresh_fingerprint();
};

/// The seven single-element tests of the reverse-engineering experiment,
/// all consolidated to p0 = -200 kPa.
std::vector<TestProtocol> experiment1_catalog();

/// The thirty true-triaxial tests of the forward-prediction experiment:
/// b in {0, 0.1, 0.25, 0.5, 0.75}, p0 in {-300, -400, -500} kPa,
/// e0 in {0.539, 0.536, 0.534}. T1-T12 form the candidate calibration
/// board, T13-T30 the fixed validation pool.
std::vector<TestProtocol> experiment2_catalog();
std::vector<std::string> experiment2_board();       // T1..T12
std::vector<std::string> experiment2_validation();  // T13..T30

/// Runs the truth model through every protocol at fine tolerance.
Dataset generate_synthetic(const ModelGraph& truth,
                           const std::vector<TestProtocol>& protocols,
                           const SubsteppingParams& fine_params);

/// Reference truth models for the reverse-engineering experiment.
ModelGraph truth_j2();
ModelGraph truth_drucker_prager();
ModelGraph truth_matsuoka_nakai();

/// Critical-state truth model behind the shipped stand-in dataset.
ModelGraph truth_standin();

/// Stand-in for the particle-simulation dataset: critical-state truth plus
/// multiplicative noise per stress component.
Dataset experiment2_standin(std::uint64_t seed, double noise_std = 0.005,
                            int n_steps = 600);

void apply_multiplicative_noise(Dataset& ds, double sigma, std::uint64_t seed);

/// Directory layout: manifest.json plus one CSV per test. Values stored
/// with 17 significant digits so save-then-load round-trips exactly.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

PathSequence record_to_sequence(const TestRecord& rec);

}  // namespace mmg
