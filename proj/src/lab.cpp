#include "mmg/lab.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace mmg {

namespace fs = std::filesystem;

void Dataset::add(const std::string& id, TestRecord rec) {
  if (records.count(id))
    throw std::invalid_argument("duplicate test id " + id);
  ids.push_back(id);
  records.emplace(id, std::move(rec));
}

const TestRecord& Dataset::at(const std::string& id) const {
  auto it = records.find(id);
  if (it == records.end())
    throw std::out_of_range("no test record named " + id);
  return it->second;
}

void Dataset::refresh_fingerprint() {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&h](double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const auto& id : ids) {
    const TestRecord& r = records.at(id);
    for (std::size_t k = 0; k < r.stress.size(); ++k) {
      for (int i = 0; i < 6; ++i) {
        mix(r.stress[k][i]);
        mix(r.strain[k][i]);
      }
      mix(r.void_ratio[k]);
    }
  }
  fingerprint = h;
}

std::vector<TestProtocol> experiment1_catalog() {
  std::vector<TestProtocol> t;
  auto mk = [](std::string id, TestKind kind, int sign, double target) {
    TestProtocol p;
    p.id = std::move(id);
    p.kind = kind;
    p.sign = sign;
    p.p0 = -200.0;
    p.e0 = 0.60;
    p.n_steps = 1000;
    p.target_strain = target;
    return p;
  };
  // Extension amplitudes are kept short of the tensile apex of the
  // frictional surfaces.
  t.push_back(mk("T1", TestKind::OneDimensional, +1, 0.02));
  t.push_back(mk("T2", TestKind::OneDimensional, -1, 0.10));
  t.push_back(mk("T3", TestKind::DrainedTriaxial, +1, 0.02));
  t.push_back(mk("T4", TestKind::DrainedTriaxial, -1, 0.10));
  t.push_back(mk("T5", TestKind::UndrainedTriaxial, +1, 0.03));
  t.push_back(mk("T6", TestKind::UndrainedTriaxial, -1, 0.10));
  t.push_back(mk("T7", TestKind::SimpleShear, +1, 0.05));
  return t;
}

std::vector<TestProtocol> experiment2_catalog() {
  std::vector<TestProtocol> t;
  const double bs[] = {0.0, 0.5, 0.1, 0.25, 0.75};
  const double p0s[] = {-300.0, -400.0, -500.0};
  const double e0s[] = {0.539, 0.536, 0.534};
  int idx = 1;
  for (double b : bs) {
    for (int sign : {-1, +1}) {
      for (int k = 0; k < 3; ++k) {
        TestProtocol p;
        p.id = "T" + std::to_string(idx++);
        p.kind = TestKind::TrueTriaxial;
        p.sign = sign;
        p.b = b;
        p.p0 = p0s[k];
        p.e0 = e0s[k];
        p.n_steps = 600;
        p.target_strain = sign < 0 ? 0.12 : 0.03;
        t.push_back(p);
      }
    }
  }
  return t;
}

std::vector<std::string> experiment2_board() {
  std::vector<std::string> ids;
  for (int i = 1; i <= 12; ++i) ids.push_back("T" + std::to_string(i));
  return ids;
}

std::vector<std::string> experiment2_validation() {
  std::vector<std::string> ids;
  for (int i = 13; i <= 30; ++i) ids.push_back("T" + std::to_string(i));
  return ids;
}

Dataset generate_synthetic(const ModelGraph& truth,
                           const std::vector<TestProtocol>& protocols,
                           const SubsteppingParams& fine_params) {
  Dataset ds;
  ds.provenance = "synthetic";
  for (const auto& pr : protocols) {
    ModelGraph model = truth;  // fresh edge state per path
    ds.add(pr.id, run_test(model, pr, fine_params));
  }
  ds.refresh_fingerprint();
  return ds;
}

ModelGraph truth_j2() {
  ParameterVector pv;
  pv.set("K0", 1.0e5);
  pv.set("G0", 6.0e4);
  pv.set("sigma_y0", 100.0);
  pv.set("H0", 1000.0);
  ModelGraph m = assemble({EdgeId::E1, EdgeId::L1, EdgeId::P1, EdgeId::H1}, pv);
  m.set_calibrated(true);
  return m;
}

ModelGraph truth_drucker_prager() {
  ParameterVector pv;
  pv.set("K0", 1.0e5);
  pv.set("G0", 6.0e4);
  pv.set("a0", 0.5);
  pv.set("a1", 0.3);
  pv.set("k_hard", 0.05);
  pv.set("beta_0", 0.2);
  ModelGraph m = assemble({EdgeId::E1, EdgeId::L5, EdgeId::P2, EdgeId::H1}, pv);
  m.set_calibrated(true);
  return m;
}

ModelGraph truth_matsuoka_nakai() {
  ParameterVector pv;
  pv.set("K0", 1.0e5);
  pv.set("G0", 6.0e4);
  pv.set("c0", 10.0);
  pv.set("a1", 40.0);
  pv.set("a2", 0.001);
  pv.set("a3", 12.0);
  pv.set("m_exp", 0.5);
  pv.set("alpha_mn", 0.55);
  ModelGraph m = assemble({EdgeId::E1, EdgeId::L6, EdgeId::P3, EdgeId::H1}, pv);
  m.set_calibrated(true);
  return m;
}

ModelGraph truth_standin() {
  ParameterVector pv;
  pv.set("K0", 5.0e4);
  pv.set("G0", 3.0e4);
  pv.set("a", 0.6);
  pv.set("alpha_gp", 0.45);
  pv.set("M_f", 1.05);
  pv.set("m_f", 0.5);
  pv.set("M_g", 1.25);
  pv.set("m_g", 2.0);
  pv.set("e_c0", 0.62);
  pv.set("lambda_cs", 0.013);
  pv.set("a_cs", 0.7);
  pv.set("H0", 80.0);
  pv.set("alpha_f", 0.45);
  pv.set("beta_0", 20.0);
  pv.set("beta_1", 0.04);
  ModelGraph m = assemble({EdgeId::E2, EdgeId::L10, EdgeId::P7, EdgeId::H2}, pv);
  m.set_calibrated(true);
  return m;
}

Dataset experiment2_standin(std::uint64_t seed, double noise_std, int n_steps) {
  auto protocols = experiment2_catalog();
  for (auto& p : protocols) p.n_steps = n_steps;
  SubsteppingParams fine;
  fine.stol = 1e-8;
  Dataset ds = generate_synthetic(truth_standin(), protocols, fine);
  apply_multiplicative_noise(ds, noise_std, seed);
  ds.provenance = "ingested";
  return ds;
}

void apply_multiplicative_noise(Dataset& ds, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (const auto& id : ds.ids) {
    TestRecord& r = ds.records.at(id);
    for (std::size_t k = 1; k < r.stress.size(); ++k) {
      for (int i = 0; i < 6; ++i) r.stress[k][i] *= 1.0 + gauss(rng);
      const StressInvariants inv = invariants(r.stress[k]);
      r.p[k] = inv.p;
      r.q[k] = inv.q;
      r.theta[k] = inv.theta;
    }
    // noisy data no longer carries integrator diagnostics
    r.d_eps_p.clear();
    r.d_lambda.clear();
    r.max_r.clear();
    r.f_end.clear();
  }
  ds.refresh_fingerprint();
}

namespace {

std::string csv_path(const std::string& dir, const std::string& id) {
  return (fs::path(dir) / (id + ".csv")).string();
}

const char* kCsvHeader =
    "step,eps11,eps22,eps33,eps12,eps23,eps13,"
    "sig11,sig22,sig33,sig12,sig23,sig13,e,p,q,theta";

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["provenance"] = ds.provenance;
  nlohmann::ordered_json tests = nlohmann::ordered_json::object();
  for (const auto& id : ds.ids) {
    const TestRecord& r = ds.records.at(id);
    nlohmann::ordered_json t;
    t["kind"] = test_kind_name(r.protocol.kind);
    t["sign"] = r.protocol.sign;
    t["b"] = r.protocol.b;
    t["p0"] = r.protocol.p0;
    t["e0"] = r.protocol.e0;
    t["n_steps"] = r.protocol.n_steps;
    t["target_strain"] = r.protocol.target_strain;
    tests[id] = t;

    std::FILE* f = std::fopen(csv_path(dir, id).c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + csv_path(dir, id));
    std::fprintf(f, "%s\n", kCsvHeader);
    for (std::size_t k = 0; k < r.stress.size(); ++k) {
      std::fprintf(f, "%zu", k);
      for (int i = 0; i < 6; ++i) std::fprintf(f, ",%.17g", r.strain[k][i]);
      for (int i = 0; i < 6; ++i) std::fprintf(f, ",%.17g", r.stress[k][i]);
      std::fprintf(f, ",%.17g,%.17g,%.17g,%.17g", r.void_ratio[k], r.p[k],
                   r.q[k], r.theta[k]);
      std::fprintf(f, "\n");
    }
    std::fclose(f);
  }
  manifest["tests"] = tests;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("cannot write manifest.json in " + dir);
  mf << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf)
    throw std::runtime_error("no manifest.json in " + dir);
  nlohmann::json manifest;
  mf >> manifest;

  Dataset ds;
  ds.provenance = manifest.value("provenance", "ingested");
  if (!manifest.contains("tests")) return ds;
  for (const auto& [id, t] : manifest.at("tests").items()) {
    TestRecord rec;
    rec.protocol_id = id;
    rec.protocol.id = id;
    rec.protocol.kind = test_kind_from_name(t.at("kind").get<std::string>());
    rec.protocol.sign = t.at("sign").get<int>();
    rec.protocol.b = t.at("b").get<double>();
    rec.protocol.p0 = t.at("p0").get<double>();
    rec.protocol.e0 = t.at("e0").get<double>();
    rec.protocol.n_steps = t.at("n_steps").get<int>();
    rec.protocol.target_strain = t.at("target_strain").get<double>();

    const std::string path = csv_path(dir, id);
    std::ifstream cf(path);
    if (!cf)
      throw std::runtime_error("manifest references missing file " + path);
    std::string line;
    if (!std::getline(cf, line) || line != kCsvHeader)
      throw std::runtime_error(path + ": unexpected header row");
    std::size_t row = 1;
    while (std::getline(cf, line)) {
      ++row;
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> vals;
      while (std::getline(ss, cell, ',')) {
        try {
          vals.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw std::runtime_error(path + ": row " + std::to_string(row) +
                                   ": bad number '" + cell + "'");
        }
      }
      if (vals.size() != 17)
        throw std::runtime_error(path + ": row " + std::to_string(row) +
                                 ": expected 17 columns, got " +
                                 std::to_string(vals.size()));
      rec.strain.push_back(SymmetricTensor2(vals[1], vals[2], vals[3], vals[4],
                                            vals[5], vals[6]));
      rec.stress.push_back(SymmetricTensor2(vals[7], vals[8], vals[9],
                                            vals[10], vals[11], vals[12]));
      rec.void_ratio.push_back(vals[13]);
      rec.p.push_back(vals[14]);
      rec.q.push_back(vals[15]);
      rec.theta.push_back(vals[16]);
    }
    ds.add(id, std::move(rec));
  }
  ds.refresh_fingerprint();
  return ds;
}

PathSequence record_to_sequence(const TestRecord& rec) {
  PathSequence seq;
  seq.reserve(rec.stress.size());
  for (std::size_t k = 0; k < rec.stress.size(); ++k)
    seq.push_back({rec.strain[k], rec.stress[k], rec.void_ratio[k]});
  return seq;
}

}  // namespace mmg
