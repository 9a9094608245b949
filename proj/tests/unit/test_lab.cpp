#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mmg/lab.hpp"

using namespace mmg;

namespace {

SubsteppingParams fine_params() {
  SubsteppingParams sp;
  sp.stol = 1e-8;
  return sp;
}

std::string temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("experiment catalogs") {
  SUBCASE("reverse-engineering board") {
    const auto cat = experiment1_catalog();
    CHECK(cat.size() == 7);
    for (const auto& p : cat) CHECK(p.p0 == -200.0);
    CHECK(cat[3].id == "T4");
    CHECK(cat[3].kind == TestKind::DrainedTriaxial);
    CHECK(cat[3].sign == -1);
    CHECK(cat[6].id == "T7");
    CHECK(cat[6].kind == TestKind::SimpleShear);
  }
  SUBCASE("forward-prediction board") {
    const auto cat = experiment2_catalog();
    CHECK(cat.size() == 30);
    CHECK(experiment2_board().size() == 12);
    CHECK(experiment2_validation().size() == 18);
    // T2: compression, b = 0, p0 = -400, e0 = 0.536
    CHECK(cat[1].id == "T2");
    CHECK(cat[1].sign == -1);
    CHECK(cat[1].b == 0.0);
    CHECK(cat[1].p0 == -400.0);
    CHECK(cat[1].e0 == doctest::Approx(0.536));
    // T27: compression, b = 0.75, p0 = -500, e0 = 0.534
    CHECK(cat[26].id == "T27");
    CHECK(cat[26].sign == -1);
    CHECK(cat[26].b == doctest::Approx(0.75));
    CHECK(cat[26].p0 == -500.0);
    CHECK(cat[26].e0 == doctest::Approx(0.534));
    for (const auto& p : cat) CHECK(p.kind == TestKind::TrueTriaxial);
  }
}

TEST_CASE("synthetic data generation") {
  ModelGraph truth = truth_j2();
  std::vector<TestProtocol> protos;
  auto cat = experiment1_catalog();
  for (auto& pr : cat) pr.n_steps = 200;
  protos.assign(cat.begin(), cat.begin() + 2);
  protos.push_back(cat[3]);  // T4 drained triaxial compression
  const Dataset ds = generate_synthetic(truth, protos, fine_params());
  CHECK(ds.ids.size() == 3);
  CHECK(ds.provenance == "synthetic");

  SUBCASE("drained triaxial curve is monotone with the elastic slope") {
    const TestRecord& rec = ds.at("T4");
    const double E = 9.0 * 1e5 * 6e4 / (3.0 * 1e5 + 6e4);
    const double slope =
        (rec.q[1] - rec.q[0]) / std::abs(rec.strain[1][0]);
    CHECK(slope == doctest::Approx(E).epsilon(1e-6));
    for (std::size_t k = 1; k < rec.q.size(); ++k)
      CHECK(rec.q[k] >= rec.q[k - 1] - 1e-9);
  }

  SUBCASE("records satisfy their constraint rows") {
    for (const auto& id : ds.ids) {
      const TestRecord& rec = ds.at(id);
      const ConstraintSet cs = constraint_matrices(rec.protocol);
      const double dy_norm = std::max(cs.dY.norm(), 1e-12);
      for (std::size_t k = 0; k + 1 < rec.stress.size(); ++k) {
        const Vector6 dsig =
            (rec.stress[k + 1] - rec.stress[k]).voigt_stress();
        const Vector6 deps =
            (rec.strain[k + 1] - rec.strain[k]).voigt_strain();
        CHECK((cs.S * dsig + cs.E * deps - cs.dY).norm() <= 1e-6 * dy_norm);
      }
    }
  }

  SUBCASE("void ratio column obeys the volumetric recurrence") {
    for (const auto& id : ds.ids) {
      const TestRecord& rec = ds.at(id);
      double e = rec.void_ratio.front();
      for (std::size_t k = 0; k + 1 < rec.strain.size(); ++k) {
        e += (1.0 + e) * (rec.strain[k + 1] - rec.strain[k]).trace();
        CHECK(std::abs(e - rec.void_ratio[k + 1]) <= 1e-10);
      }
    }
  }

  SUBCASE("generation is deterministic") {
    ModelGraph truth2 = truth_j2();
    const Dataset ds2 = generate_synthetic(truth2, protos, fine_params());
    CHECK(ds2.fingerprint == ds.fingerprint);
  }
}

TEST_CASE("simple shear from isotropic state keeps the normal constraints") {
  ModelGraph truth = truth_j2();
  TestProtocol pr = experiment1_catalog()[6];
  pr.n_steps = 100;
  SubsteppingParams sp = fine_params();
  ModelGraph m = truth;
  const TestRecord rec = run_test(m, pr, sp);
  // sigma11 and sigma22 held, eps33 held
  for (std::size_t k = 0; k < rec.stress.size(); ++k) {
    CHECK(rec.stress[k][0] == doctest::Approx(-200.0).epsilon(1e-9));
    CHECK(rec.stress[k][1] == doctest::Approx(-200.0).epsilon(1e-9));
    CHECK(std::abs(rec.strain[k][2]) <= 1e-12);
  }
  CHECK(rec.stress.back()[3] > 0.0);  // shear developed
}

TEST_CASE("dataset save/load round trip") {
  ModelGraph truth = truth_j2();
  auto cat = experiment1_catalog();
  for (auto& pr : cat) pr.n_steps = 50;
  const std::vector<TestProtocol> protos(cat.begin(), cat.begin() + 2);
  const Dataset ds = generate_synthetic(truth, protos, fine_params());

  const std::string dir = temp_dir("mmg_ds_roundtrip");
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);

  CHECK(back.ids == ds.ids);
  CHECK(back.fingerprint == ds.fingerprint);  // exact float round trip
  for (const auto& id : ds.ids) {
    const TestRecord& a = ds.at(id);
    const TestRecord& b = back.at(id);
    REQUIRE(a.stress.size() == b.stress.size());
    for (std::size_t k = 0; k < a.stress.size(); ++k)
      for (int i = 0; i < 6; ++i) {
        CHECK(a.stress[k][i] == b.stress[k][i]);
        CHECK(a.strain[k][i] == b.strain[k][i]);
      }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset load errors") {
  SUBCASE("empty manifest gives an empty dataset") {
    const std::string dir = temp_dir("mmg_ds_empty");
    std::filesystem::create_directories(dir);
    std::ofstream(dir + "/manifest.json") << "{\"provenance\":\"ingested\"}";
    const Dataset ds = load_dataset(dir);
    CHECK(ds.empty());
    std::filesystem::remove_all(dir);
  }
  SUBCASE("missing csv is reported by name") {
    const std::string dir = temp_dir("mmg_ds_missing");
    std::filesystem::create_directories(dir);
    std::ofstream(dir + "/manifest.json")
        << "{\"provenance\":\"ingested\",\"tests\":{\"T9\":{"
           "\"kind\":\"drained-triaxial\",\"sign\":-1,\"b\":0.0,"
           "\"p0\":-200.0,\"e0\":0.6,\"n_steps\":10,"
           "\"target_strain\":0.1}}}";
    try {
      load_dataset(dir);
      CHECK(false);
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("T9.csv") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
  }
  SUBCASE("column mismatch is reported with the row") {
    const std::string dir = temp_dir("mmg_ds_cols");
    std::filesystem::create_directories(dir);
    std::ofstream(dir + "/manifest.json")
        << "{\"provenance\":\"ingested\",\"tests\":{\"T1\":{"
           "\"kind\":\"drained-triaxial\",\"sign\":-1,\"b\":0.0,"
           "\"p0\":-200.0,\"e0\":0.6,\"n_steps\":10,"
           "\"target_strain\":0.1}}}";
    std::ofstream csv(dir + "/T1.csv");
    csv << "step,eps11,eps22,eps33,eps12,eps23,eps13,"
           "sig11,sig22,sig33,sig12,sig23,sig13,e,p,q,theta\n";
    csv << "0,1,2,3\n";
    csv.close();
    try {
      load_dataset(dir);
      CHECK(false);
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      CHECK(msg.find("row 2") != std::string::npos);
      CHECK(msg.find("17") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
  }
  SUBCASE("duplicate ids are rejected") {
    Dataset ds;
    ds.add("T1", TestRecord{});
    CHECK_THROWS(ds.add("T1", TestRecord{}));
  }
}

TEST_CASE("stand-in dataset") {
  // small version for test speed
  const Dataset ds = experiment2_standin(42, 0.005, 150);
  CHECK(ds.ids.size() == 30);
  CHECK(ds.provenance == "ingested");
  const Dataset ds2 = experiment2_standin(42, 0.005, 150);
  CHECK(ds2.fingerprint == ds.fingerprint);  // deterministic for a seed

  // noise perturbs stresses by roughly the configured fraction
  const TestRecord& rec = ds.at("T1");
  CHECK(rec.q.back() > 100.0);
  CHECK(rec.void_ratio.back() != rec.void_ratio.front());
}
