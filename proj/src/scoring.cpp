#include "mmg/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace mmg {

std::string ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["score"] = score;
  j["a_calibration"] = a_cal;
  j["a_prediction"] = a_pred;
  j["thermodynamic_admissibility"] = thermo;
  j["percentile"] = percentile;
  j["eps_crit"] = eps_crit;
  if (!failure.empty()) j["failure"] = failure;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [id, mse] : per_test_mse) per[id] = mse;
  j["per_test_mean_mse"] = per;
  return j.dump(2);
}

FeatureScaler FeatureScaler::fit(const std::vector<const TestRecord*>& recs) {
  FeatureScaler s;
  s.mean.fill(0.0);
  s.std.fill(0.0);
  std::size_t n = 0;
  for (const auto* r : recs) n += r->stress.size();
  if (n == 0) throw std::invalid_argument("cannot fit scaler on empty data");
  for (const auto* r : recs)
    for (const auto& sig : r->stress)
      for (int i = 0; i < 6; ++i) s.mean[i] += sig[i] / (double)n;
  for (const auto* r : recs)
    for (const auto& sig : r->stress)
      for (int i = 0; i < 6; ++i) {
        const double d = sig[i] - s.mean[i];
        s.std[i] += d * d / (double)n;
      }
  double smax = 0.0;
  for (int i = 0; i < 6; ++i) {
    s.std[i] = std::sqrt(s.std[i]);
    smax = std::max(smax, s.std[i]);
  }
  // Constant features (unsheared components) fall back to the global scale.
  const double floor = std::max(1e-3 * smax, 1e-9);
  for (auto& v : s.std) v = std::max(v, floor);
  return s;
}

std::vector<double> sample_mse(const TestRecord& model_rec,
                               const TestRecord& data_rec,
                               const FeatureScaler& scaling, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  const std::size_t n_model = model_rec.steps();
  if (n_model * stride != data_rec.steps())
    throw std::invalid_argument(
        "record length mismatch: " + std::to_string(n_model) + " steps vs " +
        std::to_string(data_rec.steps()) + " at stride " +
        std::to_string(stride));
  std::vector<double> mse;
  mse.reserve(n_model);
  for (std::size_t k = 1; k <= n_model; ++k) {
    const SymmetricTensor2& a = model_rec.stress[k];
    const SymmetricTensor2& b = data_rec.stress[k * stride];
    double acc = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double d = scaling.scaled(i, a[i]) - scaling.scaled(i, b[i]);
      acc += d * d;
    }
    mse.push_back(acc / 6.0);
  }
  return mse;
}

double ecdf_percentile(std::vector<double> mse_list, double percentile) {
  if (mse_list.empty())
    throw std::invalid_argument("percentile of an empty list");
  std::sort(mse_list.begin(), mse_list.end());
  const std::size_t n = mse_list.size();
  std::size_t rank = (std::size_t)std::ceil(percentile / 100.0 * (double)n);
  rank = std::clamp<std::size_t>(rank, 1, n);
  return mse_list[rank - 1];
}

double accuracy(const std::vector<double>& mse_list, const ScoreConfig& cfg) {
  const double eps_p = ecdf_percentile(mse_list, cfg.percentile);
  const double v = std::log(std::max(eps_p, cfg.eps_crit)) /
                   std::log(cfg.eps_crit);
  return std::max(v, 0.0);
}

int thermodynamic_check(const std::vector<const TestRecord*>& model_records) {
  for (const auto* r : model_records) {
    if (!r->has_diagnostics())
      throw std::invalid_argument(
          "thermodynamic check needs model-produced records");
    for (std::size_t k = 0; k < r->d_eps_p.size(); ++k) {
      const double diss = r->stress[k].ddot(r->d_eps_p[k]);
      const double tol =
          1e-8 * r->stress[k].norm() * r->d_eps_p[k].norm() + 1e-12;
      if (diss < -tol) return 0;
    }
  }
  return 1;
}

TestRecord evaluate_model_on(const ModelGraph& model, const TestRecord& data,
                             const ScoreConfig& cfg, int* stride_out) {
  const int data_steps = (int)data.steps();
  int stride = 1;
  if (cfg.eval_steps > 0 && data_steps > cfg.eval_steps &&
      data_steps % cfg.eval_steps == 0)
    stride = data_steps / cfg.eval_steps;
  if (stride_out) *stride_out = stride;
  TestProtocol pr = data.protocol;
  pr.n_steps = data_steps / stride;
  ModelGraph m = model;
  return run_test(m, pr, cfg.substepping);
}

ScoreReport model_score(const ModelGraph& model,
                        const std::vector<const TestRecord*>& calibration,
                        const std::vector<const TestRecord*>& validation,
                        const ScoreConfig& cfg) {
  ScoreReport rep;
  rep.percentile = cfg.percentile;
  rep.eps_crit = cfg.eps_crit;
  const FeatureScaler scaler = FeatureScaler::fit(calibration);

  std::vector<double> cal_mse, pred_mse;
  std::vector<TestRecord> model_runs;
  auto run_split = [&](const std::vector<const TestRecord*>& split,
                       std::vector<double>& out) {
    for (const auto* data : split) {
      int stride = 1;
      TestRecord mr = evaluate_model_on(model, *data, cfg, &stride);
      const auto mse = sample_mse(mr, *data, scaler, stride);
      const double mean =
          std::accumulate(mse.begin(), mse.end(), 0.0) / mse.size();
      rep.per_test_mse.emplace_back(data->protocol_id, mean);
      out.insert(out.end(), mse.begin(), mse.end());
      model_runs.push_back(std::move(mr));
    }
  };
  try {
    run_split(calibration, cal_mse);
    run_split(validation, pred_mse);
  } catch (const std::exception& ex) {
    rep.failure = ex.what();
    rep.score = 0.0;
    return rep;
  }

  std::vector<const TestRecord*> run_ptrs;
  for (const auto& r : model_runs) run_ptrs.push_back(&r);
  rep.thermo = thermodynamic_check(run_ptrs);
  rep.a_cal = accuracy(cal_mse, cfg);
  rep.a_pred = pred_mse.empty() ? 0.0 : accuracy(pred_mse, cfg);
  rep.score = rep.thermo *
              (cfg.weights[0] * rep.a_cal + cfg.weights[1] * rep.a_pred);
  return rep;
}

// ---------------------------------------------------------------------------
// calibration
// ---------------------------------------------------------------------------

namespace {

struct ParamMap {
  std::vector<ParamSpec> specs;

  std::size_t dim() const { return specs.size(); }

  double to_value(std::size_t i, double x) const {
    const auto& s = specs[i];
    const double t = std::clamp(x, 0.0, 1.0);
    if (s.log_scale) {
      const double lo = std::max(s.lo, 1e-300);
      return lo * std::pow(s.hi / lo, t);
    }
    return s.lo + (s.hi - s.lo) * t;
  }

  ParameterVector vector(const std::vector<double>& x,
                         const ParameterVector& base) const {
    ParameterVector pv = base;
    for (std::size_t i = 0; i < specs.size(); ++i)
      pv.set(specs[i].name, to_value(i, x[i]));
    return pv;
  }
};

// Penalized objective: mean sample MSE over the calibration set plus a
// quadratic penalty for leaving the unit box.
struct Objective {
  const ModelGraph& proto;
  const std::vector<const TestRecord*>& cal;
  const FeatureScaler& scaler;
  const ScoreConfig& cfg;
  const ParamMap& map;
  long evals = 0;

  double operator()(const std::vector<double>& x) {
    ++evals;
    double penalty = 0.0;
    for (double v : x) {
      if (v < 0.0) penalty += v * v;
      if (v > 1.0) penalty += (v - 1.0) * (v - 1.0);
    }
    ModelGraph m = proto;
    m.params() = map.vector(x, proto.params());
    double total = 0.0;
    std::size_t n = 0;
    try {
      for (const auto* data : cal) {
        int stride = 1;
        TestRecord mr = evaluate_model_on(m, *data, cfg, &stride);
        const auto mse = sample_mse(mr, *data, scaler, stride);
        total = std::accumulate(mse.begin(), mse.end(), total);
        n += mse.size();
      }
    } catch (const std::exception&) {
      return 1e6 + 1e3 * penalty;
    }
    return total / std::max<std::size_t>(n, 1) + 1e3 * penalty;
  }
};

struct NmResult {
  std::vector<double> x;
  double f = 0.0;
};

// Nelder-Mead on the unit box.
NmResult nelder_mead(Objective& obj, const std::vector<double>& x0,
                     long budget) {
  const std::size_t d = x0.size();
  const double step = 0.15;
  std::vector<std::vector<double>> xs(d + 1, x0);
  std::vector<double> fs(d + 1);
  for (std::size_t i = 0; i < d; ++i)
    xs[i + 1][i] = std::clamp(x0[i] + (x0[i] > 0.7 ? -step : step), 0.0, 1.0);
  const long start_evals = obj.evals;
  for (std::size_t i = 0; i <= d; ++i) fs[i] = obj(xs[i]);

  auto order = [&] {
    std::vector<std::size_t> idx(d + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<std::vector<double>> xs2;
    std::vector<double> fs2;
    for (auto i : idx) {
      xs2.push_back(xs[i]);
      fs2.push_back(fs[i]);
    }
    xs = xs2;
    fs = fs2;
  };

  while (obj.evals - start_evals < budget) {
    order();
    if (fs[d] - fs[0] < 1e-14 * (std::abs(fs[0]) + 1e-14)) break;
    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) centroid[j] += xs[i][j] / (double)d;
    auto blend = [&](double c) {
      std::vector<double> x(d);
      for (std::size_t j = 0; j < d; ++j)
        x[j] = centroid[j] + c * (centroid[j] - xs[d][j]);
      return x;
    };
    auto xr = blend(1.0);
    const double fr = obj(xr);
    if (fr < fs[0]) {
      auto xe = blend(2.0);
      const double fe = obj(xe);
      if (fe < fr) {
        xs[d] = xe;
        fs[d] = fe;
      } else {
        xs[d] = xr;
        fs[d] = fr;
      }
    } else if (fr < fs[d - 1]) {
      xs[d] = xr;
      fs[d] = fr;
    } else {
      auto xc = blend(fr < fs[d] ? 0.5 : -0.5);
      const double fc = obj(xc);
      if (fc < std::min(fr, fs[d])) {
        xs[d] = xc;
        fs[d] = fc;
      } else {
        // shrink toward the best vertex
        for (std::size_t i = 1; i <= d; ++i) {
          for (std::size_t j = 0; j < d; ++j)
            xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]);
          fs[i] = obj(xs[i]);
        }
      }
    }
  }
  order();
  return {xs[0], fs[0]};
}

// Least-squares fit of the elastic parameters on the earliest increments of
// each record; used to anchor models whose other components are regressors.
void prefit_elasticity(ModelGraph& model,
                       const std::vector<const TestRecord*>& cal) {
  std::vector<ParamSpec> especs = edge_choice(model.selection().e).params;
  ParamMap map{especs};
  struct Local {
    const std::vector<const TestRecord*>& cal;
    const ModelGraph& proto;
    const ParamMap& map;
    long evals = 0;
    double operator()(const std::vector<double>& x) {
      ++evals;
      ModelGraph m = proto;
      m.params() = map.vector(x, proto.params());
      double total = 0.0;
      for (const auto* r : cal) {
        PlasticInternalVariables piv;
        piv.void_ratio = r->void_ratio.front();
        const std::size_t n_use = std::min<std::size_t>(3, r->steps());
        for (std::size_t k = 0; k < n_use; ++k) {
          const StressInvariants inv = invariants(r->stress[k]);
          ElasticModuli em;
          try {
            em = m.moduli(inv, piv);
          } catch (const std::exception&) {
            return 1e9;
          }
          const Tensor4 ce = Tensor4::isotropic(em.K, em.G);
          const SymmetricTensor2 d_eps = r->strain[k + 1] - r->strain[k];
          const SymmetricTensor2 resid =
              (r->stress[k + 1] - r->stress[k]) - ce.apply(d_eps);
          total += resid.ddot(resid);
        }
      }
      return total;
    }
  } local{cal, model, map};

  std::vector<double> best_x(map.dim(), 0.5);
  double best_f = 1e300;
  for (double s : {0.25, 0.5, 0.75}) {
    std::vector<double> x0(map.dim(), s);
    // reuse the simplex through a thin adapter
    Objective* unused = nullptr;
    (void)unused;
    const std::size_t d = map.dim();
    std::vector<std::vector<double>> xs(d + 1, x0);
    std::vector<double> fs(d + 1);
    for (std::size_t i = 0; i < d; ++i)
      xs[i + 1][i] = std::clamp(x0[i] + 0.2, 0.0, 1.0);
    for (std::size_t i = 0; i <= d; ++i) fs[i] = local(xs[i]);
    for (int it = 0; it < 200; ++it) {
      std::size_t hi = 0, lo = 0;
      for (std::size_t i = 1; i <= d; ++i) {
        if (fs[i] > fs[hi]) hi = i;
        if (fs[i] < fs[lo]) lo = i;
      }
      if (fs[hi] - fs[lo] < 1e-16 * (std::abs(fs[lo]) + 1e-16)) break;
      std::vector<double> centroid(d, 0.0);
      for (std::size_t i = 0; i <= d; ++i)
        if (i != hi)
          for (std::size_t j = 0; j < d; ++j)
            centroid[j] += xs[i][j] / (double)d;
      std::vector<double> xr(d);
      for (std::size_t j = 0; j < d; ++j)
        xr[j] = std::clamp(2.0 * centroid[j] - xs[hi][j], 0.0, 1.0);
      const double fr = local(xr);
      if (fr < fs[hi]) {
        xs[hi] = xr;
        fs[hi] = fr;
      } else {
        for (std::size_t i = 0; i <= d; ++i) {
          if (i == lo) continue;
          for (std::size_t j = 0; j < d; ++j)
            xs[i][j] = xs[lo][j] + 0.5 * (xs[i][j] - xs[lo][j]);
          fs[i] = local(xs[i]);
        }
      }
    }
    std::size_t lo = 0;
    for (std::size_t i = 1; i <= d; ++i)
      if (fs[i] < fs[lo]) lo = i;
    if (fs[lo] < best_f) {
      best_f = fs[lo];
      best_x = xs[lo];
    }
  }
  model.params() = map.vector(best_x, model.params());
}

}  // namespace

CalibrationResult calibrate(ModelGraph& model,
                            const std::vector<const TestRecord*>& calibration,
                            const CalibrationOptions& opts) {
  if (calibration.empty())
    throw std::invalid_argument("calibration set is empty");
  CalibrationResult result;

  // Seed all parameters at the midpoint of their admissible ranges.
  ParameterVector midpoint = midpoint_params(model.selection());
  midpoint.merge(model.params());
  ParameterVector start = midpoint;
  model.params() = start;

  const bool has_regressor = model.uses_regressor();
  if (has_regressor) {
    prefit_elasticity(model, calibration);
    std::vector<PathSequence> seqs;
    for (const auto* r : calibration) seqs.push_back(record_to_sequence(*r));
    const auto rows =
        compute_inverse_targets(seqs, model.selection().e, model.params());
    std::shared_ptr<const NeuralEdge> flow, hard;
    NeuralTrainOptions nt = opts.neural;
    nt.seed = opts.seed;
    if (model.selection().p == EdgeId::PNN ||
        model.selection().l == EdgeId::LNN)
      flow = std::make_shared<NeuralEdge>(
          train_neural_edge(rows, RegressionTarget::FlowDirection, nt));
    if (model.selection().h == EdgeId::HNN)
      hard = std::make_shared<NeuralEdge>(
          train_neural_edge(rows, RegressionTarget::HardeningModulus, nt));
    model.attach_regressors(flow, flow, hard);
  }

  // Free analytic parameters: everything the selection declares, minus the
  // elastic block when it was anchored by the regression prefit.
  std::vector<ParamSpec> free_specs;
  for (const auto& s : merged_param_specs(model.selection())) {
    bool is_elastic = false;
    for (const auto& es : edge_choice(model.selection().e).params)
      if (es.name == s.name) is_elastic = true;
    if (has_regressor && is_elastic) continue;
    free_specs.push_back(s);
  }

  const FeatureScaler scaler = FeatureScaler::fit(calibration);
  if (free_specs.empty() || opts.budget_per_restart <= 0 ||
      opts.restarts <= 0) {
    Objective probe{model, calibration, scaler, opts.eval, ParamMap{{}}, 0};
    result.objective = probe(std::vector<double>{});
    result.evaluations = probe.evals;
    model.set_calibrated(true);
    return result;
  }

  ParamMap map{free_specs};
  Objective obj{model, calibration, scaler, opts.eval, map, 0};

  std::mt19937_64 rng(opts.seed);
  std::vector<double> best_x;
  double best_f = 1e300;
  for (int restart = 0; restart < opts.restarts; ++restart) {
    std::vector<double> x0(map.dim(), 0.5);
    if (restart > 0) {
      // latin-hypercube style spread across the unit box
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (std::size_t j = 0; j < map.dim(); ++j)
        x0[j] = ((restart - 1 + u(rng)) / std::max(1, opts.restarts - 1));
    }
    NmResult r = nelder_mead(obj, x0, opts.budget_per_restart);
    if (r.f < best_f) {
      best_f = r.f;
      best_x = r.x;
    }
  }
  for (auto& v : best_x) v = std::clamp(v, 0.0, 1.0);
  model.params() = map.vector(best_x, model.params());
  model.set_calibrated(true);
  result.objective = best_f;
  result.evaluations = obj.evals;
  result.budget_exhausted =
      obj.evals >= (long)opts.restarts * opts.budget_per_restart;
  return result;
}

}  // namespace mmg
