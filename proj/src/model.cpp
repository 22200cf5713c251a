#include "epwa/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "epwa/beta.hpp"
#include "epwa/errors.hpp"
#include "epwa/model_json.hpp"

namespace epwa {

using json = nlohmann::ordered_json;

std::string to_string(ModelStructure s) {
  switch (s) {
    case ModelStructure::linear: return "linear";
    case ModelStructure::smooths: return "smooths";
    case ModelStructure::smooths_re: return "smooths_re";
    case ModelStructure::smooths_re_int: return "smooths_re_int";
  }
  return "?";
}

ModelStructure parse_structure(const std::string& s) {
  if (s == "linear") return ModelStructure::linear;
  if (s == "smooths") return ModelStructure::smooths;
  if (s == "smooths_re") return ModelStructure::smooths_re;
  if (s == "smooths_re_int") return ModelStructure::smooths_re_int;
  fail_invalid("unknown model structure: " + s);
}

std::string to_string(Grouping g) {
  return g == Grouping::country ? "country" : "region";
}

Grouping parse_grouping(const std::string& s) {
  if (s == "country") return Grouping::country;
  if (s == "region") return Grouping::region;
  fail_invalid("unknown grouping: " + s);
}

// ---- data assembly ----

ModelData join_labels_features(const LabelSet& labels,
                               const std::vector<UnitFeatures>& features) {
  std::map<std::pair<std::string, int>, const UnitFeatures*> index;
  for (const auto& f : features) index[{f.unit_id, f.year}] = &f;

  std::string missing;
  long n_missing = 0;
  const long n = long(labels.records.size());
  ModelData d;
  d.y.resize(n);
  d.x.resize(n, 4);
  d.unit.reserve(n);
  d.country.reserve(n);
  d.region.reserve(n);
  d.year.reserve(n);
  long row = 0;
  for (const auto& r : labels.records) {
    auto it = index.find({r.unit_id, r.year});
    if (it == index.end()) {
      if (n_missing < 20)
        missing += (missing.empty() ? "" : ", ") + r.unit_id + "/" + std::to_string(r.year);
      ++n_missing;
      continue;
    }
    const UnitFeatures& f = *it->second;
    d.y[row] = squeeze_response(r.epwa);
    d.x(row, 0) = f.ln_rural_prop;
    d.x(row, 1) = f.ln_pop_density;
    d.x(row, 2) = f.ln_gdp_median;
    d.x(row, 3) = f.ln_agland;
    d.unit.push_back(r.unit_id);
    d.country.push_back(r.country_iso3);
    d.region.push_back(r.region_code);
    d.year.push_back(r.year);
    ++row;
  }
  if (n_missing > 0)
    fail_invalid("join: " + std::to_string(n_missing) +
                 " labels without a feature row on (unit_id, year): " + missing);
  return d;
}

namespace {

FitMetrics metrics_impl(const FittedModel& model, const ModelData& data, bool strict);

struct PenaltyComp {
  int offset = 0;
  Eigen::MatrixXd S;  // local, size x size
};

struct Assembly {
  Eigen::MatrixXd X;  // n x P, intercept first
  std::vector<std::pair<int, int>> block_spans;
  std::vector<PenaltyComp> comps;
};

std::vector<BasisBlock> build_blocks(const ModelSpec& spec, const ModelData& data) {
  std::vector<BasisBlock> blocks;
  if (spec.structure == ModelStructure::linear) {
    for (int j = 0; j < 4; ++j)
      blocks.push_back(build_linear_term(data.x.col(j), kFeatureNames[size_t(j)]));
    return blocks;
  }
  for (int j = 0; j < 4; ++j) {
    BasisBlock b = build_univariate(data.x.col(j), spec.univariate_rank);
    b.vars = {kFeatureNames[size_t(j)]};
    blocks.push_back(std::move(b));
  }
  if (spec.structure == ModelStructure::smooths_re_int) {
    for (const auto& [a, c] : kTensorPairs) {
      BasisBlock b = build_tensor2(data.x.col(a), data.x.col(c), spec.tensor_rank,
                                   spec.tensor_rank);
      b.vars = {kFeatureNames[size_t(a)], kFeatureNames[size_t(c)]};
      blocks.push_back(std::move(b));
    }
  }
  if (spec.structure == ModelStructure::smooths_re ||
      spec.structure == ModelStructure::smooths_re_int) {
    const auto& groups =
        spec.grouping == Grouping::country ? data.country : data.region;
    BasisBlock b = build_random_intercept(groups);
    b.vars = {to_string(spec.grouping)};
    blocks.push_back(std::move(b));
  }
  return blocks;
}

Assembly assemble(const std::vector<BasisBlock>& blocks, long n) {
  int p = 1;
  for (const auto& b : blocks) p += b.cols();
  Assembly a;
  a.X.resize(n, p);
  a.X.col(0).setOnes();
  int off = 1;
  for (const auto& b : blocks) {
    a.X.middleCols(off, b.cols()) = b.design;
    a.block_spans.emplace_back(off, b.cols());
    for (const auto& S : b.penalties) a.comps.push_back({off, S});
    off += b.cols();
  }
  return a;
}

Eigen::MatrixXd total_penalty(int p, const std::vector<PenaltyComp>& comps,
                              const std::vector<double>& lambda) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const int off = comps[c].offset;
    const int sz = int(comps[c].S.rows());
    S.block(off, off, sz, sz) += lambda[c] * comps[c].S;
  }
  return S;
}

struct PirlsResult {
  Eigen::VectorXd gamma;
  double phi = 1.0;
  double loglik = 0.0;
  double deviance = 0.0;
  double edf = 0.0;
  int irls_iterations = 0;
  int phi_updates = 0;
  bool converged = false;
  std::vector<double> trace;  // accepted penalized log-likelihood values
  Eigen::MatrixXd cov;
};

Eigen::VectorXd mu_of(const Eigen::VectorXd& eta) {
  Eigen::VectorXd mu(eta.size());
  for (long i = 0; i < eta.size(); ++i)
    mu[i] = std::min(std::max(logistic(eta[i]), kMuGuard), 1.0 - kMuGuard);
  return mu;
}

// Penalized IRLS for fixed smoothing parameters; phi is profiled by Newton
// steps on ln(phi) when profile_phi is set. Every accepted step must not
// decrease the penalized log-likelihood (step halving on both gamma and phi
// updates). The lambda search runs with phi frozen so the deviance stays
// comparable across candidates.
PirlsResult pirls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<PenaltyComp>& comps,
                  const std::vector<double>& lambda, const ModelSpec& spec,
                  const Eigen::VectorXd* warm_gamma, double warm_phi,
                  bool want_cov, bool profile_phi = true) {
  const int p = int(X.cols());
  const Eigen::MatrixXd S = total_penalty(p, comps, lambda);

  PirlsResult res;
  if (warm_gamma && warm_gamma->size() == p) {
    res.gamma = *warm_gamma;
    res.phi = warm_phi;
  } else {
    res.gamma = Eigen::VectorXd::Zero(p);
    const double ybar = y.mean();
    res.gamma[0] = logit(std::min(std::max(ybar, kResponseEps), 1.0 - kResponseEps));
    res.phi = spec.phi_init;
  }

  Eigen::VectorXd eta = X * res.gamma;
  auto penalty_of = [&](const Eigen::VectorXd& g) { return 0.5 * g.dot(S * g); };
  auto pll_of = [&](const Eigen::VectorXd& g, const Eigen::VectorXd& e, double phi) {
    return beta_loglik(y, mu_of(e), phi) - penalty_of(g);
  };

  double pll = pll_of(res.gamma, eta, res.phi);
  res.trace.push_back(pll);
  double dev = beta_deviance(y, mu_of(eta), res.phi);

  Eigen::VectorXd u, w;
  const int max_outer = 40;
  bool inner_done = false;
  for (int outer = 0; outer < max_outer; ++outer) {
    // inner IRLS at fixed phi
    inner_done = false;
    int inner = 0;
    while (inner < spec.max_inner) {
      ++inner;
      ++res.irls_iterations;
      const Eigen::VectorXd mu = mu_of(eta);
      beta_eta_derivs(y, mu, res.phi, u, w);
      const Eigen::VectorXd z = eta + u.cwiseQuotient(w);
      const Eigen::MatrixXd Xw = w.cwiseSqrt().asDiagonal() * X;
      Eigen::MatrixXd M = Xw.transpose() * Xw + S;
      const Eigen::VectorXd rhs = X.transpose() * w.cwiseProduct(z);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
      if (ldlt.info() != Eigen::Success) {
        M.diagonal().array() += 1e-8;
        ldlt.compute(M);
      }
      const Eigen::VectorXd gamma_new = ldlt.solve(rhs);

      // step halving towards the proposal
      Eigen::VectorXd step = gamma_new - res.gamma;
      double scale = 1.0;
      bool accepted = false;
      for (int h = 0; h < 10; ++h) {
        const Eigen::VectorXd cand = res.gamma + scale * step;
        const Eigen::VectorXd eta_c = X * cand;
        const double pll_c = pll_of(cand, eta_c, res.phi);
        if (pll_c >= pll - 1e-12 * (std::fabs(pll) + 1.0)) {
          res.gamma = cand;
          eta = eta_c;
          pll = pll_c;
          accepted = true;
          break;
        }
        scale *= 0.5;
      }
      if (!accepted) break;  // stalled; treat as converged at this phi
      res.trace.push_back(pll);

      const double dev_new = beta_deviance(y, mu_of(eta), res.phi);
      const bool small = std::fabs(dev_new - dev) <= spec.tol * (std::fabs(dev_new) + 0.1);
      dev = dev_new;
      if (small) { inner_done = true; break; }
    }
    if (!inner_done && inner >= spec.max_inner) break;
    if (!profile_phi) {
      res.converged = inner_done;
      break;
    }

    // profile Newton step on ln(phi)
    const Eigen::VectorXd mu = mu_of(eta);
    const double ll_now = beta_loglik(y, mu, res.phi);
    const double g = beta_dl_dlnphi(y, mu, res.phi);
    const double h = beta_d2l_dlnphi2(y, mu, res.phi);
    double delta = (h < -1e-300) ? -g / h : (g > 0 ? 0.5 : -0.5);
    delta = std::min(std::max(delta, -2.0), 2.0);
    double scale = 1.0;
    double phi_new = res.phi;
    for (int hh = 0; hh < 10; ++hh) {
      // phi bounded away from 0 and infinity; degenerate responses push the
      // profile likelihood toward an unbounded precision
      const double cand =
          std::min(std::max(std::exp(std::log(res.phi) + scale * delta), 1e-4), 1e8);
      if (beta_loglik(y, mu, cand) >= ll_now) { phi_new = cand; break; }
      scale *= 0.5;
    }
    const double rel_move = std::fabs(std::log(phi_new) - std::log(res.phi));
    if (phi_new != res.phi) {
      res.phi = phi_new;
      ++res.phi_updates;
      pll = pll_of(res.gamma, eta, res.phi);
      res.trace.push_back(pll);
      dev = beta_deviance(y, mu_of(eta), res.phi);
    }
    if (inner_done && rel_move < 1e-9) { res.converged = true; break; }
  }

  // converged-state quantities
  const Eigen::VectorXd mu = mu_of(eta);
  beta_eta_derivs(y, mu, res.phi, u, w);
  const Eigen::MatrixXd Xw = w.cwiseSqrt().asDiagonal() * X;
  const Eigen::MatrixXd A = Xw.transpose() * Xw;
  Eigen::MatrixXd M = A + S;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success) {
    M.diagonal().array() += 1e-8;
    ldlt.compute(M);
  }
  res.edf = ldlt.solve(A).trace();
  res.loglik = beta_loglik(y, mu, res.phi);
  res.deviance = beta_deviance(y, mu, res.phi);
  if (want_cov)
    res.cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  return res;
}

double gcv_of(const PirlsResult& r, long n) {
  const double denom = double(n) - r.edf;
  if (denom <= 1e-6) return std::numeric_limits<double>::infinity();
  return double(n) * r.deviance / (denom * denom);
}

// Coordinate-wise GCV minimization over a log-spaced grid; candidates scan in
// ascending order with strict improvement, so ties resolve to the smallest
// lambda.
std::vector<double> select_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const std::vector<PenaltyComp>& comps,
                                  const ModelSpec& spec) {
  const std::size_t m = comps.size();
  std::vector<double> lambda(m, 1.0);
  if (m == 0) return lambda;
  if (spec.fixed_lambda) {
    std::fill(lambda.begin(), lambda.end(), *spec.fixed_lambda);
    return lambda;
  }
  const auto& gr = spec.lambda_grid;
  std::vector<double> grid(std::size_t(gr.points));
  for (int i = 0; i < gr.points; ++i) {
    const double e = gr.log10_min +
                     double(i) * (gr.log10_max - gr.log10_min) / double(gr.points - 1);
    grid[std::size_t(i)] = std::pow(10.0, e);
  }
  // Pilot fit profiles phi once; the grid scan holds it fixed so GCV values
  // are comparable across candidates.
  const PirlsResult pilot = pirls(X, y, comps, lambda, spec, nullptr, spec.phi_init, false);
  const double phi_ref = pilot.phi;
  Eigen::VectorXd warm = pilot.gamma;
  for (int sweep = 0; sweep < gr.sweeps; ++sweep) {
    for (std::size_t c = 0; c < m; ++c) {
      double best_gcv = std::numeric_limits<double>::infinity();
      double best_g = lambda[c];
      for (double g : grid) {
        lambda[c] = g;
        const PirlsResult r =
            pirls(X, y, comps, lambda, spec, &warm, phi_ref, false, false);
        warm = r.gamma;
        const double gcv = gcv_of(r, y.size());
        if (gcv < best_gcv) {
          best_gcv = gcv;
          best_g = g;
        }
      }
      lambda[c] = best_g;
    }
  }
  return lambda;
}

}  // namespace

FittedModel fit_model_data(const ModelSpec& spec, const ModelData& data) {
  const long n = data.n();
  if (n < 50) fail_invalid("fit: needs at least 50 joined rows, got " + std::to_string(n));
  for (long i = 0; i < n; ++i)
    if (!(data.y[i] > 0.0 && data.y[i] < 1.0))
      fail_invalid("fit: responses must lie in (0,1) after squeezing");

  FittedModel m;
  m.spec = spec;
  m.blocks = build_blocks(spec, data);
  Assembly a = assemble(m.blocks, n);

  m.lambda = select_lambda(a.X, data.y, a.comps, spec);
  PirlsResult r = pirls(a.X, data.y, a.comps, m.lambda, spec, nullptr, spec.phi_init, true);
  if (!r.converged)
    fail_numeric("fit: IRLS did not converge (deviance " + std::to_string(r.deviance) +
                 " after " + std::to_string(r.irls_iterations) + " iterations)");

  m.coef = r.gamma;
  m.phi = r.phi;
  m.coef_cov = r.cov;
  m.diagnostics.deviance = r.deviance;
  m.diagnostics.edf = r.edf;
  m.diagnostics.loglik = r.loglik;
  m.diagnostics.irls_iterations = r.irls_iterations;
  m.diagnostics.phi_updates = r.phi_updates;
  m.diagnostics.converged = r.converged;
  m.diagnostics.penalized_loglik_trace = r.trace;

  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    if (m.blocks[b].kind != SmoothKind::random_intercept) continue;
    const auto [off, sz] = a.block_spans[b];
    auto& table = spec.grouping == Grouping::country ? m.country_effects : m.region_effects;
    for (int l = 0; l < sz; ++l) table[m.blocks[b].levels[std::size_t(l)]] = m.coef[off + l];
  }
  for (int j = 0; j < 4; ++j)
    m.train_range[kFeatureNames[size_t(j)]] = {data.x.col(j).minCoeff(),
                                               data.x.col(j).maxCoeff()};
  m.train_metrics = metrics_impl(m, data, false);
  return m;
}

FittedModel fit_model(const ModelSpec& spec, const LabelSet& labels,
                      const std::vector<UnitFeatures>& features) {
  return fit_model_data(spec, join_labels_features(labels, features));
}

FittedModel fit_with_region_table_data(const ModelSpec& spec, const ModelData& data) {
  FittedModel primary = fit_model_data(spec, data);
  if (!primary.has_random_effects()) return primary;
  ModelSpec other = spec;
  other.grouping = spec.grouping == Grouping::country ? Grouping::region : Grouping::country;
  const FittedModel secondary = fit_model_data(other, data);
  if (spec.grouping == Grouping::country)
    primary.region_effects = secondary.region_effects;
  else
    primary.country_effects = secondary.country_effects;
  return primary;
}

FittedModel fit_with_region_table(const ModelSpec& spec, const LabelSet& labels,
                                  const std::vector<UnitFeatures>& features) {
  return fit_with_region_table_data(spec, join_labels_features(labels, features));
}

// ---- prediction ----

double FittedModel::link_fixed(const std::array<double, 4>& feats) const {
  Eigen::VectorXd x1(1);
  double eta = intercept();
  int off = 1;
  for (const auto& b : blocks) {
    if (b.kind == SmoothKind::random_intercept) {
      off += b.cols();
      continue;
    }
    const auto seg = coef.segment(off, b.cols());
    switch (b.kind) {
      case SmoothKind::linear_term: {
        const int j = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[0]) -
                          kFeatureNames.begin());
        eta += feats[std::size_t(j)] * seg[0];
        break;
      }
      case SmoothKind::univariate: {
        const int j = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[0]) -
                          kFeatureNames.begin());
        x1[0] = feats[std::size_t(j)];
        eta += (b.eval_univariate(x1) * seg)(0);
        break;
      }
      case SmoothKind::tensor2: {
        const int j1 = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[0]) -
                           kFeatureNames.begin());
        const int j2 = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[1]) -
                           kFeatureNames.begin());
        Eigen::VectorXd xa(1), xb(1);
        xa[0] = feats[std::size_t(j1)];
        xb[0] = feats[std::size_t(j2)];
        eta += (b.eval_tensor(xa, xb) * seg)(0);
        break;
      }
      default: break;
    }
    off += b.cols();
  }
  return eta;
}

std::pair<double, EffectSource> FittedModel::random_effect(
    const std::string& country_iso3, const std::string& region_code) const {
  if (!has_random_effects()) return {0.0, EffectSource::fixed_only};
  auto it = country_effects.find(country_iso3);
  if (it != country_effects.end()) return {it->second, EffectSource::country};
  auto rt = region_effects.find(region_code);
  if (rt != region_effects.end()) return {rt->second, EffectSource::region};
  return {0.0, EffectSource::none};
}

Prediction FittedModel::predict_one(const std::array<double, 4>& feats,
                                    const std::string& country_iso3,
                                    const std::string& region_code) const {
  for (double v : feats)
    if (!std::isfinite(v)) fail_invalid("predict: feature values must be finite");
  const auto [delta, source] = random_effect(country_iso3, region_code);
  const double eta = link_fixed(feats) + delta;
  Prediction p;
  p.mu = std::min(std::max(logistic(eta), kMuGuard), 1.0 - kMuGuard);
  p.source = source;
  return p;
}

Eigen::VectorXd FittedModel::predict_mu(const ModelData& data) const {
  const long n = data.n();
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, intercept());
  int off = 1;
  for (const auto& b : blocks) {
    const auto seg = coef.segment(off, b.cols());
    switch (b.kind) {
      case SmoothKind::linear_term: {
        const int j = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[0]) -
                          kFeatureNames.begin());
        eta += data.x.col(j) * seg[0];
        break;
      }
      case SmoothKind::univariate: {
        const int j = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[0]) -
                          kFeatureNames.begin());
        eta += b.eval_univariate(data.x.col(j)) * seg;
        break;
      }
      case SmoothKind::tensor2: {
        const int j1 = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[0]) -
                           kFeatureNames.begin());
        const int j2 = int(std::find(kFeatureNames.begin(), kFeatureNames.end(), b.vars[1]) -
                           kFeatureNames.begin());
        eta += b.eval_tensor(data.x.col(j1), data.x.col(j2)) * seg;
        break;
      }
      case SmoothKind::random_intercept:
        break;  // handled through the effect tables below
    }
    off += b.cols();
  }
  Eigen::VectorXd mu(n);
  for (long i = 0; i < n; ++i) {
    const auto [delta, src] = random_effect(data.country[std::size_t(i)],
                                            data.region[std::size_t(i)]);
    (void)src;
    mu[i] = std::min(std::max(logistic(eta[i] + delta), kMuGuard), 1.0 - kMuGuard);
  }
  return mu;
}

// ---- metrics ----

namespace {

FitMetrics metrics_impl(const FittedModel& model, const ModelData& data, bool strict) {
  const long n = data.n();
  if (n == 0) fail_invalid("metrics: empty data");
  const Eigen::VectorXd mu = model.predict_mu(data);
  const Eigen::VectorXd resid = data.y - mu;
  const double ybar = data.y.mean();
  const double sst = (data.y.array() - ybar).square().sum();
  const bool degenerate = sst <= 1e-20 * double(n);
  if (degenerate && strict)
    fail_invalid("metrics: zero variance in responses, r2 undefined");
  FitMetrics fm;
  fm.rmse = std::sqrt(resid.squaredNorm() / double(n));
  if (!degenerate) {
    fm.r2 = 1.0 - resid.squaredNorm() / sst;
    const double rbar = resid.mean();
    fm.explained_variance = 1.0 - (resid.array() - rbar).square().sum() / sst;
  }
  const double ll = beta_loglik(data.y, mu, model.phi);
  fm.aic = -2.0 * ll + 2.0 * model.diagnostics.edf;
  const double dev = beta_deviance(data.y, mu, model.phi);
  const double denom = double(n) - model.diagnostics.edf;
  fm.gcv = denom > 1e-6 ? double(n) * dev / (denom * denom)
                        : std::numeric_limits<double>::infinity();
  return fm;
}

}  // namespace

FitMetrics compute_metrics(const FittedModel& model, const ModelData& data) {
  return metrics_impl(model, data, true);
}

// ---- partial effects ----

std::vector<PartialEffectRow> export_partial_effects(const FittedModel& model,
                                                     const std::string& variable,
                                                     int grid_size) {
  if (grid_size < 2) fail_invalid("partial effects: grid_size must be >= 2");
  int off = 1;
  const BasisBlock* block = nullptr;
  int block_off = 0;
  for (const auto& b : model.blocks) {
    if (b.kind == SmoothKind::univariate && b.vars.size() == 1 && b.vars[0] == variable) {
      block = &b;
      block_off = off;
      break;
    }
    off += b.cols();
  }
  if (!block) fail_invalid("partial effects: no univariate smooth on " + variable);
  const auto range = model.train_range.at(variable);

  Eigen::VectorXd xg(grid_size);
  for (int i = 0; i < grid_size; ++i)
    xg[i] = range.first + double(i) * (range.second - range.first) / double(grid_size - 1);
  xg[grid_size - 1] = range.second;  // pin the endpoint against rounding

  const Eigen::MatrixXd B = block->eval_univariate(xg);
  const auto seg = model.coef.segment(block_off, block->cols());
  const Eigen::VectorXd effect = B * seg;
  const Eigen::MatrixXd Vb =
      model.coef_cov.block(block_off, block_off, block->cols(), block->cols());

  std::vector<PartialEffectRow> rows(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    const double var = (B.row(i) * Vb * B.row(i).transpose())(0);
    const double se = std::sqrt(std::max(var, 0.0));
    rows[std::size_t(i)] = {xg[i], effect[i], effect[i] - 2.0 * se, effect[i] + 2.0 * se};
  }
  return rows;
}

void write_partial_effects_csv(const std::vector<PartialEffectRow>& rows,
                               const std::string& path) {
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  os << "x,effect,se_lo,se_hi\n";
  char buf[4][32];
  for (const auto& r : rows) {
    std::snprintf(buf[0], 32, "%.17g", r.x);
    std::snprintf(buf[1], 32, "%.17g", r.effect);
    std::snprintf(buf[2], 32, "%.17g", r.se_lo);
    std::snprintf(buf[3], 32, "%.17g", r.se_hi);
    os << buf[0] << ',' << buf[1] << ',' << buf[2] << ',' << buf[3] << "\n";
  }
  if (!os) fail_io("write failed: " + path);
}

// ---- artifact ----

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (long j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[long(i)] = a[i].get<double>();
  return v;
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& a) {
  const long rows = long(a.size());
  const long cols = rows == 0 ? 0 : long(a[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = a[std::size_t(i)][std::size_t(j)].get<double>();
  return m;
}

json margin_to_json(const MarginalBasis& mb) {
  json j;
  j["knots"] = vec_to_json(mb.knots);
  j["nullspace"] = mat_to_json(mb.nullspace);
  j["col_means"] = vec_to_json(mb.col_means);
  return j;
}

MarginalBasis margin_from_json(const nlohmann::json& j) {
  MarginalBasis mb;
  mb.knots = vec_from_json(j.at("knots"));
  mb.nullspace = mat_from_json(j.at("nullspace"));
  mb.col_means = vec_from_json(j.at("col_means"));
  return mb;
}

std::string kind_name(SmoothKind k) {
  switch (k) {
    case SmoothKind::univariate: return "univariate";
    case SmoothKind::tensor2: return "tensor2";
    case SmoothKind::random_intercept: return "random_intercept";
    case SmoothKind::linear_term: return "linear_term";
  }
  return "?";
}

SmoothKind kind_from_name(const std::string& s) {
  if (s == "univariate") return SmoothKind::univariate;
  if (s == "tensor2") return SmoothKind::tensor2;
  if (s == "random_intercept") return SmoothKind::random_intercept;
  if (s == "linear_term") return SmoothKind::linear_term;
  fail_invalid("model artifact: unknown block kind " + s);
}

}  // namespace

nlohmann::ordered_json spec_to_json(const ModelSpec& spec) {
  json j;
  j["structure"] = to_string(spec.structure);
  j["grouping"] = to_string(spec.grouping);
  j["univariate_rank"] = spec.univariate_rank;
  j["tensor_rank"] = spec.tensor_rank;
  j["lambda_grid"] = {{"log10_min", spec.lambda_grid.log10_min},
                      {"log10_max", spec.lambda_grid.log10_max},
                      {"points", spec.lambda_grid.points},
                      {"sweeps", spec.lambda_grid.sweeps}};
  if (spec.fixed_lambda)
    j["fixed_lambda"] = *spec.fixed_lambda;
  else
    j["fixed_lambda"] = nullptr;
  j["tol"] = spec.tol;
  j["max_inner"] = spec.max_inner;
  j["phi_init"] = spec.phi_init;
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  if (j.contains("structure")) s.structure = parse_structure(j.at("structure").get<std::string>());
  if (j.contains("grouping")) s.grouping = parse_grouping(j.at("grouping").get<std::string>());
  if (j.contains("univariate_rank")) s.univariate_rank = j.at("univariate_rank").get<int>();
  if (j.contains("tensor_rank")) s.tensor_rank = j.at("tensor_rank").get<int>();
  if (j.contains("lambda_grid")) {
    const auto& g = j.at("lambda_grid");
    if (g.contains("log10_min")) s.lambda_grid.log10_min = g.at("log10_min").get<double>();
    if (g.contains("log10_max")) s.lambda_grid.log10_max = g.at("log10_max").get<double>();
    if (g.contains("points")) s.lambda_grid.points = g.at("points").get<int>();
    if (g.contains("sweeps")) s.lambda_grid.sweeps = g.at("sweeps").get<int>();
  }
  if (j.contains("fixed_lambda") && !j.at("fixed_lambda").is_null())
    s.fixed_lambda = j.at("fixed_lambda").get<double>();
  if (j.contains("tol")) s.tol = j.at("tol").get<double>();
  if (j.contains("max_inner")) s.max_inner = j.at("max_inner").get<int>();
  if (j.contains("phi_init")) s.phi_init = j.at("phi_init").get<double>();
  return s;
}

void save_model(const FittedModel& m, const std::string& path) {
  json j;
  j["format"] = "epwa-model";
  j["version"] = 1;
  j["spec"] = spec_to_json(m.spec);
  j["phi"] = m.phi;
  j["lambda"] = m.lambda;
  j["coef"] = vec_to_json(m.coef);
  json blocks = json::array();
  for (const auto& b : m.blocks) {
    json bj;
    bj["kind"] = kind_name(b.kind);
    bj["vars"] = b.vars;
    switch (b.kind) {
      case SmoothKind::univariate:
        bj["margin1"] = margin_to_json(b.margin1);
        break;
      case SmoothKind::tensor2:
        bj["margin1"] = margin_to_json(b.margin1);
        bj["margin2"] = margin_to_json(b.margin2);
        bj["interaction_correction"] = mat_to_json(b.interaction_correction);
        break;
      case SmoothKind::random_intercept:
        bj["levels"] = b.levels;
        break;
      case SmoothKind::linear_term:
        break;
    }
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);
  j["country_effects"] = m.country_effects;
  j["region_effects"] = m.region_effects;
  json tr;
  for (const auto& [k, v] : m.train_range) tr[k] = {v.first, v.second};
  j["train_range"] = std::move(tr);
  j["coef_cov"] = mat_to_json(m.coef_cov);
  j["diagnostics"] = {{"deviance", m.diagnostics.deviance},
                      {"edf", m.diagnostics.edf},
                      {"loglik", m.diagnostics.loglik},
                      {"irls_iterations", m.diagnostics.irls_iterations},
                      {"phi_updates", m.diagnostics.phi_updates},
                      {"converged", m.diagnostics.converged},
                      {"penalized_loglik_trace", m.diagnostics.penalized_loglik_trace}};
  j["train_metrics"] = {{"gcv", m.train_metrics.gcv},
                        {"aic", m.train_metrics.aic},
                        {"explained_variance", m.train_metrics.explained_variance},
                        {"r2", m.train_metrics.r2},
                        {"rmse", m.train_metrics.rmse}};
  std::ofstream os(path, std::ios::binary);
  if (!os) fail_io("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
  if (!os) fail_io("write failed: " + path);
}

FittedModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_io("cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    fail_io("model artifact parse error in " + path + ": " + e.what());
  }
  if (!j.contains("format") || j.at("format") != "epwa-model")
    fail_io("not a model artifact: " + path);
  if (j.at("version").get<int>() != 1)
    fail_io("unsupported model artifact version in " + path);

  FittedModel m;
  m.spec = spec_from_json(j.at("spec"));
  m.phi = j.at("phi").get<double>();
  m.lambda = j.at("lambda").get<std::vector<double>>();
  m.coef = vec_from_json(j.at("coef"));
  for (const auto& bj : j.at("blocks")) {
    BasisBlock b;
    b.kind = kind_from_name(bj.at("kind").get<std::string>());
    b.vars = bj.at("vars").get<std::vector<std::string>>();
    switch (b.kind) {
      case SmoothKind::univariate:
        b.margin1 = margin_from_json(bj.at("margin1"));
        b.penalties = {b.margin1.penalty()};
        break;
      case SmoothKind::tensor2: {
        b.margin1 = margin_from_json(bj.at("margin1"));
        b.margin2 = margin_from_json(bj.at("margin2"));
        b.interaction_correction = mat_from_json(bj.at("interaction_correction"));
        const int p1 = b.margin1.cols(), p2 = b.margin2.cols();
        const Eigen::MatrixXd P1 = b.margin1.penalty();
        const Eigen::MatrixXd P2 = b.margin2.penalty();
        Eigen::MatrixXd S1 = Eigen::MatrixXd::Zero(p1 * p2, p1 * p2);
        Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(p1 * p2, p1 * p2);
        for (int a = 0; a < p1; ++a)
          for (int c = 0; c < p1; ++c)
            S1.block(a * p2, c * p2, p2, p2) = P1(a, c) * Eigen::MatrixXd::Identity(p2, p2);
        for (int a = 0; a < p1; ++a) S2.block(a * p2, a * p2, p2, p2) = P2;
        b.penalties = {S1, S2};
        break;
      }
      case SmoothKind::random_intercept:
        b.levels = bj.at("levels").get<std::vector<std::string>>();
        b.penalties = {Eigen::MatrixXd::Identity(long(b.levels.size()), long(b.levels.size()))};
        break;
      case SmoothKind::linear_term:
        break;
    }
    m.blocks.push_back(std::move(b));
  }
  m.country_effects = j.at("country_effects").get<std::map<std::string, double>>();
  m.region_effects = j.at("region_effects").get<std::map<std::string, double>>();
  for (const auto& [k, v] : j.at("train_range").items())
    m.train_range[k] = {v[0].get<double>(), v[1].get<double>()};
  m.coef_cov = mat_from_json(j.at("coef_cov"));
  const auto& dj = j.at("diagnostics");
  m.diagnostics.deviance = dj.at("deviance").get<double>();
  m.diagnostics.edf = dj.at("edf").get<double>();
  m.diagnostics.loglik = dj.at("loglik").get<double>();
  m.diagnostics.irls_iterations = dj.at("irls_iterations").get<int>();
  m.diagnostics.phi_updates = dj.at("phi_updates").get<int>();
  m.diagnostics.converged = dj.at("converged").get<bool>();
  m.diagnostics.penalized_loglik_trace =
      dj.at("penalized_loglik_trace").get<std::vector<double>>();
  const auto& tj = j.at("train_metrics");
  m.train_metrics.gcv = tj.at("gcv").get<double>();
  m.train_metrics.aic = tj.at("aic").get<double>();
  m.train_metrics.explained_variance = tj.at("explained_variance").get<double>();
  m.train_metrics.r2 = tj.at("r2").get<double>();
  m.train_metrics.rmse = tj.at("rmse").get<double>();
  return m;
}

}  // namespace epwa
