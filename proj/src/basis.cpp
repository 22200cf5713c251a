#include "epwa/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "epwa/errors.hpp"

namespace epwa {

namespace {

double cube(double r) { return r * r * r; }

// Raw (uncentered) design: [x, |x-knot|^3 * Z].
Eigen::MatrixXd raw_design(const Eigen::VectorXd& x, const Eigen::VectorXd& knots,
                           const Eigen::MatrixXd& nullspace) {
  const int n = int(x.size());
  const int k = int(knots.size());
  Eigen::MatrixXd radial(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) radial(i, j) = cube(std::fabs(x[i] - knots[j]));
  Eigen::MatrixXd out(n, k - 1);
  out.col(0) = x;
  out.rightCols(k - 2) = radial * nullspace;
  return out;
}

}  // namespace

MarginalBasis MarginalBasis::build(const Eigen::VectorXd& x, int rank) {
  const int n = int(x.size());
  if (rank < 3) fail_invalid("univariate basis: rank must be at least 3");
  std::vector<double> sorted(x.data(), x.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const long distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  if (distinct < rank)
    fail_invalid("univariate basis: fewer than " + std::to_string(rank) +
                 " distinct covariate values");
  sorted.resize(std::size_t(distinct));

  // Knots at rank evenly spaced quantiles (type-7) of the distinct values.
  MarginalBasis mb;
  mb.knots.resize(rank);
  for (int j = 0; j < rank; ++j) {
    const double h = double(j) / double(rank - 1) * double(distinct - 1);
    const long lo = long(std::floor(h));
    const long hi = std::min(lo + 1, long(distinct - 1));
    mb.knots[j] = sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
  }
  for (int j = 1; j < rank; ++j)
    if (!(mb.knots[j] > mb.knots[j - 1]))
      fail_invalid("univariate basis: quantile knots are not distinct");

  // Null basis of the polynomial constraints [1 knots]^T delta = 0.
  Eigen::MatrixXd T(rank, 2);
  T.col(0).setOnes();
  T.col(1) = mb.knots;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(T);
  Eigen::MatrixXd Q = qr.householderQ();
  mb.nullspace = Q.rightCols(rank - 2);

  Eigen::MatrixXd raw = raw_design(x, mb.knots, mb.nullspace);
  mb.col_means = raw.colwise().mean();
  return mb;
}

Eigen::MatrixXd MarginalBasis::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd d = raw_design(x, knots, nullspace);
  d.rowwise() -= col_means.transpose();
  return d;
}

Eigen::MatrixXd MarginalBasis::penalty() const {
  const int k = int(knots.size());
  Eigen::MatrixXd E(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) E(i, j) = cube(std::fabs(knots[i] - knots[j]));
  // integral of f''^2 for the natural cubic radial expansion
  Eigen::MatrixXd core = 12.0 * nullspace.transpose() * E * nullspace;
  core = 0.5 * (core + core.transpose()).eval();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k - 1, k - 1);
  S.bottomRightCorner(k - 2, k - 2) = core;
  return S;
}

BasisBlock build_univariate(const Eigen::VectorXd& x, int rank) {
  BasisBlock b;
  b.kind = SmoothKind::univariate;
  b.margin1 = MarginalBasis::build(x, rank);
  b.design = b.margin1.eval(x);
  b.penalties = {b.margin1.penalty()};
  return b;
}

Eigen::MatrixXd BasisBlock::eval_univariate(const Eigen::VectorXd& x) const {
  return margin1.eval(x);
}

BasisBlock build_tensor2(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                         int rank1, int rank2) {
  if (x1.size() != x2.size())
    fail_invalid("tensor basis: margins have different lengths");
  BasisBlock b;
  b.kind = SmoothKind::tensor2;
  b.margin1 = MarginalBasis::build(x1, rank1);
  b.margin2 = MarginalBasis::build(x2, rank2);

  const Eigen::MatrixXd M1 = b.margin1.eval(x1);
  const Eigen::MatrixXd M2 = b.margin2.eval(x2);
  const int n = int(x1.size());
  const int p1 = int(M1.cols()), p2 = int(M2.cols());

  Eigen::MatrixXd T(n, p1 * p2);
  for (int a = 0; a < p1; ++a)
    for (int c = 0; c < p2; ++c)
      T.col(a * p2 + c) = M1.col(a).cwiseProduct(M2.col(c));

  // Project out the additive main-effect space over the training rows; the
  // correction is stored as a coefficient matrix so the block stays a
  // function of (x1, x2).
  Eigen::MatrixXd U(n, 1 + p1 + p2);
  U.col(0).setOnes();
  U.middleCols(1, p1) = M1;
  U.rightCols(p2) = M2;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(U);
  b.interaction_correction = qr.solve(T);
  b.design = T - U * b.interaction_correction;

  const Eigen::MatrixXd P1 = b.margin1.penalty();
  const Eigen::MatrixXd P2 = b.margin2.penalty();
  Eigen::MatrixXd S1 = Eigen::MatrixXd::Zero(p1 * p2, p1 * p2);
  Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(p1 * p2, p1 * p2);
  for (int a = 0; a < p1; ++a)
    for (int c = 0; c < p1; ++c)
      S1.block(a * p2, c * p2, p2, p2) =
          P1(a, c) * Eigen::MatrixXd::Identity(p2, p2);
  for (int a = 0; a < p1; ++a)
    S2.block(a * p2, a * p2, p2, p2) = P2;
  b.penalties = {S1, S2};
  return b;
}

Eigen::MatrixXd BasisBlock::eval_tensor(const Eigen::VectorXd& x1,
                                        const Eigen::VectorXd& x2) const {
  const Eigen::MatrixXd M1 = margin1.eval(x1);
  const Eigen::MatrixXd M2 = margin2.eval(x2);
  const int n = int(x1.size());
  const int p1 = int(M1.cols()), p2 = int(M2.cols());
  Eigen::MatrixXd T(n, p1 * p2);
  for (int a = 0; a < p1; ++a)
    for (int c = 0; c < p2; ++c)
      T.col(a * p2 + c) = M1.col(a).cwiseProduct(M2.col(c));
  Eigen::MatrixXd U(n, 1 + p1 + p2);
  U.col(0).setOnes();
  U.middleCols(1, p1) = M1;
  U.rightCols(p2) = M2;
  return T - U * interaction_correction;
}

BasisBlock build_random_intercept(const std::vector<std::string>& groups) {
  std::set<std::string> uniq(groups.begin(), groups.end());
  if (uniq.size() < 2)
    fail_invalid("random intercept: grouping factor has fewer than 2 levels");
  BasisBlock b;
  b.kind = SmoothKind::random_intercept;
  b.levels.assign(uniq.begin(), uniq.end());
  b.design = b.eval_levels(groups);
  b.penalties = {Eigen::MatrixXd::Identity(long(b.levels.size()), long(b.levels.size()))};
  return b;
}

Eigen::MatrixXd BasisBlock::eval_levels(const std::vector<std::string>& groups) const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(long(groups.size()), long(levels.size()));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto it = std::lower_bound(levels.begin(), levels.end(), groups[i]);
    if (it != levels.end() && *it == groups[i])
      d(long(i), it - levels.begin()) = 1.0;
  }
  return d;
}

BasisBlock build_linear_term(const Eigen::VectorXd& x, const std::string& name) {
  BasisBlock b;
  b.kind = SmoothKind::linear_term;
  b.vars = {name};
  b.design = x;
  return b;
}

Eigen::MatrixXd BasisBlock::eval_linear(const Eigen::VectorXd& x) const { return x; }

}  // namespace epwa
