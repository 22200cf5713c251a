#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace epwa {

enum class SmoothKind { univariate, tensor2, random_intercept, linear_term };

// One-dimensional low-rank thin-plate-style basis: a linear column plus
// |x - knot|^3 radial parts reparameterized onto the null space of the
// polynomial constraints, so every basis function is exactly linear beyond
// the knot range. Columns are centered over the training data (sum-to-zero
// identifiability; the model carries a free intercept).
struct MarginalBasis {
  Eigen::VectorXd knots;      // k, strictly increasing
  Eigen::MatrixXd nullspace;  // k x (k-2), null basis of [1 knots]^T delta = 0
  Eigen::VectorXd col_means;  // k-1 training column means

  int cols() const { return int(knots.size()) - 1; }

  // Centered design rows at arbitrary covariate values (n x (k-1)).
  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;

  // Second-derivative energy penalty; exact zero row/col for the linear
  // direction, so the null space after constraint absorption is exactly 1-d.
  Eigen::MatrixXd penalty() const;

  // Knots at rank evenly spaced quantiles of x. Requires >= rank distinct
  // values and distinct resulting knots.
  static MarginalBasis build(const Eigen::VectorXd& x, int rank);
};

struct BasisBlock {
  SmoothKind kind = SmoothKind::univariate;
  std::vector<std::string> vars;             // feature name(s) or grouping factor
  Eigen::MatrixXd design;                    // n x cols, training evaluation
  std::vector<Eigen::MatrixXd> penalties;    // one per smoothing parameter

  MarginalBasis margin1, margin2;            // margin1 alone for univariate
  Eigen::MatrixXd interaction_correction;    // tensor2: (1+p1+p2) x p1*p2
  std::vector<std::string> levels;           // random_intercept levels (sorted)

  // Coefficient count; independent of whether the training design is loaded.
  int cols() const {
    switch (kind) {
      case SmoothKind::univariate: return margin1.cols();
      case SmoothKind::tensor2: return margin1.cols() * margin2.cols();
      case SmoothKind::random_intercept: return int(levels.size());
      case SmoothKind::linear_term: return 1;
    }
    return 0;
  }

  Eigen::MatrixXd eval_univariate(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd eval_tensor(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) const;
  // Indicator rows; levels unseen in training evaluate to all-zero rows.
  Eigen::MatrixXd eval_levels(const std::vector<std::string>& groups) const;
  Eigen::MatrixXd eval_linear(const Eigen::VectorXd& x) const;
};

BasisBlock build_univariate(const Eigen::VectorXd& x, int rank);

// Row-wise tensor product of the two constrained margins, orthogonalized
// against [1 | margin1 | margin2] over the training rows so the block holds
// interaction structure beyond the additive effects. Two penalty components,
// one per margin (Kronecker with the identity on the other margin).
BasisBlock build_tensor2(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                         int rank1, int rank2);

// Indicator design with an identity (ridge) penalty: i.i.d. Gaussian random
// intercepts as a penalized block.
BasisBlock build_random_intercept(const std::vector<std::string>& groups);

BasisBlock build_linear_term(const Eigen::VectorXd& x, const std::string& name);

}  // namespace epwa
