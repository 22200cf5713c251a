#pragma once

#include <Eigen/Dense>

namespace epwa {

// Mean clamp applied inside every likelihood evaluation.
inline constexpr double kMuGuard = 1e-9;

// Beta log-likelihood under the mean/precision parameterization
// (shape1 = mu*phi, shape2 = (1-mu)*phi), summed over observations.
// Domains: y and mu elementwise in (0,1), phi > 0.
double beta_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi);

// Score and expected information with respect to the logit-link linear
// predictor eta: u_i = dl/deta_i, w_i = E[-d^2 l/deta_i^2] (always positive).
void beta_eta_derivs(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi,
                     Eigen::VectorXd& u, Eigen::VectorXd& w);

// First and second derivative of the log-likelihood in ln(phi).
double beta_dl_dlnphi(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi);
double beta_d2l_dlnphi2(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi);

// Deviance: 2 * (saturated loglik at mu = y minus loglik at mu), same phi.
double beta_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi);

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace epwa
