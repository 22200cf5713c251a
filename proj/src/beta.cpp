#include "epwa/beta.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

#include "epwa/errors.hpp"

namespace epwa {

namespace {

using boost::math::digamma;
using boost::math::lgamma;
using boost::math::trigamma;

void check_domains(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi) {
  if (!(phi > 0.0) || !std::isfinite(phi))
    fail_invalid("beta likelihood: phi must be positive and finite");
  if (y.size() != mu.size())
    fail_invalid("beta likelihood: y and mu length mismatch");
  for (long i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0 && y[i] < 1.0))
      fail_invalid("beta likelihood: response outside (0,1)");
    if (!(mu[i] > 0.0 && mu[i] < 1.0))
      fail_invalid("beta likelihood: mean outside (0,1)");
  }
}

double guard(double m) { return std::min(std::max(m, kMuGuard), 1.0 - kMuGuard); }

}  // namespace

double beta_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi) {
  check_domains(y, mu, phi);
  const double lgphi = lgamma(phi);
  double ll = 0.0;
  for (long i = 0; i < y.size(); ++i) {
    const double m = guard(mu[i]);
    const double a = m * phi;
    const double b = (1.0 - m) * phi;
    ll += lgphi - lgamma(a) - lgamma(b) + (a - 1.0) * std::log(y[i]) +
          (b - 1.0) * std::log1p(-y[i]);
  }
  return ll;
}

void beta_eta_derivs(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi,
                     Eigen::VectorXd& u, Eigen::VectorXd& w) {
  check_domains(y, mu, phi);
  const long n = y.size();
  u.resize(n);
  w.resize(n);
  for (long i = 0; i < n; ++i) {
    const double m = guard(mu[i]);
    const double a = m * phi;
    const double b = (1.0 - m) * phi;
    const double ystar = std::log(y[i]) - std::log1p(-y[i]);
    const double mustar = digamma(a) - digamma(b);
    const double dmu = m * (1.0 - m);  // logit link
    u[i] = phi * (ystar - mustar) * dmu;
    w[i] = phi * phi * (trigamma(a) + trigamma(b)) * dmu * dmu;
  }
}

double beta_dl_dlnphi(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi) {
  check_domains(y, mu, phi);
  const double dgphi = digamma(phi);
  double d = 0.0;
  for (long i = 0; i < y.size(); ++i) {
    const double m = guard(mu[i]);
    d += dgphi - m * digamma(m * phi) - (1.0 - m) * digamma((1.0 - m) * phi) +
         m * std::log(y[i]) + (1.0 - m) * std::log1p(-y[i]);
  }
  return phi * d;  // chain rule onto ln(phi)
}

double beta_d2l_dlnphi2(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi) {
  check_domains(y, mu, phi);
  const double tgphi = trigamma(phi);
  double d2 = 0.0;
  for (long i = 0; i < y.size(); ++i) {
    const double m = guard(mu[i]);
    d2 += tgphi - m * m * trigamma(m * phi) -
          (1.0 - m) * (1.0 - m) * trigamma((1.0 - m) * phi);
  }
  // d^2 l / d(ln phi)^2 = phi^2 * l'' + phi * l'
  return phi * phi * d2 + beta_dl_dlnphi(y, mu, phi);
}

double beta_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi) {
  return 2.0 * (beta_loglik(y, y, phi) - beta_loglik(y, mu, phi));
}

}  // namespace epwa
