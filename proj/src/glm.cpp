#include "targetpop/glm.hpp"

#include <cmath>
#include <sstream>

namespace targetpop {

namespace {

void check_inputs(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd& weights, GlmFamily family) {
  if (design.rows() != response.size() || design.rows() != weights.size())
    throw InputError("fit_glm: design rows, response, and weights must agree");
  if (design.rows() < design.cols())
    throw InputError("fit_glm: need at least as many rows as columns");
  if (!design.allFinite() || !response.allFinite() || !weights.allFinite())
    throw InputError("fit_glm: non-finite values in design, response, or weights");
  if ((weights.array() < 0.0).any())
    throw InputError("fit_glm: negative weights");
  if ((weights.array() > 0.0).count() == 0)
    throw InputError("fit_glm: need at least one positive weight");
  if (family == GlmFamily::binomial_logit) {
    for (Eigen::Index i = 0; i < response.size(); ++i) {
      if (response(i) != 0.0 && response(i) != 1.0)
        throw InputError("fit_glm: binomial responses must be 0 or 1");
    }
  }
}

Eigen::VectorXd mean_from_eta(const Eigen::VectorXd& eta, GlmFamily family) {
  if (family == GlmFamily::gaussian_identity) return eta;
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) mu(i) = expit(eta(i));
  return mu;
}

}  // namespace

const char* family_name(GlmFamily family) {
  return family == GlmFamily::gaussian_identity ? "gaussian_identity"
                                                : "binomial_logit";
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd weighted_score(const Eigen::MatrixXd& design,
                               const Eigen::VectorXd& response,
                               const Eigen::VectorXd& weights, GlmFamily family,
                               const Eigen::VectorXd& coefficients) {
  const Eigen::VectorXd mu = mean_from_eta(design * coefficients, family);
  return design.transpose() * (weights.array() * (response - mu).array()).matrix();
}

double weighted_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                       const Eigen::VectorXd& weights, GlmFamily family,
                       const Eigen::VectorXd& coefficients) {
  const Eigen::VectorXd eta = design * coefficients;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    if (family == GlmFamily::gaussian_identity) {
      const double r = response(i) - eta(i);
      ll -= 0.5 * weights(i) * r * r;
    } else {
      // log(1 + e^eta) computed stably for either sign of eta
      const double softplus =
          eta(i) > 0.0 ? eta(i) + std::log1p(std::exp(-eta(i)))
                       : std::log1p(std::exp(eta(i)));
      ll += weights(i) * (response(i) * eta(i) - softplus);
    }
  }
  return ll;
}

FittedGlm fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd& raw_weights, GlmFamily family,
                  const GlmOptions& options) {
  check_inputs(design, response, raw_weights, family);
  // Coefficients are invariant to rescaling the weights; normalizing to mean
  // one makes the absolute score tolerance meaningful on any weight scale.
  const Eigen::VectorXd weights = raw_weights / raw_weights.mean();
  const Eigen::Index p = design.cols();

  FittedGlm fit;
  fit.family = family;
  fit.coefficients = Eigen::VectorXd::Zero(p);

  double last_rel_change = std::numeric_limits<double>::infinity();
  double loglik = weighted_loglik(design, response, weights, family, fit.coefficients);
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd eta = design * fit.coefficients;
    const Eigen::VectorXd mu = mean_from_eta(eta, family);
    const Eigen::VectorXd score =
        design.transpose() * (weights.array() * (response - mu).array()).matrix();
    const double score_norm = score.size() > 0 ? score.lpNorm<Eigen::Infinity>() : 0.0;

    if (score_norm <= options.score_tol &&
        (last_rel_change <= options.coef_rel_tol ||
         score_norm <= options.score_floor)) {
      if (family == GlmFamily::binomial_logit &&
          last_rel_change > options.coef_rel_tol) {
        // Floor-level score with drifting coefficients: distinguish an
        // ill-conditioned but finite optimum from perfect separation, where
        // every row carrying weight sits saturated at its observed label.
        bool separated = true;
        for (Eigen::Index i = 0; i < eta.size() && separated; ++i) {
          if (weights(i) <= 0.0) continue;
          const double signed_eta = (2.0 * response(i) - 1.0) * eta(i);
          const double residual = weights(i) * std::abs(response(i) - mu(i));
          if (signed_eta < 15.0 && residual > options.score_floor)
            separated = false;
        }
        if (separated) {
          Eigen::Index worst = 0;
          fit.coefficients.cwiseAbs().maxCoeff(&worst);
          std::ostringstream msg;
          msg << "fit_glm(binomial_logit): perfectly separated fit (column "
              << worst << " drives saturated predictions)";
          throw GlmError(GlmError::Kind::separation, msg.str(), iter, score_norm,
                         worst);
        }
      }
      fit.converged = true;
      fit.iterations = iter;
      fit.max_score = score_norm;
      return fit;
    }
    if (iter == options.max_iterations) {
      std::ostringstream msg;
      msg << "fit_glm(" << family_name(family) << "): no convergence after "
          << iter << " iterations (score " << score_norm << ")";
      throw GlmError(GlmError::Kind::non_convergence, msg.str(), iter, score_norm);
    }

    // Newton scoring step: solve (X' W_irls X) d = score via the normal
    // equations with a rank-revealing factorization.
    Eigen::VectorXd irls_w(weights.size());
    if (family == GlmFamily::gaussian_identity) {
      irls_w = weights;
    } else {
      irls_w = weights.array() * mu.array() * (1.0 - mu.array());
    }
    const Eigen::MatrixXd info =
        design.transpose() * irls_w.asDiagonal() * design;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(info);
    if (qr.rank() < p) {
      const Eigen::Index bad = qr.colsPermutation().indices()(p - 1);
      std::ostringstream msg;
      msg << "fit_glm(" << family_name(family)
          << "): rank-deficient design (column " << bad << ")";
      throw GlmError(GlmError::Kind::rank_deficient, msg.str(), iter, score_norm, bad);
    }
    Eigen::VectorXd step = qr.solve(score);

    // step halving keeps the quasi-likelihood non-decreasing (Newton can
    // overshoot when the logit surface is nearly flat)
    Eigen::VectorXd candidate = fit.coefficients + step;
    double candidate_ll =
        weighted_loglik(design, response, weights, family, candidate);
    const double slack = 1e-10 * std::max(1.0, std::abs(loglik));
    for (int halving = 0; candidate_ll < loglik - slack && halving < 30;
         ++halving) {
      step *= 0.5;
      candidate = fit.coefficients + step;
      candidate_ll = weighted_loglik(design, response, weights, family, candidate);
    }
    fit.coefficients = candidate;
    loglik = candidate_ll;

    last_rel_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double rel =
          std::abs(step(j)) / std::max(1.0, std::abs(fit.coefficients(j)));
      last_rel_change = std::max(last_rel_change, rel);
    }

    if (family == GlmFamily::binomial_logit) {
      for (Eigen::Index j = 0; j < p; ++j) {
        if (std::abs(fit.coefficients(j)) > options.separation_cap) {
          std::ostringstream msg;
          msg << "fit_glm(binomial_logit): coefficient for column " << j
              << " exceeded " << options.separation_cap
              << " (likely separation)";
          throw GlmError(GlmError::Kind::separation, msg.str(), iter, score_norm, j);
        }
      }
    }
  }
  // unreachable
  throw GlmError(GlmError::Kind::non_convergence, "fit_glm: internal loop exit");
}

FittedGlm fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  GlmFamily family, const GlmOptions& options) {
  return fit_glm(design, response, Eigen::VectorXd::Ones(design.rows()), family,
                 options);
}

Eigen::VectorXd predict_mean(const FittedGlm& model, const Eigen::MatrixXd& design) {
  if (design.cols() != model.coefficients.size())
    throw InputError("predict_mean: design columns do not match coefficients");
  return mean_from_eta(design * model.coefficients, model.family);
}

}  // namespace targetpop
