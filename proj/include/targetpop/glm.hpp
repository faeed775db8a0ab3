#pragma once

#include <Eigen/Dense>
#include <string>

#include "targetpop/errors.hpp"

namespace targetpop {

// Canonical-link families only; the weighted-regression doubly robust
// estimator needs the canonical link to stay doubly robust.
enum class GlmFamily { gaussian_identity, binomial_logit };

const char* family_name(GlmFamily family);

struct GlmOptions {
  double score_tol = 1e-8;      // infinity norm of the weighted score
  double coef_rel_tol = 1e-10;  // max relative coefficient change per step
  // score at or below this is treated as solved outright; flat-likelihood
  // directions can keep coefficients drifting without moving the fit
  double score_floor = 1e-12;
  int max_iterations = 100;
  double separation_cap = 30.0;  // logit scale; expit saturates well before
};

struct FittedGlm {
  GlmFamily family = GlmFamily::gaussian_identity;
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  // infinity norm of the weighted score at the solution, with the weights
  // normalized to mean one (the scale fit_glm iterates on)
  double max_score = 0.0;
};

class GlmError : public NumericalError {
 public:
  enum class Kind { non_convergence, separation, rank_deficient };

  GlmError(Kind kind, const std::string& msg, int iterations = 0,
           double max_score = 0.0, Eigen::Index column = -1)
      : NumericalError(msg),
        kind(kind),
        iterations(iterations),
        max_score(max_score),
        column(column) {}

  Kind kind;
  int iterations;
  double max_score;
  Eigen::Index column;  // offending design column for separation/rank failures
};

double expit(double x);

// Weighted maximum quasi-likelihood fit by iteratively reweighted least
// squares (Newton scoring). Deterministic for fixed inputs. Throws GlmError
// on non-convergence, separation, or a rank-deficient design, and
// InputError on malformed inputs (dimension mismatch, non-finite values,
// out-of-range responses, no positive weight).
FittedGlm fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd& weights, GlmFamily family,
                  const GlmOptions& options = {});

// Unit-weight convenience overload.
FittedGlm fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  GlmFamily family, const GlmOptions& options = {});

// Mean-scale predictions: the linear predictor for the identity link,
// expit of it for the logit link.
Eigen::VectorXd predict_mean(const FittedGlm& model, const Eigen::MatrixXd& design);

// Weighted score sum_i w_i x_i (y_i - mean(x_i' coef)); the estimating
// equations solved by fit_glm.
Eigen::VectorXd weighted_score(const Eigen::MatrixXd& design,
                               const Eigen::VectorXd& response,
                               const Eigen::VectorXd& weights, GlmFamily family,
                               const Eigen::VectorXd& coefficients);

// Weighted log-(quasi-)likelihood whose gradient is weighted_score:
// gaussian -sum w_i (y_i - eta_i)^2 / 2, binomial sum w_i (y_i eta_i - log(1+e^eta_i)).
double weighted_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                       const Eigen::VectorXd& weights, GlmFamily family,
                       const Eigen::VectorXd& coefficients);

}  // namespace targetpop
