import logging

import numpy as np
from scipy.special import expit

from core.exceptions import SchemaError, SingularityError

from .models import GlmFit, PenaltySpec

logger = logging.getLogger(__name__)

SEPARATION_LIMIT = 30.0
SEPARATION_EPS = 1e-6
MAX_HALVINGS = 40
LASSO_MAX_SWEEPS = 1000


def _design(values):
    return np.column_stack([np.ones(values.shape[0]), values])


def _deviance(design, label, theta):
    eta = design @ theta
    return 2.0 * float(np.sum(np.logaddexp(0.0, eta) - label * eta))


def _penalty_value(theta, penalty):
    slopes = theta[1:]
    if penalty.kind == 'ridge':
        return penalty.lam * float(slopes @ slopes)
    if penalty.kind == 'lasso':
        return penalty.lam * float(np.abs(slopes).sum())
    return 0.0


def _objective(design, label, theta, penalty):
    """Negative log-likelihood plus penalty"""
    return 0.5 * _deviance(design, label, theta) + _penalty_value(theta, penalty)


def _null_deviance(label):
    rate = label.mean()
    if rate in (0.0, 1.0):
        return 0.0
    return -2.0 * float(np.sum(label * np.log(rate) + (1 - label) * np.log(1 - rate)))


def _separation_message(label, probability):
    """Text of the separation warning when the likelihood has no finite maximizer, else None"""
    if label.min() == label.max():
        return f"separation: every label is {int(label[0])}, the intercept diverges"
    if np.max(np.abs(label - probability)) < SEPARATION_EPS:
        return "separation: fitted probabilities reproduce the labels exactly"
    return None


def _newton(design, label, penalty, tol, max_iter):
    """(Penalized) IRLS with step halving on the objective

    Returns theta, iterations, converged flag, deviance trace and warnings.
    """
    n_params = design.shape[1]
    ridge = np.zeros(n_params)
    if penalty.kind == 'ridge':
        ridge[1:] = 2.0 * penalty.lam

    theta = np.zeros(n_params)
    current = _objective(design, label, theta, penalty)
    trace = [_deviance(design, label, theta)]
    warnings = []
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        probability = expit(design @ theta)
        gradient = design.T @ (label - probability) - ridge * theta
        if np.max(np.abs(gradient)) < tol:
            converged = True
            iteration -= 1
            break

        weights = probability * (1.0 - probability)
        hessian = (design.T * weights) @ design + np.diag(ridge)
        try:
            step = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hessian, gradient, rcond=None)[0]

        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = theta + scale * step
            value = _objective(design, label, candidate, penalty)
            if value <= current + 1e-12 * max(1.0, abs(current)):
                break
            scale *= 0.5
        else:
            # No decrease at machine precision: theta is already optimal.
            converged = True
            break

        theta, current = candidate, value
        trace.append(_deviance(design, label, theta))

        if np.max(np.abs(theta)) > SEPARATION_LIMIT:
            message = (
                f"separation: coefficients diverge (|theta| > {SEPARATION_LIMIT:g}) "
                f"after {iteration} iterations"
            )
            logger.warning(message)
            warnings.append(message)
            break

    if converged:
        message = _separation_message(label, expit(design @ theta))
        if message:
            logger.warning(message)
            warnings.append(message)
            converged = False
    if not converged and not warnings:
        warnings.append(f"IRLS did not reach tolerance {tol:g} in {max_iter} iterations")
        logger.warning(warnings[-1])
    return theta, iteration, converged, tuple(trace), tuple(warnings)


def _soft_threshold(value, threshold):
    return np.sign(value) * max(abs(value) - threshold, 0.0)


def _lasso(design, label, penalty, tol, max_iter):
    """Proximal Newton: IRLS quadratic model minimized by coordinate descent"""
    n_params = design.shape[1]
    theta = np.zeros(n_params)
    rate = label.mean()
    if 0.0 < rate < 1.0:
        theta[0] = np.log(rate / (1.0 - rate))
    current = _objective(design, label, theta, penalty)
    trace = [_deviance(design, label, theta)]
    warnings = []
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        eta = design @ theta
        probability = expit(eta)
        weights = np.clip(probability * (1.0 - probability), 1e-10, None)
        working = eta + (label - probability) / weights

        target = theta.copy()
        residual = working - design @ target
        column_weight = (design ** 2 * weights[:, None]).sum(axis=0)
        for _ in range(LASSO_MAX_SWEEPS):
            largest = 0.0
            for j in range(n_params):
                if column_weight[j] == 0.0:
                    continue
                old = target[j]
                rho = float(design[:, j] @ (weights * residual)) + column_weight[j] * old
                new = rho / column_weight[j] if j == 0 else _soft_threshold(rho, penalty.lam) / column_weight[j]
                if new != old:
                    residual -= design[:, j] * (new - old)
                    target[j] = new
                    largest = max(largest, abs(new - old))
            if largest < tol:
                break

        direction = target - theta
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = theta + scale * direction
            value = _objective(design, label, candidate, penalty)
            if value <= current + 1e-12 * abs(current):
                break
            scale *= 0.5
        else:
            converged = True
            break

        change = np.max(np.abs(candidate - theta))
        theta, current = candidate, value
        trace.append(_deviance(design, label, theta))
        if change < tol:
            converged = True
            break
        if np.max(np.abs(theta)) > SEPARATION_LIMIT:
            warnings.append(f"separation: coefficients diverge (|theta| > {SEPARATION_LIMIT:g})")
            logger.warning(warnings[-1])
            break

    if converged:
        message = _separation_message(label, expit(design @ theta))
        if message:
            logger.warning(message)
            warnings.append(message)
            converged = False

    return theta, iteration, converged, tuple(trace), tuple(warnings)


def fit_logistic(data, penalty=None, tol=1e-8, max_iter=100):
    """Fit P(Y=1|x) = logistic(theta_0 + theta^T x) to a dataset

    Unpenalized fits use raw features and carry Wald inference. Penalized
    fits standardize the features, penalize the slopes only and report the
    coefficients back on the raw scale.
    """
    penalty = penalty or PenaltySpec()
    values = np.asarray(data.values, dtype=float)
    label = np.asarray(data.label, dtype=float)

    if not penalty.is_penalized:
        design = _design(values)
        rank = np.linalg.matrix_rank(design)
        if rank < design.shape[1]:
            raise SingularityError(
                f"design matrix has rank {rank} < {design.shape[1]} columns; "
                f"drop collinear or constant features or use a penalty"
            )
        theta, iterations, converged, trace, warnings = _newton(design, label, penalty, tol, max_iter)
        probability = expit(design @ theta)
        information = (design.T * (probability * (1.0 - probability))) @ design
        try:
            covariance = np.linalg.inv(information)
        except np.linalg.LinAlgError:
            covariance = np.linalg.pinv(information)
        covariance = 0.5 * (covariance + covariance.T)
    else:
        center = values.mean(axis=0)
        scale = values.std(axis=0)
        scale[scale == 0.0] = 1.0
        design = _design((values - center) / scale)
        solver = _lasso if penalty.kind == 'lasso' else _newton
        standardized, iterations, converged, trace, warnings = solver(design, label, penalty, tol, max_iter)
        theta = np.empty_like(standardized)
        theta[1:] = standardized[1:] / scale
        theta[0] = standardized[0] - float(theta[1:] @ center)
        covariance = None

    fit = GlmFit(
        feature_names=data.feature_names,
        coefficients=theta,
        covariance=covariance,
        penalty=penalty,
        iterations=iterations,
        converged=converged,
        deviance=_deviance(_design(values), label, theta),
        null_deviance=_null_deviance(label),
        n_obs=values.shape[0],
        deviance_trace=trace,
        warnings=warnings,
    )
    logger.info(
        f"GLM fit ({penalty}) n={fit.n_obs} iterations={iterations} "
        f"deviance={fit.deviance:.4f} converged={converged}"
    )
    return fit


def predict_proba(fit, data):
    """Positive-class probabilities for the rows of `data`"""
    if tuple(data.feature_names) != fit.feature_names:
        raise SchemaError(
            f"columns {list(data.feature_names)} do not match the fitted columns {list(fit.feature_names)}"
        )
    return fit.predict(data.values)


def odds_ratio_table(fit):
    """(feature, OR, CI95) for every slope: OR = exp(theta), CI = exp(theta +/- 1.96 SE)"""
    return fit.odds_ratios()


def score_vector(fit, data):
    """Gradient of the log-likelihood at the fitted coefficients"""
    design = _design(np.asarray(data.values, dtype=float))
    return design.T @ (np.asarray(data.label, dtype=float) - expit(design @ fit.coefficients))
