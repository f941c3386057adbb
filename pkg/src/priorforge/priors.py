"""Assemble the complete default prior set for a model.

Slopes get mean-zero Normal priors whose variances come from the
correlation-scale pipeline (profile fit, quartic approximation, Taylor
variance). The intercept gets a Normal prior centered at the response mean
with variance ``var(Y) + sum_j xbar_j^2 var(beta_j)``; for non-gaussian
families the response mean and variance are link-scale quantities taken from
an intercept-only fit (``E[Y] = b0_hat`` and ``var(Y) = n var(b0_hat)``).
Cell-means coefficients are handled with the intercept scheme. The gaussian
residual sd gets Uniform(0, sqrt(var(Y))). Random-effect sds get Half-Normal
priors scaled by the prior sd of the corresponding fixed effect, computed on
an augmented model when that fixed effect is absent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DesignError, FitError, PriorForgeError
from .formula import INTERCEPT_NAME, DesignData, ModelSpec, RandomTerm, build_design
from .glm import Family, FitResult, fit_glm, profile_loglik
from .pcorr import DEGENERATE_BETA_RTOL, QUARTIC_POINT_FRACTIONS, fit_quartic
from .taylor import WIDE, RhoScale, TaylorConfig, derivatives_of_g, taylor_variance


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise PriorForgeError(f"Normal sd must be finite and positive, got {self.sigma!r}")


@dataclass(frozen=True)
class HalfNormal:
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise PriorForgeError(f"HalfNormal sd must be finite and positive, got {self.sigma!r}")


@dataclass(frozen=True)
class Uniform:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.upper > self.lower:
            raise PriorForgeError(
                f"Uniform needs upper > lower, got ({self.lower!r}, {self.upper!r})"
            )


@dataclass(frozen=True)
class PriorSpec:
    term: str
    distribution: Normal | HalfNormal | Uniform
    provenance: tuple[tuple[str, object], ...] = ()

    def prov(self) -> dict:
        return dict(self.provenance)


@dataclass(frozen=True)
class PriorSet:
    slopes: tuple[PriorSpec, ...]
    intercept_or_cellmeans: tuple[PriorSpec, ...]
    residual_sd: PriorSpec | None
    random_effects: tuple[PriorSpec, ...]
    model: ModelSpec
    n_used: int
    rows_dropped: int


def default_taylor_order(fam: Family) -> int:
    # 5th order for gaussian responses, 1st order otherwise
    return 5 if fam.kind == "gaussian" else 1


def _prov(**kw) -> tuple[tuple[str, object], ...]:
    return tuple(kw.items())


def _slope_prior_given_fit(
    design: DesignData,
    fam: Family,
    fit: FitResult,
    j: int,
    scale: RhoScale,
    config: TaylorConfig,
) -> PriorSpec:
    term = design.column_names[j]
    beta_hat = float(fit.coefficients[j])
    se = float(fit.se[j])
    if abs(beta_hat) < DEGENERATE_BETA_RTOL * se or beta_hat == 0.0:
        # symmetric perturbed points: the quartic is symmetric about beta_hat,
        # and zero-spaced points would make the basis singular
        if not se > 0:
            raise FitError(f"term {term!r}: zero standard error in degenerate fit")
        pts = np.array([-2.0, -1.0, 1.0, 2.0]) * se
    else:
        pts = np.array(QUARTIC_POINT_FRACTIONS) * beta_hat
    try:
        lls = np.array([profile_loglik(fam, design.y, design.X, j, p) for p in pts])
        q = fit_quartic(pts, lls, beta_hat, fit.max_loglik, design.n)
        derivs = derivatives_of_g(q, config.eval_point, config.order)
        var = taylor_variance(derivs, scale, config)
    except PriorForgeError as exc:
        raise type(exc)(f"term {term!r}: {exc}") from exc
    return PriorSpec(
        term=term,
        distribution=Normal(0.0, float(np.sqrt(var))),
        provenance=_prov(
            sigma_rho=scale.sigma_rho,
            taylor_order=config.order,
            eval_point=config.eval_point,
            a=q.a,
            b=q.b,
            beta_hat=q.beta_hat,
            quartic_fit_residual=q.fit_residual,
            column=j,
        ),
    )


def slope_prior(
    design: DesignData,
    fam: Family,
    j: int,
    scale: RhoScale = WIDE,
    config: TaylorConfig | None = None,
) -> PriorSpec:
    """Normal(0, sd) prior for design column j via the full pipeline."""
    if config is None:
        config = TaylorConfig(order=default_taylor_order(fam))
    fit = fit_glm(fam, design.y, design.X)
    if not fit.converged:
        raise FitError(f"full-model fit did not converge for {fam.kind} response")
    return _slope_prior_given_fit(design, fam, fit, j, scale, config)


def _link_scale_moments(design: DesignData, fam: Family) -> tuple[float, float]:
    """(E[Y], var(Y)) on the link scale.

    Gaussian: sample mean and ML variance. Otherwise from an intercept-only
    fit: the coefficient and n times its squared standard error.
    """
    if fam.kind == "gaussian":
        return float(design.y.mean()), design.var_y
    ones = np.ones((design.n, 1))
    fit = fit_glm(fam, design.y, ones)
    if not fit.converged:
        raise FitError(f"intercept-only {fam.kind} fit did not converge")
    return float(fit.coefficients[0]), float(design.n * fit.se[0] ** 2)


def intercept_prior(
    design: DesignData, fam: Family, slope_priors: Sequence[PriorSpec]
) -> PriorSpec:
    """Normal prior for the intercept given the already-computed slope priors."""
    if not design.has_intercept:
        raise PriorForgeError("model has no intercept")
    mean_y, var_y = _link_scale_moments(design, fam)
    contrib = 0.0
    for sp in slope_priors:
        col = sp.prov()["column"]
        xbar = float(design.means_x[col])
        contrib += xbar * xbar * sp.distribution.sigma**2
    var = var_y + contrib
    return PriorSpec(
        term=INTERCEPT_NAME,
        distribution=Normal(mean_y, float(np.sqrt(var))),
        provenance=_prov(mean_y=mean_y, var_y=var_y, slope_contribution=contrib),
    )


def cellmeans_priors(design: DesignData, fam: Family) -> tuple[PriorSpec, ...]:
    """One intercept-scheme prior per cell indicator (same mean and sd for all)."""
    if not design.cell_means:
        raise PriorForgeError("not a cell-means model")
    counts = design.X.sum(axis=0)
    for j, c in enumerate(counts):
        if c == 0:
            raise DesignError(f"empty cell: column {design.column_names[j]!r} has no rows")
    mean_y, var_y = _link_scale_moments(design, fam)
    dist = Normal(mean_y, float(np.sqrt(var_y)))
    prov = _prov(mean_y=mean_y, var_y=var_y, slope_contribution=0.0)
    return tuple(
        PriorSpec(term=name, distribution=dist, provenance=prov)
        for name in design.column_names
    )


def residual_sd_prior(design: DesignData) -> PriorSpec:
    """Uniform(0, sqrt(var(Y))) for the gaussian residual standard deviation."""
    if design.spec.family != "gaussian":
        raise PriorForgeError("residual sd prior applies to gaussian models only")
    if design.var_y <= 0:
        raise PriorForgeError("response is constant: residual sd prior is degenerate")
    return PriorSpec(
        term="sigma",
        distribution=Uniform(0.0, float(np.sqrt(design.var_y))),
        provenance=_prov(var_y=design.var_y),
    )


def _augmented_design(design: DesignData, aug_spec: ModelSpec) -> DesignData:
    return build_design(aug_spec, design.raw_columns)


def random_effect_prior(
    term: RandomTerm,
    design: DesignData,
    fam: Family,
    scale: RhoScale = WIDE,
    config: TaylorConfig | None = None,
    existing_priors: Mapping[str, PriorSpec] | None = None,
    scales: Mapping[str, RhoScale] | None = None,
) -> PriorSpec:
    """Half-Normal prior for a random-effect standard deviation.

    The sd parameter equals the prior sd of the corresponding fixed effect
    (the intercept prior for ``(1|g)``, the slope prior for ``(x|g)``). When
    the fixed part of the model lacks that effect, it is computed on the
    augmented model that adds it, retaining all other terms; ``scales`` maps
    terms to their correlation scales for the augmented slope priors.
    """
    if config is None:
        config = TaylorConfig(order=default_taylor_order(fam))
    existing = dict(existing_priors or {})
    scales = dict(scales or {})
    expr, group = term
    codes = design.group_indices.get(group)
    if codes is None:
        raise PriorForgeError(f"grouping column {group!r} not in design")
    if len(np.unique(codes)) < 2:
        raise DesignError(f"grouping column {group!r} has fewer than 2 levels")

    if expr == "1":
        if design.has_intercept and INTERCEPT_NAME in existing:
            sd = existing[INTERCEPT_NAME].distribution.sigma
            source = "fixed-intercept"
        else:
            aug_spec = replace(design.spec, has_intercept=True)
            aug = _augmented_design(design, aug_spec)
            fit = fit_glm(fam, aug.y, aug.X)
            if not fit.converged:
                raise FitError(f"augmented fit for (1|{group}) did not converge")
            aug_slopes = [
                _slope_prior_given_fit(
                    aug, fam, fit, j, _scale_for_column(aug, j, scales, scale), config
                )
                for j in aug.slope_columns
            ]
            sd = intercept_prior(aug, fam, aug_slopes).distribution.sigma
            source = "augmented-intercept"
    else:
        if expr in existing:
            sd = existing[expr].distribution.sigma
            source = "fixed-slope"
        else:
            aug_spec = replace(design.spec, fixed_terms=design.spec.fixed_terms + (expr,))
            aug = _augmented_design(design, aug_spec)
            fit = fit_glm(fam, aug.y, aug.X)
            if not fit.converged:
                raise FitError(f"augmented fit for ({expr}|{group}) did not converge")
            cols = aug.term_columns[expr]
            if len(cols) != 1:
                raise DesignError(f"random-slope column {expr!r} must be a single numeric column")
            sd = _slope_prior_given_fit(aug, fam, fit, cols[0], scale, config).distribution.sigma
            source = "augmented-slope"
    return PriorSpec(
        term=f"({expr}|{group})",
        distribution=HalfNormal(float(sd)),
        provenance=_prov(source=source, sigma_rho=scale.sigma_rho, taylor_order=config.order),
    )


def _scale_for_column(
    design: DesignData, j: int, scales: Mapping[str, RhoScale], default: RhoScale
) -> RhoScale:
    """Resolve the correlation scale for design column j from its owning term."""
    for term, cols in design.term_columns.items():
        if j in cols:
            return scales.get(term, default)
    return default


def _normalize_scale(value) -> RhoScale:
    if isinstance(value, RhoScale):
        return value
    if isinstance(value, str):
        return RhoScale.from_label(value)
    return RhoScale(float(value))


def build_all_priors(
    spec: ModelSpec,
    table: Mapping[str, Sequence],
    scales: Mapping[str, object] | None = None,
    default_scale: object = WIDE,
    taylor_order: int | None = None,
    eval_point: float | None = None,
) -> PriorSet:
    """Compute the full prior set for a parsed model on a columnar dataset.

    ``scales`` maps term names to `RhoScale` values, labels, or floats;
    unlisted terms use ``default_scale`` (wide unless overridden). Terms are
    independent given the full-model fit, so per-term work could run
    concurrently; it runs sequentially here and is deterministic: identical
    inputs yield bit-identical prior sets.
    """
    fam = Family(spec.family)
    scale_map = {k: _normalize_scale(v) for k, v in (scales or {}).items()}
    for name in scale_map:
        if name not in spec.fixed_terms and all(name != e for e, _ in spec.random_terms):
            raise PriorForgeError(f"scale given for unknown term {name!r}")
    default = _normalize_scale(default_scale)
    config = TaylorConfig(
        order=taylor_order if taylor_order is not None else default_taylor_order(fam),
        eval_point=eval_point if eval_point is not None else TaylorConfig().eval_point,
    )

    design = build_design(spec, table)

    slopes: list[PriorSpec] = []
    if design.slope_columns:
        fit = fit_glm(fam, design.y, design.X)
        if not fit.converged:
            raise FitError(f"full-model fit did not converge for {fam.kind} response")
        failures: list[str] = []
        for j in design.slope_columns:
            sc = _scale_for_column(design, j, scale_map, default)
            try:
                slopes.append(_slope_prior_given_fit(design, fam, fit, j, sc, config))
            except PriorForgeError as exc:
                failures.append(str(exc))
        if failures:
            raise FitError("slope prior failures: " + "; ".join(failures))

    if design.cell_means:
        intercept_block = cellmeans_priors(design, fam)
    elif design.has_intercept:
        intercept_block = (intercept_prior(design, fam, slopes),)
    else:
        intercept_block = ()

    residual = residual_sd_prior(design) if fam.kind == "gaussian" else None

    existing: dict[str, PriorSpec] = {sp.term: sp for sp in slopes}
    for sp in intercept_block:
        existing.setdefault(sp.term, sp)
    randoms = tuple(
        random_effect_prior(
            rt,
            design,
            fam,
            scale=scale_map.get(rt.expr, default),
            config=config,
            existing_priors=existing,
            scales=scale_map,
        )
        for rt in spec.random_terms
    )

    return PriorSet(
        slopes=tuple(slopes),
        intercept_or_cellmeans=intercept_block,
        residual_sd=residual,
        random_effects=randoms,
        model=spec,
        n_used=design.n,
        rows_dropped=design.rows_dropped,
    )
