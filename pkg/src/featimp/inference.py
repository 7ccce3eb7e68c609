"""Confidence intervals, hypothesis tests, and multiplicity corrections.

Operates on ScoresTable objects: interval methods use per-iteration score
means, observation-level tests (CPI for knockoff-based conditional
importance, the LOCO test of Lei et al. 2018) use pooled per-observation
loss differences. The Nadeau-Bengio (2003) correction inflates the naive
variance by n_test/n_train to account for overlapping training sets.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy import stats as sps

from .scores import ScoresTable

ALTERNATIVES = ("two.sided", "greater", "less")
P_ADJUST_METHODS = ("none", "bonferroni", "holm", "BH", "BY")


def _check_alternative(alternative):
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    return alternative


def _result_frame(features, meta, **cols):
    data = {"feature": list(features)}
    for name in ("importance", "se", "statistic", "p_value", "conf_lower", "conf_upper"):
        data[name] = np.asarray(cols.get(name, np.full(len(data["feature"]), np.nan)),
                                dtype=np.float64)
    df = pd.DataFrame(data)
    df.attrs["meta"] = meta
    return df


def _t_p_value(stat, df, alternative):
    if not np.isfinite(stat):
        return np.nan
    if alternative == "two.sided":
        return 2.0 * float(sps.t.sf(abs(stat), df))
    if alternative == "greater":
        return float(sps.t.sf(stat, df))
    return float(sps.t.cdf(stat, df))


def _t_interval(mean, se, df, alpha, alternative):
    if alternative == "two.sided":
        q = float(sps.t.ppf(1.0 - alpha / 2.0, df))
        return mean - q * se, mean + q * se
    q = float(sps.t.ppf(1.0 - alpha, df))
    if alternative == "greater":
        return mean - q * se, np.inf
    return -np.inf, mean + q * se


# ---------------------------------------------------------------------------
# interval methods on iteration-level scores
# ---------------------------------------------------------------------------

def ci_quantile(scores: ScoresTable, alpha=0.05, alternative="two.sided",
                pooling="average_repeats"):
    """Empirical quantiles of per-iteration importance (type-7 interpolation).

    pooling="average_repeats" first averages repetitions within each
    iteration; "pool_records" takes quantiles over all raw records.
    """
    _check_alternative(alternative)
    if scores.K < 2:
        raise ValueError("quantiles require multiple resampling iterations")
    if pooling == "average_repeats":
        per_iter = scores.iteration_means()
    elif pooling == "pool_records":
        per_iter = scores.records[["feature", "iter_rsmp", "importance"]]
    else:
        raise ValueError(f"unknown pooling: {pooling!r}")
    point = scores.importance().set_index("feature")["importance"]
    lo, hi = [], []
    for f in scores.feature_order:
        v = per_iter.loc[per_iter["feature"] == f, "importance"].to_numpy()
        if alternative == "two.sided":
            lo.append(np.quantile(v, alpha / 2.0))
            hi.append(np.quantile(v, 1.0 - alpha / 2.0))
        elif alternative == "greater":
            lo.append(np.quantile(v, alpha))
            hi.append(np.inf)
        else:
            lo.append(-np.inf)
            hi.append(np.quantile(v, 1.0 - alpha))
    meta = {"ci_method": "quantile", "K": scores.K, "alpha": alpha,
            "alternative": alternative, "pooling": pooling,
            "quantile_rule": "type-7 linear interpolation",
            "warnings": list(scores.warnings)}
    return _result_frame(scores.feature_order, meta,
                         importance=point.reindex(scores.feature_order).to_numpy(),
                         conf_lower=lo, conf_upper=hi)


def _t_on_iterations(scores: ScoresTable, se_factor, alpha, alternative,
                     p_adjust_method, method_name, extra_meta=None):
    K = scores.K
    if K < 2:
        raise ValueError(f"{method_name} intervals require K >= 2 resampling iterations")
    per_iter = scores.iteration_means()
    feats = scores.feature_order
    warnings = list(scores.warnings)
    eff_alpha = alpha / len(feats) if p_adjust_method == "bonferroni" else alpha
    means, ses, stats_, ps, los, his = [], [], [], [], [], []
    for f in feats:
        v = per_iter.loc[per_iter["feature"] == f, "importance"].to_numpy()
        vbar = float(np.mean(v))
        s2 = float(np.var(v, ddof=1))
        se = float(np.sqrt(s2 * se_factor))
        if se == 0.0:
            stat = np.nan
            p = np.nan
            lo = hi = vbar
            warnings.append(f"feature {f!r}: zero variance across iterations; "
                            "test statistic and p-value undefined")
        else:
            stat = vbar / se
            p = _t_p_value(stat, K - 1, alternative)
            lo, hi = _t_interval(vbar, se, K - 1, eff_alpha, alternative)
        means.append(vbar)
        ses.append(se)
        stats_.append(stat)
        ps.append(p)
        los.append(lo)
        his.append(hi)
    ps = p_adjust(ps, p_adjust_method)
    meta = {"ci_method": method_name, "K": K, "df": K - 1, "alpha": alpha,
            "alternative": alternative, "p_adjust": p_adjust_method,
            "n_train": scores.resampling.n_train.tolist(),
            "n_test": scores.resampling.n_test.tolist(),
            "warnings": warnings}
    meta.update(extra_meta or {})
    return _result_frame(feats, meta, importance=means, se=ses, statistic=stats_,
                         p_value=ps, conf_lower=los, conf_upper=his)


def ci_raw(scores: ScoresTable, alpha=0.05, alternative="two.sided",
           p_adjust_method="none"):
    """Uncorrected t-interval across iterations. Ignores the dependence
    between overlapping resampling iterations: kept for comparison, not
    valid for inference."""
    _check_alternative(alternative)
    out = _t_on_iterations(scores, 1.0 / scores.K, alpha, alternative,
                           p_adjust_method, "raw")
    out.attrs["meta"]["warnings"].append(
        "raw intervals ignore dependence between resampling iterations; "
        "not valid for inference")
    return out


def ci_nadeau_bengio(scores: ScoresTable, alpha=0.05, alternative="two.sided",
                     p_adjust_method="none"):
    """Variance-corrected t-interval: se^2 = S^2 * (1/K + n_test/n_train)."""
    _check_alternative(alternative)
    if scores.resampling.id not in ("subsampling", "bootstrap"):
        raise ValueError("correction requires subsampling or bootstrap resampling")
    ratio = scores.resampling.test_train_ratio()
    out = _t_on_iterations(scores, 1.0 / scores.K + ratio, alpha, alternative,
                           p_adjust_method, "nadeau_bengio",
                           extra_meta={"test_train_ratio": ratio,
                                       "ratio_rule": "mean of per-iteration n_test/n_train"})
    if scores.K < 10:
        out.attrs["meta"]["warnings"].append(
            f"fewer than 10 subsampling or bootstrap iterations (K={scores.K}); "
            "the corrected test is unreliable")
    return out


# ---------------------------------------------------------------------------
# signed-rank machinery (exact for m <= 25, normal approximation beyond)
# ---------------------------------------------------------------------------

EXACT_SIGNRANK_LIMIT = 25


def _signrank_counts(weights):
    """Null distribution of W+ = sum of a random subset of integer weights:
    counts[w] over w = 0..sum(weights). Exact for up to ~25 observations
    (counts stay below 2^53)."""
    total = int(np.sum(weights))
    c = np.zeros(total + 1)
    c[0] = 1.0
    for r in weights:
        r = int(r)
        upd = c.copy()
        upd[r:] += c[:total + 1 - r]
        c = upd
    return c


def signed_rank_test(d, alternative="two.sided"):
    """One-sample Wilcoxon signed-rank test of symmetry about zero.

    Zeros are dropped; ties get average ranks. Returns (W_plus, p, m_used).
    """
    _check_alternative(alternative)
    d = np.asarray(d, dtype=np.float64)
    d = d[d != 0.0]
    m = d.size
    if m == 0:
        return np.nan, 1.0, 0
    ranks = sps.rankdata(np.abs(d))
    w_plus = float(np.sum(ranks[d > 0]))
    if m <= EXACT_SIGNRANK_LIMIT:
        weights = np.rint(2.0 * ranks).astype(np.int64)
        counts = _signrank_counts(weights)
        total = counts.sum()
        w2 = int(np.rint(2.0 * w_plus))
        p_ge = counts[w2:].sum() / total
        p_le = counts[:w2 + 1].sum() / total
        if alternative == "greater":
            p = p_ge
        elif alternative == "less":
            p = p_le
        else:
            p = min(1.0, 2.0 * min(p_ge, p_le))
        return w_plus, float(p), m
    mu = m * (m + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    sigma2 = m * (m + 1) * (2 * m + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    sigma = np.sqrt(sigma2)
    if sigma == 0.0:
        return w_plus, 1.0, m
    if alternative == "greater":
        p = float(sps.norm.sf((w_plus - mu - 0.5) / sigma))
    elif alternative == "less":
        p = float(sps.norm.cdf((w_plus - mu + 0.5) / sigma))
    else:
        z = w_plus - mu
        cc = 0.5 * np.sign(z)
        p = min(1.0, 2.0 * float(sps.norm.sf(abs((z - cc) / sigma))))
    return w_plus, float(p), m


def _signrank_lower_quantile(m, a):
    """Largest C >= 0 with P(W+ <= C) <= a under the untied null, or -1."""
    if m <= EXACT_SIGNRANK_LIMIT:
        counts = _signrank_counts(2 * np.arange(1, m + 1))
        cdf = np.cumsum(counts) / counts.sum()
        # scaled support: W2 = 2 * W, so index 2w corresponds to W = w
        ok = np.nonzero(cdf[::2] <= a)[0]
        return int(ok[-1]) if ok.size else -1
    mu = m * (m + 1) / 4.0
    sigma = np.sqrt(m * (m + 1) * (2 * m + 1) / 24.0)
    return max(-1, int(np.floor(mu - 0.5 + sigma * sps.norm.ppf(a))))


def hodges_lehmann_interval(d, alpha=0.05, alternative="two.sided"):
    """Pseudo-median confidence interval from sorted Walsh averages.

    Returns (estimate, lower, upper, achieved_flag); achieved_flag is False
    when the requested level is not attainable at this sample size.
    """
    _check_alternative(alternative)
    d = np.asarray(d, dtype=np.float64)
    m = d.size
    if m == 0:
        return np.nan, np.nan, np.nan, False
    walsh = np.sort(((d[:, None] + d[None, :]) * 0.5)[np.triu_indices(m)])
    M = walsh.size
    estimate = float(np.median(walsh))
    a = alpha / 2.0 if alternative == "two.sided" else alpha
    C = _signrank_lower_quantile(m, a)
    achieved = C >= 0
    C = min(max(C, 0), (M - 1) // 2)
    lo = float(walsh[C])
    hi = float(walsh[M - 1 - C])
    if alternative == "greater":
        return estimate, lo, np.inf, achieved
    if alternative == "less":
        return estimate, -np.inf, hi, achieved
    return estimate, lo, hi, achieved


# ---------------------------------------------------------------------------
# observation-level tests
# ---------------------------------------------------------------------------

def _pooled_deltas(scores: ScoresTable):
    pooled = scores.pooled_obs_diffs()
    warnings = list(scores.warnings)
    if scores.resampling.id in ("subsampling", "bootstrap"):
        warnings.append("observations repeated across resampling iterations "
                        "are pooled as distinct records")
    return pooled, warnings


def _obs_level_result(scores, pooled, warnings, importance_by_feature, test,
                      alternative, alpha, p_adjust_method, method_name):
    feats = scores.feature_order
    eff_alpha = alpha / len(feats) if p_adjust_method == "bonferroni" else alpha
    means, ses, stats_, ps, los, his = [], [], [], [], [], []
    for f in feats:
        delta = pooled.loc[pooled["feature"] == f, "delta"].to_numpy()
        m = delta.size
        mean = float(np.mean(delta))
        if test == "t":
            sd = float(np.std(delta, ddof=1)) if m > 1 else 0.0
            se = sd / np.sqrt(m) if m > 0 else np.nan
            if se == 0.0:
                stat = 0.0 if mean == 0.0 else np.inf * np.sign(mean)
            else:
                stat = mean / se
            p = _t_p_value(stat, m - 1, alternative) if m > 1 else np.nan
            if np.isinf(stat):
                p = 0.0 if (alternative != "less") == (stat > 0) else 1.0
            lo, hi = _t_interval(mean, se if se > 0 else 0.0, max(m - 1, 1),
                                 eff_alpha, alternative)
        elif test == "wilcox":
            stat, p, m_used = signed_rank_test(delta, alternative)
            se = np.nan
            _, lo, hi, achieved = hodges_lehmann_interval(delta, eff_alpha, alternative)
            if not achieved:
                warnings.append(f"feature {f!r}: requested confidence level not "
                                f"achievable with m={m_used} nonzero differences")
        else:
            raise ValueError(f"test must be 't' or 'wilcox', got {test!r}")
        means.append(importance_by_feature.get(f, mean))
        ses.append(se)
        stats_.append(stat)
        ps.append(p)
        los.append(lo)
        his.append(hi)
    ps = p_adjust(ps, p_adjust_method)
    meta = {"ci_method": method_name, "test": test, "alpha": alpha,
            "alternative": alternative, "p_adjust": p_adjust_method,
            "K": scores.K, "n_obs": int(len(pooled) / max(len(feats), 1)),
            "warnings": warnings}
    return _result_frame(feats, meta, importance=means, se=ses, statistic=stats_,
                         p_value=ps, conf_lower=los, conf_upper=his)


def cpi_test(scores: ScoresTable, test="t", alternative="greater", alpha=0.05,
             p_adjust_method="none"):
    """Conditional predictive impact: paired test of knockoff-vs-original
    observation-wise loss differences (Watson & Wright 2021)."""
    _check_alternative(alternative)
    if scores.sampler != "knockoff_gaussian":
        raise ValueError("CPI requires knockoff-based CFI scores "
                         "(sampler 'knockoff_gaussian')")
    pooled, warnings = _pooled_deltas(scores)
    # the test statistic and the reported importance both target mean(delta)
    return _obs_level_result(scores, pooled, warnings, {}, test, alternative,
                             alpha, p_adjust_method, "cpi")


def lei_test(scores: ScoresTable, test="wilcox", alternative="two.sided",
             alpha=0.05, p_adjust_method="none"):
    """Observation-level test for refit importance via loss differences.

    The point estimate stays the aggregate mean loss difference while the
    wilcox interval covers the pseudo-median of the per-observation
    differences, so the interval need not bracket the point estimate for
    skewed losses.
    """
    _check_alternative(alternative)
    if scores.method not in ("loco", "wvim"):
        raise ValueError("Lei inference requires refit-based scores (LOCO/WVIM)")
    pooled, warnings = _pooled_deltas(scores)
    point = dict(zip(scores.importance()["feature"], scores.importance()["importance"]))
    return _obs_level_result(scores, pooled, warnings, point, test, alternative,
                             alpha, p_adjust_method, "lei")


# ---------------------------------------------------------------------------
# multiple-testing corrections
# ---------------------------------------------------------------------------

def p_adjust(p, method="none"):
    """Adjust p-values: bonferroni, holm (step-down), BH (step-up FDR),
    or BY (BH with the harmonic-sum factor, valid under dependence)."""
    p = np.asarray(p, dtype=np.float64)
    if method not in P_ADJUST_METHODS:
        raise ValueError(f"unknown p_adjust method: {method!r} "
                         f"(choose from {P_ADJUST_METHODS})")
    finite = np.isfinite(p)
    if np.any((p[finite] < 0) | (p[finite] > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    if method == "none" or p.size == 0:
        return p.copy()
    m = p.size
    out = np.full(m, np.nan)
    idx = np.nonzero(finite)[0]
    q = p[idx]
    n = q.size
    if n == 0:
        return out
    if method == "bonferroni":
        out[idx] = np.minimum(1.0, n * q)
        return out
    order = np.argsort(q, kind="stable")
    ranked = q[order]
    if method == "holm":
        adj = np.maximum.accumulate(np.minimum(1.0, (n - np.arange(n)) * ranked))
    else:
        factor = float(np.sum(1.0 / np.arange(1, n + 1))) if method == "BY" else 1.0
        stepup = np.minimum(1.0, factor * n * ranked / np.arange(1, n + 1))
        adj = np.minimum.accumulate(stepup[::-1])[::-1]
    res = np.empty(n)
    res[order] = adj
    out[idx] = res
    return out
