"""CSV and markdown reports.

Numbers are formatted here, with a fixed number of decimals, so a report
is byte-identical across runs with the same seed. Markdown is rendered from
the templates under ``cli/templates/cli``.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from django.template.loader import render_to_string

logger = logging.getLogger(__name__)

RELEVANT = 'relevant'
IRRELEVANT = 'irrelevant'
OTHER = 'other'


def fmt(value, digits=4):
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ''
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(value)
    return f"{value:.{digits}f}"


def row_group(name):
    """Simulated risk factors are X* (acting on the outcome) or Z* (noise)"""
    if name.startswith('X'):
        return RELEVANT
    if name.startswith('Z'):
        return IRRELEVANT
    return OTHER


def write_frame(frame, path, digits=4):
    path = Path(path)
    frame.to_csv(path, index=False, lineterminator='\n', float_format=f'%.{digits}f', encoding='utf-8')
    logger.info(f"Wrote {path}")
    return path


def write_markdown(template, context, path):
    path = Path(path)
    path.write_text(render_to_string(template, context), encoding='utf-8')
    logger.info(f"Wrote {path}")
    return path


def _estimate_columns(prefix, estimate):
    if estimate is None:
        return {prefix: None, f'{prefix}_low': None, f'{prefix}_high': None}
    return {prefix: estimate.mean, f'{prefix}_low': estimate.ci_low, f'{prefix}_high': estimate.ci_high}


def evaluation_frame(report):
    rows = []
    for summary in report.summaries:
        row = {'method': summary.method}
        for metric in ('p_d', 'p_nd', 'p_g'):
            row.update(_estimate_columns(metric, getattr(summary, metric)))
        row['replicates'] = report.spec.replicates
        row['skipped_p_d'] = len(summary.skipped_p_d)
        rows.append(row)
    return pd.DataFrame(rows)


def counts_frame(report):
    return pd.DataFrame([
        {'replicate': item.replicate, 'method': item.method, 'tp': item.tp, 'fn': item.fn, 'tn': item.tn, 'fp': item.fp}
        for item in report.counts
    ])


def evaluation_context(report, seed, digits=4, title='Probability of correct predictions'):
    rows = [
        {key: value if isinstance(value, str) else fmt(value, digits) for key, value in row.items()}
        for row in evaluation_frame(report).to_dict('records')
    ]
    return {
        'title': title,
        'seed': seed,
        'spec': report.spec,
        'train_fraction': fmt(report.spec.train_fraction, 3),
        'rows': rows,
    }


def coefficient_frame(fit):
    rows = []
    intervals = fit.confidence_intervals() if fit.inference_available else None
    for index, (term, estimate, se, z, p) in enumerate(fit.coefficient_rows()):
        rows.append({
            'term': term,
            'estimate': estimate,
            'std_error': se,
            'z_value': z,
            'p_value': p,
            'ci_low': None if intervals is None else float(intervals[index, 0]),
            'ci_high': None if intervals is None else float(intervals[index, 1]),
            'odds_ratio': float(np.exp(estimate)) if index > 0 else None,
        })
    return pd.DataFrame(rows)


def _p_value(value, digits):
    if value is None:
        return ''
    threshold = 10.0 ** -digits
    return f"< {threshold:.{digits}f}" if value < threshold else fmt(value, digits)


def coefficient_context(fit, seed, digits=4, fit_on='train'):
    rows = []
    for row in coefficient_frame(fit).to_dict('records'):
        p = row['p_value']
        rows.append({
            'term': row['term'],
            'estimate': fmt(row['estimate'], digits),
            'std_error': fmt(row['std_error'], digits),
            'z_value': fmt(row['z_value'], 2),
            'p_value': _p_value(None if p is None or np.isnan(p) else p, digits),
            'odds_ratio': fmt(row['odds_ratio'], digits),
        })
    return {
        'seed': seed,
        'fit': fit,
        'fit_on': fit_on,
        'inference': fit.inference_available,
        'deviance': fmt(fit.deviance, digits),
        'null_deviance': fmt(fit.null_deviance, digits),
        'aic': fmt(fit.aic, digits),
        'rows': rows,
    }


def permutation_frame(report):
    metrics = report.extras['metrics']
    rows = []
    for index, name in enumerate(report.feature_names):
        row = {'feature': name, 'group': row_group(name)}
        for metric, columns in metrics.items():
            row[metric] = columns['mean'][index]
            row[f'{metric}_low'] = columns['ci_low'][index]
            row[f'{metric}_high'] = columns['ci_high'][index]
        row['drop'] = report.drops[index]
        row['direction'] = report.extras['direction'][index]
        rows.append(row)
    return pd.DataFrame(rows)


def permutation_context(report, seed, digits=4):
    groups = {}
    for row in permutation_frame(report).to_dict('records'):
        groups.setdefault(row['group'], []).append({
            'feature': row['feature'],
            'mean': fmt(row[report.metric], digits),
            'low': fmt(row[f'{report.metric}_low'], digits),
            'high': fmt(row[f'{report.metric}_high'], digits),
            'drop': fmt(row['drop'], digits),
            'direction': row['direction'],
        })
    order = [RELEVANT, IRRELEVANT, OTHER]
    return {
        'seed': seed,
        'metric': report.metric,
        'replicates': report.replicates,
        'baseline': fmt(report.baseline, digits),
        'groups': [{'name': name, 'rows': groups[name]} for name in order if name in groups],
    }


def importance_frame(report):
    frame = pd.DataFrame({'feature': report.feature_names, 'score': report.scores})
    if report.has_intervals:
        frame['ci_low'] = report.ci_low
        frame['ci_high'] = report.ci_high
    return frame


def _extra(value, digits):
    if isinstance(value, float):
        return fmt(value, digits)
    if isinstance(value, list):
        return ', '.join(str(item) for item in value)
    return value


def importance_context(report, seed, digits=4):
    rows = [
        {
            'feature': name,
            'score': fmt(float(score), digits),
            'ci': f"[{fmt(float(report.ci_low[i]), digits)}, {fmt(float(report.ci_high[i]), digits)}]"
            if report.has_intervals else '',
        }
        for i, (name, score) in enumerate(zip(report.feature_names, report.scores))
    ]
    extras = {
        key: value for key, value in report.extras.items()
        if isinstance(value, (int, float, str, list)) and key != 'subset_values'
    }
    return {
        'seed': seed,
        'method': report.method,
        'baseline': fmt(report.baseline, digits),
        'intervals': report.has_intervals,
        'rows': rows,
        'extras': [{'name': key, 'value': _extra(value, digits)}
                   for key, value in extras.items()],
        'notes': report.notes,
    }


def lek_frame(profiles):
    rows = []
    for profile in profiles:
        for q_index, quantile in enumerate(profile.quantiles):
            for g_index, x in enumerate(profile.grid):
                rows.append({
                    'feature': profile.feature,
                    'quantile': quantile,
                    'x': float(x),
                    'probability': float(profile.probabilities[q_index, g_index]),
                    'derivative': float(profile.derivatives[q_index, g_index]),
                })
    return pd.DataFrame(rows)


def imbalance_frame(reports):
    """One row per (duplication setting, method)"""
    rows = []
    for setting, report in reports.items():
        for summary in report.summaries:
            row = {'duplication': setting, 'method': summary.method}
            for metric in ('p_d', 'p_nd', 'p_g'):
                row.update(_estimate_columns(metric, getattr(summary, metric)))
            row['p_d_ci_width'] = summary.p_d.width if summary.p_d else None
            row['skipped_p_d'] = len(summary.skipped_p_d)
            rows.append(row)
    return pd.DataFrame(rows)


def imbalance_context(reports, seed, positive_rate, n_rows, digits=4):
    rows = [
        {key: value if isinstance(value, str) else fmt(value, digits) for key, value in row.items()}
        for row in imbalance_frame(reports).to_dict('records')
    ]
    return {
        'seed': seed,
        'positive_rate': fmt(positive_rate, 4),
        'n_rows': n_rows,
        'spec': next(iter(reports.values())).spec,
        'rows': rows,
    }
