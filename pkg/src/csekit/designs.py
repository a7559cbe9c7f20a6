"""Reference trial designs.

A design maps simulated outcomes to one statistic per hypothesis; hypothesis
``j`` is rejected at threshold ``lam`` when its statistic is ``< lam``. The
family-wise statistic for a null configuration is the minimum over the true
nulls, so "some true null rejected at ``lam``" is exactly
``statistic(outcomes, config) < lam`` and rejection sets grow with ``lam``.
"""

import numpy as np
from scipy.special import betainc, ndtr

__all__ = [
    "Design",
    "ZTestDesign",
    "MultiArmBetaBinomialDesign",
    "TwoStageSelectionDesign",
    "DESIGNS",
    "fwer_statistic",
    "design_from_config",
]


class Design:
    """Base class. Subclasses set ``name``, ``n_hypotheses`` and ``family_kind``
    and implement :meth:`hypothesis_statistics`."""

    name = None
    family_kind = None
    n_hypotheses = 1
    lam = 0.025

    def check_family(self, family):
        if family.kind != self.family_kind:
            raise ValueError(
                f"design {self.name!r} needs a {self.family_kind!r} family, got {family.kind!r}"
            )

    def hypothesis_statistics(self, outcomes):
        raise NotImplementedError

    def tile_hypothesis_statistics(self, outcomes, tile):
        """Per-tile variant; designs with tile-specific statistics override this."""
        return self.hypothesis_statistics(outcomes)

    def reject(self, outcomes, lam):
        """Boolean ``(N, p)`` rejection indicators at threshold ``lam``."""
        return self.hypothesis_statistics(outcomes) < lam

    def statistic(self, outcomes, config=()):
        """Family-wise calibration statistic: min over true nulls (all if ``config`` is empty)."""
        return fwer_statistic(self.hypothesis_statistics(outcomes), config)

    def tile_statistic(self, outcomes, tile):
        return fwer_statistic(self.tile_hypothesis_statistics(outcomes, tile), tile.config)

    def params(self):
        return {}

    def to_dict(self):
        return {"name": self.name, "params": self.params()}


def fwer_statistic(stats, config):
    if len(config) == 0:
        return stats.min(axis=1)
    mask = np.asarray(config, dtype=bool)
    if mask.shape[0] != stats.shape[1]:
        raise ValueError(
            f"configuration has {mask.shape[0]} bits but the design tests {stats.shape[1]} hypotheses"
        )
    if not mask.any():
        return np.full(stats.shape[0], np.inf)
    return stats[:, mask].min(axis=1)


class ZTestDesign(Design):
    """One-sided z-test of ``theta <= 0`` on a single unit-variance normal.

    The statistic is the p-value ``1 - Phi(X)``. With ``recenter=True`` each
    tile tests its own upper edge, ``1 - Phi(X - tile.upper)``, which is what
    a confidence-set construction inverts.
    """

    name = "ztest"
    family_kind = "normal"

    def __init__(self, lam=0.025, recenter=False):
        self.lam = float(lam)
        self.recenter = bool(recenter)

    def check_family(self, family):
        super().check_family(family)
        if family.dim != 1:
            raise ValueError("the z-test design needs a 1-dimensional normal family")

    def hypothesis_statistics(self, outcomes):
        return ndtr(-outcomes.values[:, :1])

    def tile_hypothesis_statistics(self, outcomes, tile):
        if not self.recenter:
            return self.hypothesis_statistics(outcomes)
        return ndtr(-(outcomes.values[:, :1] - tile.upper[0]))

    def params(self):
        return {"lam": self.lam, "recenter": self.recenter}


class MultiArmBetaBinomialDesign(Design):
    """Independent conjugate Beta posteriors, one hypothesis per arm.

    Arm ``i`` rejects ``p_i <= sigmoid(null_logits[i])`` when the posterior
    probability of exceeding that rate is above ``1 - lam``; its statistic is
    the posterior CDF at the null rate.
    """

    name = "multiarm_betabinomial"
    family_kind = "bernoulli"

    def __init__(self, null_logits, prior=(1.0, 1.0), lam=0.05):
        self.null_logits = tuple(float(t) for t in np.atleast_1d(null_logits))
        self.prior = (float(prior[0]), float(prior[1]))
        self.lam = float(lam)
        self.n_hypotheses = len(self.null_logits)

    def check_family(self, family):
        super().check_family(family)
        if family.dim != self.n_hypotheses:
            raise ValueError("need one null rate per arm")

    def hypothesis_statistics(self, outcomes):
        if len(outcomes.arm_slices) != self.n_hypotheses:
            raise ValueError("outcome arms do not match the design's null rates")
        a0, b0 = self.prior
        p0 = 1.0 / (1.0 + np.exp(-np.asarray(self.null_logits)))
        cols = []
        for i, s in enumerate(outcomes.arm_slices):
            n = s.stop - s.start
            y = outcomes.values[:, s].sum(axis=1)
            cols.append(betainc(a0 + y, b0 + n - y, p0[i]))
        return np.stack(cols, axis=1)

    def params(self):
        return {"null_logits": list(self.null_logits), "prior": list(self.prior), "lam": self.lam}


class TwoStageSelectionDesign(Design):
    """Control plus two treatments; pick one treatment after stage 1.

    Stage 1 keeps the treatment with more successes (treatment 1 on ties).
    The final test pools both stages of the kept treatment against control
    with a one-sided two-proportion z-test. Hypothesis ``j`` (treatment
    ``j + 1`` no better than control) can only be rejected when that treatment
    was kept; the dropped treatment's stage-2 rows never affect the result.
    """

    name = "two_stage_selection"
    family_kind = "bernoulli"
    n_hypotheses = 2

    def __init__(self, stage_sizes=(10, 10), lam=0.025):
        self.stage_sizes = tuple(int(n) for n in stage_sizes)
        if len(self.stage_sizes) != 2 or min(self.stage_sizes) < 1:
            raise ValueError("stage_sizes must be two positive integers")
        self.lam = float(lam)

    def check_family(self, family):
        super().check_family(family)
        n = sum(self.stage_sizes)
        if family.dim < 3:
            raise ValueError("the selection design needs at least 3 arms")
        if any(s != n for s in family.sizes[:3]):
            raise ValueError(f"each arm needs {n} patients (stage 1 + stage 2)")

    def selection(self, outcomes):
        """Kept treatment (1 or 2) per simulation, from stage-1 data only."""
        n1 = self.stage_sizes[0]
        s1 = outcomes.arm(1)[:, :n1].sum(axis=1)
        s2 = outcomes.arm(2)[:, :n1].sum(axis=1)
        return np.where(s1 >= s2, 1, 2)

    def selected_pvalue(self, outcomes):
        if len(outcomes.arm_slices) < 3:
            raise ValueError("the selection design needs at least 3 arms")
        n = sum(self.stage_sizes)
        chosen = self.selection(outcomes)
        x_c = outcomes.arm(0)[:, :n].sum(axis=1).astype(float)
        x_t = np.where(
            chosen == 1,
            outcomes.arm(1)[:, :n].sum(axis=1),
            outcomes.arm(2)[:, :n].sum(axis=1),
        ).astype(float)
        pooled = (x_t + x_c) / (2.0 * n)
        se = np.sqrt(pooled * (1.0 - pooled) * 2.0 / n)
        diff = (x_t - x_c) / n
        z = np.divide(diff, se, out=np.zeros_like(diff), where=se > 0)
        return ndtr(-z), chosen

    def hypothesis_statistics(self, outcomes):
        p, chosen = self.selected_pvalue(outcomes)
        return np.stack(
            [np.where(chosen == 1, p, np.inf), np.where(chosen == 2, p, np.inf)], axis=1
        )

    def params(self):
        return {"stage_sizes": list(self.stage_sizes), "lam": self.lam}


DESIGNS = {
    cls.name: cls for cls in (ZTestDesign, MultiArmBetaBinomialDesign, TwoStageSelectionDesign)
}


def design_from_config(spec):
    """Instantiate a registered design from ``{"name": ..., "params": {...}}``."""
    try:
        cls = DESIGNS[spec["name"]]
    except KeyError:
        raise KeyError(f"unknown design {spec['name']!r}") from None
    return cls(**spec.get("params", {}))
