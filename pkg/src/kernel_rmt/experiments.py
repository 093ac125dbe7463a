"""Spectral clustering and end-to-end experiment drivers.

Every driver is deterministic given its seeds: datasets come from
:func:`kernel_rmt.model.sample_mixture`, eigensolvers start from seeded
vectors, and outputs are written with a fixed number of significant digits.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ._linalg import extremal_eigs
from .hermite import KernelFunc, compute_coeffs, cubic_equivalent, parse_function
from .kernel import KernelMatrix, TernaryKernel, gram, kernel_from_gram, ternary_from_gram
from .model import MixtureParams, StudentT, canonical_scenarios, sample_mixture
from .prototype import PiecewiseProto, coeffs_of_piecewise, design_piecewise
from .spectrum import (
    LimitParams,
    detect_spikes,
    empirical_esd,
    esd_distance,
    estimate_edges,
    histogram_distance,
    limiting_density,
)
from .spiked import build_spike, class_stats, opnorm_diff

TIMING_REPEATS = 5


# ----------------------------------------------------------------------------
# clustering
# ----------------------------------------------------------------------------


def _operator(K) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    if isinstance(K, (KernelMatrix, TernaryKernel)) or hasattr(K, "matvec"):
        return K.matvec, K.n
    arr = np.asarray(K, dtype=np.float64)
    return (lambda v: arr @ v), arr.shape[0]


def top_eigvec(K, seed: int = 0) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and its unit eigenvector, by Lanczos iteration."""
    matvec, n = _operator(K)
    w, V = extremal_eigs(matvec, n, which="LA", k=1, seed=seed)
    v = V[:, -1]
    # fix the sign so results do not depend on the solver's arbitrary choice
    i = int(np.argmax(np.abs(v)))
    return float(w[-1]), v if v[i] >= 0 else -v


def spectral_cluster(K, k: int = 2, seed: int = 0) -> np.ndarray:
    """Two-way spectral clustering from the top eigenvector.

    Parameters
    ----------
    K : KernelMatrix, TernaryKernel, ndarray or any object with ``matvec`` and ``n``
    k : int
        Number of clusters; only ``2`` is supported.
    seed : int
        Seed of the eigensolver start vector.

    Returns
    -------
    ndarray of int
        Labels in ``{1, 2}``: ``1`` where ``v - mean(v) >= 0``.
    """
    if k != 2:
        raise ValueError("only two-way clustering is supported")
    _, v = top_eigvec(K, seed)
    return np.where(v - v.mean() >= 0.0, 1, 2)


def cluster_accuracy(labels: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of agreement, maximized over the two label permutations."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise ValueError("labels and truth must have equal length")
    agree = float(np.mean(labels == truth))
    return max(agree, 1.0 - agree)


def class_alignment(v: np.ndarray, labels: Sequence[int]) -> float:
    """``|<v/||v||, (j1 - j2)/sqrt(n)>|``."""
    labels = np.asarray(labels)
    d = np.where(labels == 1, 1.0, -1.0) / math.sqrt(labels.size)
    return float(abs(v @ d) / np.linalg.norm(v))


def median_time(fn: Callable[[], object], repeats: int = TIMING_REPEATS) -> float:
    """Median wall time over ``repeats`` calls after one warm-up call."""
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Scenario, function and seeds of an experiment.

    ``sizes`` is a ladder of ``(n, p)`` pairs that must share the ratio
    ``p/n``.
    """

    scenario: MixtureParams | str = "fig2"
    function: str = "P1"
    seeds: list[int] = field(default_factory=lambda: [0])
    sizes: list[tuple[int, int]] = field(default_factory=list)
    out_dir: Path | None = None

    def __post_init__(self) -> None:
        ratios = {p / n for n, p in self.sizes}
        if len(ratios) > 1:
            raise ValueError("all sizes in the ladder must share the same p/n")

    def params(self) -> MixtureParams:
        return canonical_scenarios(self.scenario) if isinstance(self.scenario, str) else self.scenario


def as_kernel_func(f) -> KernelFunc:
    return parse_function(f) if isinstance(f, str) else f


# ----------------------------------------------------------------------------
# spiked-model equivalence along a size ladder
# ----------------------------------------------------------------------------


def equivalence_ladder(
    scenario: MixtureParams,
    functions: Sequence,
    sizes: Sequence[tuple[int, int]],
    seeds: Sequence[int],
    spectra: bool = False,
) -> dict:
    """Distance between ``K`` and its spiked equivalent ``K_N + K_I`` per size and seed.

    Returns a mapping with ``sizes``, ``seeds`` and, per function name,
    ``opnorm_diffs[size][seed]``, ``alignments`` (top eigenvector of ``K_I``
    against the class indicator) and, when ``spectra`` is set,
    ``spike_eigenvalues`` of ``K``.
    """
    funcs = [as_kernel_func(f) for f in functions]
    coeffs = [compute_coeffs(f) for f in funcs]
    out: dict = {"sizes": [list(s) for s in sizes], "seeds": list(seeds), "functions": {}}
    for f in funcs:
        out["functions"][f.name] = {"opnorm_diffs": [], "alignments": [], "spike_eigenvalues": []}
    for n, p in sizes:
        params = scenario.with_size(n, p)
        rows = {f.name: ([], [], []) for f in funcs}
        for seed in seeds:
            ds = sample_mixture(params, seed)
            GX, GZ = gram(ds.X), gram(ds.Z)
            stats = class_stats(params, ds.labels)
            for f, co in zip(funcs, coeffs):
                K = kernel_from_gram(GX, f, p)
                KN = kernel_from_gram(GZ, f, p)
                spike = build_spike(ds.Z, co, stats)
                diff = opnorm_diff(K, (KN, spike), seed=seed)
                w, V = spike.eigs()
                j = int(np.argmax(np.abs(w)))
                align = class_alignment(V[:, j], ds.labels) if abs(w[j]) > 0 else 0.0
                spikes: list[float] = []
                if spectra:
                    lp = LimitParams.from_coeffs(co, p / n)
                    curve = limiting_density(lp)
                    spikes = detect_spikes(empirical_esd(K), curve.support).tolist()
                rows[f.name][0].append(diff)
                rows[f.name][1].append(align)
                rows[f.name][2].append(spikes)
        for f in funcs:
            rec = out["functions"][f.name]
            rec["opnorm_diffs"].append(rows[f.name][0])
            rec["alignments"].append(rows[f.name][1])
            rec["spike_eigenvalues"].append(rows[f.name][2])
    for f in funcs:
        rec = out["functions"][f.name]
        rec["median_opnorm_diffs"] = [float(np.median(r)) for r in rec["opnorm_diffs"]]
    return out


# ----------------------------------------------------------------------------
# prototype parity
# ----------------------------------------------------------------------------


@dataclass
class ParityRecord:
    seed: int
    accuracy: dict[str, float]
    spikes: dict[str, list[float]]
    bulk_l1: float
    spike_rel_gap: float | None


@dataclass
class ParityReport:
    target: dict[str, float]
    proto: dict
    cubic: dict[str, float]
    records: list[ParityRecord]
    bytes_dense: int
    bytes_packed: int
    time_packed_top: float | None = None
    time_dense_top: float | None = None
    time_dense_eigh: float | None = None

    def mean_accuracy(self, which: str) -> float:
        return float(np.mean([r.accuracy[which] for r in self.records]))

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "proto": self.proto,
            "cubic": self.cubic,
            "records": [r.__dict__ for r in self.records],
            "mean_accuracy": {k: self.mean_accuracy(k) for k in ("original", "cubic", "proto")},
            "bytes_dense": self.bytes_dense,
            "bytes_packed": self.bytes_packed,
            "time_packed_top": self.time_packed_top,
            "time_dense_top": self.time_dense_top,
            "time_dense_eigh": self.time_dense_eigh,
        }


def _spike_gap(a: np.ndarray, b: np.ndarray) -> float | None:
    """Largest relative difference between matched spikes; ``inf`` when the
    counts differ and ``None`` when neither has spikes."""
    if a.size == 0 and b.size == 0:
        return None
    if a.size != b.size:
        return math.inf
    return float(np.max(np.abs(a - b) / np.abs(b)))


def parity_experiment(
    target,
    scenario: MixtureParams | str = "fig3",
    seeds: Iterable[int] = range(10),
    timing: bool = True,
) -> ParityReport:
    """Compare clustering with ``target``, its cubic equivalent and the
    designed ternary prototype on identical datasets.

    Raises
    ------
    InfeasibleDesignError
        If no prototype matches the target's fingerprint.
    """
    f = as_kernel_func(target)
    params = canonical_scenarios(scenario) if isinstance(scenario, str) else scenario
    co = compute_coeffs(f)
    centered = type(co)(0.0, co.a1, co.a2, co.nu)
    proto = design_piecewise(centered)
    cubic = cubic_equivalent(centered)
    fc = cubic.to_kernel_func()
    fp = proto.to_kernel_func()
    lp = LimitParams.from_coeffs(centered, params.c)
    support = limiting_density(lp).support
    n, p = params.n, params.p
    records: list[ParityRecord] = []
    report = ParityReport(
        target=co.as_dict(),
        proto=proto.as_dict() | {"coeffs": coeffs_of_piecewise(proto).as_dict()},
        cubic={"c1": cubic.c1, "c2": cubic.c2, "c3": cubic.c3},
        records=records,
        bytes_dense=8 * n * n,
        bytes_packed=0,
    )
    for seed in seeds:
        ds = sample_mixture(params, seed)
        G = gram(ds.X)
        K_f = kernel_from_gram(G, f, p)
        K_c = kernel_from_gram(G, fc, p)
        tk = ternary_from_gram(G, proto, p)
        report.bytes_packed = tk.nbytes
        e_c = empirical_esd(K_c)
        e_p = empirical_esd(kernel_from_gram(G, fp, p))
        s_c = detect_spikes(e_c, support)
        s_p = detect_spikes(e_p, support)
        acc = {
            "original": cluster_accuracy(spectral_cluster(K_f, seed=seed), ds.labels),
            "cubic": cluster_accuracy(spectral_cluster(K_c, seed=seed), ds.labels),
            "proto": cluster_accuracy(spectral_cluster(tk, seed=seed), ds.labels),
        }
        records.append(
            ParityRecord(
                seed=int(seed),
                accuracy=acc,
                spikes={"cubic": s_c.tolist(), "proto": s_p.tolist()},
                bulk_l1=histogram_distance(e_p, e_c, support),
                spike_rel_gap=_spike_gap(s_p, s_c),
            )
        )
        if timing and report.time_packed_top is None:
            report.time_packed_top = median_time(lambda: top_eigvec(tk, seed))
            report.time_dense_top = median_time(lambda: top_eigvec(K_c, seed))
            report.time_dense_eigh = median_time(lambda: empirical_esd(K_c), repeats=3)
    return report


# ----------------------------------------------------------------------------
# storage and time benchmark
# ----------------------------------------------------------------------------


def benchmark(n: int = 2048, p: int = 8192, seed: int = 0, proto: PiecewiseProto | None = None, repeats: int = TIMING_REPEATS) -> dict:
    """Bytes and median wall times of the dense and packed kernels (fig3 geometry)."""
    proto = proto or PiecewiseProto(t=2.0, s_minus=0.0, s_plus=1.0)
    params = canonical_scenarios("fig3").with_size(n, p)
    ds = sample_mixture(params, seed)
    G = gram(ds.X)
    K = kernel_from_gram(G, proto.to_kernel_func(), p)
    tk = ternary_from_gram(G, proto, p)
    v = np.random.default_rng(seed).standard_normal(n)
    return {
        "n": n,
        "p": p,
        "bytes_dense": K.nbytes,
        "bytes_packed": tk.nbytes,
        "ratio": K.nbytes / tk.nbytes,
        "time_pack": median_time(lambda: ternary_from_gram(G, proto, p), repeats),
        "time_matvec_packed": median_time(lambda: tk.matvec(v), repeats),
        "time_matvec_dense": median_time(lambda: K.matvec(v), repeats),
        "time_top_packed": median_time(lambda: top_eigvec(tk, seed), repeats),
        "time_top_dense": median_time(lambda: top_eigvec(K, seed), repeats),
        "time_eigh_dense": median_time(lambda: empirical_esd(K), min(repeats, 3)),
    }


# ----------------------------------------------------------------------------
# figure reproduction
# ----------------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """CSV with a header row and reals at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(x) for x in row])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")


def _panel(out: Path, tag: str, K: KernelMatrix, curve, labels, seed: int) -> tuple[dict, np.ndarray]:
    eigs = empirical_esd(K)
    spikes = detect_spikes(eigs, curve.support)
    lo_fit, hi_fit = estimate_edges(eigs, curve.support)
    write_csv(out / f"{tag}_eigenvalues.csv", ["eigenvalue"], [eigs])
    rec = {
        "spikes": spikes.tolist(),
        "l1_distance": esd_distance(eigs, curve),
        "raw_edges": [float(eigs[0]), float(eigs[-1])] if spikes.size == 0 else None,
        "fitted_edges": [lo_fit, hi_fit],
    }
    lam, v = top_eigvec(K, seed)
    write_csv(out / f"{tag}_top_eigenvector.csv", ["index", "component"], [np.arange(v.size), v])
    rec["top_eigenvalue"] = lam
    rec["top_alignment"] = class_alignment(v, labels)
    return rec, eigs


def reproduce_figure(name: str, out_dir: str | Path, seed: int = 0, size: tuple[int, int] | None = None) -> dict:
    """Regenerate the data behind one figure as CSV and JSON files.

    ``fig1``
        Sign kernel on the ``fig1`` scenario and its null counterpart.
    ``fig2``
        ``P1``, ``P2``, ``P3`` kernels on the ``fig2`` scenario, with Gaussian
        and standardized Student-t(7) entries.
    ``fig5``
        The prototype ``(t, s-, s+) = (2, 0, 1)`` against its cubic equivalent
        on the ``fig3`` scenario (Rademacher entries).

    ``size`` rescales the scenario to ``(n, p)`` for quick runs. Returns the
    summary that is also written to ``<name>_summary.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"figure": name, "seed": seed}
    if name == "fig1":
        params = canonical_scenarios("fig1")
        params = params.with_size(*size) if size else params
        f = parse_function("sign")
        co = compute_coeffs(f)
        curve = limiting_density(LimitParams.from_coeffs(co, params.c))
        write_csv(out / "fig1_density.csv", ["x", "density"], [curve.grid, curve.density])
        ds = sample_mixture(params, seed)
        summary["support"] = curve.support
        summary["K"] = _panel(out, "fig1_K", kernel_from_gram(gram(ds.X), f, params.p), curve, ds.labels, seed)[0]
        summary["K_N"] = _panel(out, "fig1_KN", kernel_from_gram(gram(ds.Z), f, params.p), curve, ds.labels, seed)[0]
    elif name == "fig2":
        base = canonical_scenarios("fig2")
        base = base.with_size(*size) if size else base
        dists = {"gaussian": base.dist, "student_t": StudentT(7)}
        funcs = [parse_function(s) for s in ("P1", "P2", "P3")]
        grams = {}
        for dname, dist in dists.items():
            params = MixtureParams(base.n, base.p, base.mu1, base.mu2, base.e1, base.e2, dist)
            ds = sample_mixture(params, seed)
            grams[dname] = (gram(ds.X), ds.labels)
        for f in funcs:
            co = compute_coeffs(f)
            curve = limiting_density(LimitParams.from_coeffs(co, base.c))
            write_csv(out / f"fig2_{f.name}_density.csv", ["x", "density"], [curve.grid, curve.density])
            panel = {"support": curve.support}
            eigs = {}
            for dname, (G, labels) in grams.items():
                K = kernel_from_gram(G, f, base.p)
                panel[dname], eigs[dname] = _panel(out, f"fig2_{f.name}_{dname}", K, curve, labels, seed)
            panel["gaussian_vs_student_t_l1"] = histogram_distance(eigs["gaussian"], eigs["student_t"], curve.support)
            summary[f.name] = panel
    elif name == "fig5":
        params = canonical_scenarios("fig3")
        params = params.with_size(*size) if size else params
        proto = PiecewiseProto(t=2.0, s_minus=0.0, s_plus=1.0)
        co = coeffs_of_piecewise(proto)
        cubic = cubic_equivalent(co)
        curve = limiting_density(LimitParams.from_coeffs(co, params.c))
        write_csv(out / "fig5_density.csv", ["x", "density"], [curve.grid, curve.density])
        ds = sample_mixture(params, seed)
        G = gram(ds.X)
        summary["support"] = curve.support
        summary["coeffs"] = co.as_dict()
        summary["cubic"] = {"c1": cubic.c1, "c2": cubic.c2, "c3": cubic.c3}
        summary["proto"] = _panel(out, "fig5_proto", kernel_from_gram(G, proto.to_kernel_func(), params.p), curve, ds.labels, seed)[0]
        summary["cubic_kernel"] = _panel(out, "fig5_cubic", kernel_from_gram(G, cubic.to_kernel_func(), params.p), curve, ds.labels, seed)[0]
        tk = ternary_from_gram(G, proto, params.p)
        summary["bytes_dense"] = 8 * params.n**2
        summary["bytes_packed"] = tk.nbytes
    else:
        raise KeyError(f"unknown figure {name!r}; expected fig1, fig2 or fig5")
    write_json(out / f"{name}_summary.json", summary)
    return summary
