"""Figure rendering for the report commands.

Every renderer writes one PNG next to the delimited report it illustrates
and closes its figure afterwards. matplotlib is imported lazily and pinned
to the Agg backend, so importing this module costs nothing and rendering
works on headless machines. Given identical inputs the emitted bytes are
identical; nothing here consults clocks or global RNG state.
"""

from __future__ import annotations

from typing import Sequence

# Longest tail of bars worth drawing before labels become unreadable.
_MAX_BARS = 20
_MAX_HEATMAP_KEYS = 40
_MAX_RANKING_LINES = 12
_DPI = 120


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _barh_figure(plt, labels: Sequence[str], values: Sequence[float], title: str, xlabel: str):
    height = max(2.0, 0.35 * len(labels) + 1.2)
    fig, ax = plt.subplots(figsize=(7.5, height))
    positions = range(len(labels))
    # Reverse so the largest bar sits at the top of the chart.
    ax.barh([p for p in positions][::-1], values, color="#4878a8")
    ax.set_yticks([p for p in positions][::-1])
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    if not labels:
        ax.text(0.5, 0.5, "no rows", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    return fig


def render_census(census: Sequence[tuple], path) -> None:
    """Bar chart of the most frequent schemas; census rows are (key, count, areas)."""
    plt = _pyplot()
    rows = list(census)[:_MAX_BARS]
    fig = _barh_figure(
        plt,
        [key for key, _, _ in rows],
        [count for _, count, _ in rows],
        "schema census (top %d of %d)" % (len(rows), len(census)),
        "occurrences",
    )
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_ztable(ztable, path) -> None:
    """Heatmap of z-scores over areas x schemas, widest-spread schemas first."""
    plt = _pyplot()
    spread = {
        key: max(abs(ztable.z[(area, key)]) for area in ztable.universe)
        for key in ztable.keys
    }
    shown = sorted(ztable.keys, key=lambda key: (-spread[key], key))[:_MAX_HEATMAP_KEYS]
    shown.sort()
    grid = [[ztable.z[(area, key)] for key in shown] for area in ztable.universe]
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.28 * len(shown) + 2), max(2.5, 0.3 * len(ztable.universe) + 1.5))
    )
    if shown:
        image = ax.imshow(grid, aspect="auto", cmap="coolwarm")
        fig.colorbar(image, ax=ax, label="z")
        ax.set_xticks(range(len(shown)))
        ax.set_xticklabels(shown, rotation=90, fontsize=6)
        ax.set_yticks(range(len(ztable.universe)))
        ax.set_yticklabels(ztable.universe, fontsize=7)
    else:
        ax.text(0.5, 0.5, "no rows", ha="center", va="center", transform=ax.transAxes)
    ax.set_title("schema z-scores by area")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_candidate_gaps(candidates: Sequence, path, title: str = "transfer candidates") -> None:
    """Bar chart of z-gaps for the ranked transfer candidates."""
    plt = _pyplot()
    rows = list(candidates)[:_MAX_BARS]
    fig = _barh_figure(
        plt,
        [candidate.key for candidate in rows],
        [candidate.gap for candidate in rows],
        title,
        "z-gap (source minus target)",
    )
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_pair_potentials(pairs: Sequence, path) -> None:
    """Bar chart of transfer potential for the ranked area pairs."""
    plt = _pyplot()
    rows = list(pairs)[:_MAX_BARS]
    fig = _barh_figure(
        plt,
        ["%s > %s" % (pair.source, pair.target) for pair in rows],
        [pair.potential for pair in rows],
        "area-pair transfer potential",
        "potential",
    )
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_rankings(results: Sequence, path) -> None:
    """Normalized score by rank position, one line per query."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    shown = list(results)[:_MAX_RANKING_LINES]
    for result in shown:
        scores = [match_result.score.normalized for _, match_result in result.ranking]
        ax.plot(range(1, len(scores) + 1), scores, marker="o", label=result.query_id)
    ax.set_xlabel("rank")
    ax.set_ylabel("normalized score")
    ax.set_title("ranked analogues per query")
    if shown:
        ax.legend(fontsize=7, loc="best")
        ax.set_xticks(range(1, 1 + max(len(r.ranking) for r in shown)))
    else:
        ax.text(0.5, 0.5, "no rankings", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_battery(report, path) -> None:
    """Key-mapping hits against totals, one bar pair per battery case."""
    plt = _pyplot()
    cases = list(report.cases)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(cases) + 1.5), 4.0))
    positions = range(len(cases))
    ax.bar([p - 0.2 for p in positions], [c.total for c in cases], width=0.4,
           color="#c5cbd3", label="keys")
    ax.bar([p + 0.2 for p in positions], [c.hits for c in cases], width=0.4,
           color="#4878a8", label="hits")
    ax.set_xticks(list(positions))
    ax.set_xticklabels([c.name for c in cases], rotation=15, fontsize=7, ha="right")
    ax.set_ylabel("key mappings")
    ax.set_title("battery: %d/%d" % (report.total_hits, report.total_keys))
    if cases:
        ax.legend(fontsize=8)
    else:
        ax.text(0.5, 0.5, "no cases", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
