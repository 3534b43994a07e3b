"""Moral-value conditioning and political compass scoring (C++ core)."""

from pathlib import Path

from ._core import (  # noqa: F401
    MoralLensError,
    WeightTable,
    build_profile,
    data_dir,
    load_instrument,
    parse_judge_rating,
    parse_response,
    render_judge_prompt,
    render_prompt,
    run_experiment,
    score,
    set_data_dir,
    shift,
    summarize,
)

# Installed wheels ship the data tree inside the package.
_bundled = Path(__file__).with_name("data")
if _bundled.is_dir():
    set_data_dir(_bundled)


def default_weights() -> WeightTable:
    return WeightTable.load(data_dir() / "weights" / "default_pct_weights.json")


def bundled_instrument(name: str):
    return load_instrument(data_dir() / "instruments" / f"{name}.json")
