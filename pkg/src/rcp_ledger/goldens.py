"""Committed golden digests and the scenario label coverage map."""

from __future__ import annotations

import json
from importlib import resources


def _load(name: str) -> dict:
    path = resources.files("rcp_ledger").joinpath("data", name)
    with path.open("r", encoding="utf-8") as handle:
        return json.load(handle)


def golden_digests() -> dict:
    """scenario name -> {transcript_digest, final_state_digest}."""
    return _load("goldens.json")


def coverage_map() -> dict:
    """transcript step label -> scenarios it appears in."""
    return _load("coverage_map.json")
