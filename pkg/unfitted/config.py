"""
🔧 Configuration
================
Process-level settings read from the environment, the per-scheme
parameter defaults and the YAML study loader.

A study file holds one section per CLI subcommand:

    convergence:
      scheme: dirichlet
      problem: flower
      levels: [16, 32, 64, 128]
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

import yaml

from unfitted.errors import ConfigError

# ==========================================
# 🔑 CONFIGURATION - Reading from environment
# ==========================================
OUTPUT_DIR = os.getenv("UNFITTED_OUTPUT_DIR", "include/results")
THREADS = int(os.getenv("UNFITTED_THREADS", "1"))
LOG_LEVEL = os.getenv("UNFITTED_LOG_LEVEL", "INFO")
SEED = int(os.getenv("UNFITTED_SEED", "0"))

SECTIONS = ("solve", "convergence", "rotate-sweep", "param-sweep", "compare")

SCHEMES = (
    "dirichlet",
    "neumann",
    "robin",
    "cutfem_lagrange",
    "cutfem_sym",
    "cutfem_asym",
    "cutfem_neumann",
)

# Defaults per scheme; anything not listed falls back to SchemeParams defaults
DEFAULT_PARAMETERS = {
    "dirichlet": {"gamma": 1.0, "sigma": 0.01},
    "neumann": {"gamma_div": 1.0, "gamma_1": 10.0, "sigma": 0.01},
    "robin": {"gamma_div": 1.0, "gamma_1": 10.0, "sigma": 0.01, "kappa": 1.0},
    "cutfem_lagrange": {"sigma": 0.01},
    "cutfem_sym": {"gamma": 5.0, "sigma": 0.1},
    "cutfem_asym": {"gamma": 1.0, "sigma": 0.01},
    "cutfem_neumann": {"sigma": 0.01},
}

# CutFEM scheme each fictitious-domain scheme is compared against in `compare`
COMPARE_PARTNERS = {
    "dirichlet": "cutfem_asym",
    "neumann": "cutfem_neumann",
}


def load_study_section(path, section: str) -> dict:
    """Read one section of a YAML study file as a plain dict."""
    if section not in SECTIONS:
        raise ConfigError(f"❌ Unknown study section '{section}' (known: {', '.join(SECTIONS)})")
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigError(f"❌ Study config not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"❌ Study config {path} is not valid YAML: {e}") from e

    if not isinstance(document, dict):
        raise ConfigError(f"❌ Study config {path} must be a mapping of sections")
    if section not in document:
        raise ConfigError(f"❌ Section '{section}' missing from {path} (found: {', '.join(map(str, document))})")
    values = document[section] or {}
    if not isinstance(values, dict):
        raise ConfigError(f"❌ Section '{section}' of {path} must be a key: value mapping")
    logging.info(f"✅ Loaded section '{section}' from {path}")
    return dict(values)
