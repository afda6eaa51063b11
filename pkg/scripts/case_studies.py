#!/usr/bin/env python3
"""
Fit rule sets on the public case-study datasets (Titanic, Lalonde).

Each dataset runs independently - if one fails to download or fit, the others still run.
Downloads are cached under data/.
"""

import sys
from datetime import datetime
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from causal_rules.config import SearchConfig
from causal_rules.logs import configure_logging
from causal_rules.pipeline import fit_pipeline, prepare
from causal_rules.propensity import ipw_ate
from sources import LalondeSource, TitanicSource

CACHE_DIR = Path(__file__).parent.parent / "data"

CASES = [
    ("Titanic", TitanicSource(), SearchConfig(lam=0.5, k=3, max_len=2, m_min=10)),
    ("Lalonde", LalondeSource(), SearchConfig(lam=0.5, k=3, max_len=3, m_min=10)),
]


def run_case(name: str, source, search: SearchConfig) -> dict:
    """Fetch, fit and print one dataset."""
    print(f"\n{'='*50}")
    print(f"{name}")
    print('='*50)

    try:
        table = source.load(CACHE_DIR)
        model = fit_pipeline(table, search=search)
        ate = ipw_ate(prepare(model, table))
        print(f"  Units: {table.n_units} ({table.n_treated} treated)")
        print(f"  Population IPW effect: {ate:.4f}")
        for line in model.ruleset.lines():
            print(f"  {line}")
        return {"rules": len(model.ruleset), "ate": ate}
    except Exception as e:
        print(f"  ERROR: {e}")
        return {"rules": 0, "ate": None}


def main():
    configure_logging("WARNING")
    print("="*60)
    print("CAUSAL RULES - CASE STUDIES")
    print(f"Started: {datetime.now().isoformat()}")
    print("="*60)

    stats = {name: run_case(name, source, search) for name, source, search in CASES}

    print("\n" + "="*60)
    print("SUMMARY")
    print("="*60)
    for name, result in stats.items():
        status = "OK" if result["ate"] is not None else "FAILED"
        print(f"  {name}: {result['rules']} rules [{status}]")


if __name__ == '__main__':
    main()
