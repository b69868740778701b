"""Python bindings for the brute-force address collision simulator."""

import json
from typing import Optional

from . import _bfsim
from ._bfsim import (
    AddressDecodeError,
    ConfigError,
    ModelParams,
    ParamsError,
    ScriptParseError,
    __version__,
    base58check,
    decode_address,
    derive_address,
    derive_pubkey,
    epsilon_bound,
    epsilon_exact,
    execute_script,
    key_from_int,
    keygen,
    monte_carlo_evidence,
    optimize_k,
    preimage_counts,
    reward_script,
    sign,
    verify,
)


def simulate(config_text: str = "", seed: Optional[int] = None) -> dict:
    """Run a scenario; raises RuntimeError if a ledger invariant breaks."""
    text, violation = _bfsim.simulate_json(config_text, seed)
    if violation is not None:
        raise RuntimeError(f"invariant violated: {violation}")
    return json.loads(text)

