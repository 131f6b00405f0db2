"""
snipesim - BRC20 PSBT sniping simulator.

A deterministic desk-scale model of Bitcoin's UTXO, mempool and PSBT layer
that runs marketplace purchases, sniping attacks and their mitigations.
"""

__version__ = "1.0.0"
__author__ = "snipesim developers"
__description__ = "Deterministic simulator of BRC20 PSBT sniping and its mitigations"
