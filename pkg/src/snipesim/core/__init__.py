"""Ledger, PSBT, inscription, mempool, indexer and chain engine."""
