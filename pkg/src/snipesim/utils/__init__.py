"""Utility modules for snipesim."""
