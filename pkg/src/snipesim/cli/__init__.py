"""Command-line interface for snipesim."""
