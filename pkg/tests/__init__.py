"""Tests for snipesim."""
