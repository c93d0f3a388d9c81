"""Tests para el kit de spotting de texto estructurado KDX."""
