"""Tests de integración para la línea de comandos."""
