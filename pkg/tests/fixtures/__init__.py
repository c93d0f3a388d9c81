"""Escenas sintéticas y datos de prueba para los tests."""
