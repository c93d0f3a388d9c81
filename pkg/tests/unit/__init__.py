"""Tests unitarios para componentes individuales."""
