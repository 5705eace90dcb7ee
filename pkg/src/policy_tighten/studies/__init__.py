"""Shipped case-study specifications (YAML package data)."""
