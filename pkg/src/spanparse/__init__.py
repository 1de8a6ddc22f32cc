"""Span-based constituency parsing with a self-attention encoder and chart decoder."""

