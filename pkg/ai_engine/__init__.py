"""Numeric core: autodiff engine, gated encoder, batching and training loops."""
