"""Mean pooling over non-padding tokens, per layer."""

from __future__ import annotations

from typing import Sequence

import torch


def masked_mean_layers(hidden_states: Sequence[torch.Tensor], attention_mask: torch.Tensor) -> torch.Tensor:
    """(L tensors of shape (B, T, d), mask (B, T)) -> (B, L, d).

    Padding positions (mask 0) are excluded exactly: they are multiplied by
    zero before summation and the divisor counts real tokens only.
    """
    mask = attention_mask.to(hidden_states[0].dtype).unsqueeze(-1)  # (B, T, 1)
    counts = mask.sum(dim=1)  # (B, 1)
    if torch.any(counts == 0):
        raise ValueError("an example has no non-padding tokens")
    pooled = [(h * mask).sum(dim=1) / counts for h in hidden_states]
    return torch.stack(pooled, dim=1)
