"""Reference torch message-passing models (the export source).

Each layer computes ``relu(W_self x_v + W_nbr aggr{x_u : (u,v) in E} + b)``
over incoming neighborhoods with sum, max or mean aggregation; empty
neighborhoods aggregate to zeros.  An optional readout head applies a linear
map to the sum of final-layer features for graph-level prediction.
"""

from __future__ import annotations

import torch
from torch import nn


def aggregate_incoming(
    x: torch.Tensor, edges: torch.Tensor, num_nodes: int, aggregation: str
) -> torch.Tensor:
    """Aggregate source features onto edge targets; empty sets give zeros.

    ``edges`` is an ``(E, 2)`` long tensor of ``(source, target)`` pairs.
    """
    out = x.new_zeros((num_nodes, x.shape[1]))
    if edges.numel() == 0:
        return out
    src, dst = edges[:, 0], edges[:, 1]
    messages = x[src]
    if aggregation == "sum":
        out.index_add_(0, dst, messages)
        return out
    if aggregation == "mean":
        out.index_add_(0, dst, messages)
        counts = torch.zeros(num_nodes, dtype=x.dtype, device=x.device)
        counts.index_add_(0, dst, torch.ones_like(dst, dtype=x.dtype))
        return out / counts.clamp(min=1.0).unsqueeze(1)
    # max with the empty-neighborhood-is-zero convention
    filled = torch.full((num_nodes, x.shape[1]), float("-inf"), dtype=x.dtype)
    filled.index_reduce_(0, dst, messages, "amax", include_self=True)
    has_nbr = torch.zeros(num_nodes, dtype=torch.bool)
    has_nbr[dst] = True
    out[has_nbr] = filled[has_nbr]
    return out


class GraphLayer(nn.Module):
    def __init__(self, din: int, dout: int):
        super().__init__()
        self.self_lin = nn.Linear(din, dout, bias=True)
        self.nbr_lin = nn.Linear(din, dout, bias=False)

    def forward(self, x, edges, aggregation):
        agg = aggregate_incoming(x, edges, x.shape[0], aggregation)
        return torch.relu(self.self_lin(x) + self.nbr_lin(agg))


class MessagePassingGNN(nn.Module):
    """Stack of graph layers, optionally with a sum-pooling readout head."""

    def __init__(self, dims: list[int], aggregation: str, num_graph_classes: int | None = None):
        super().__init__()
        if aggregation not in ("sum", "max", "mean"):
            raise ValueError(f"unknown aggregation {aggregation!r}")
        self.aggregation = aggregation
        self.dims = list(dims)
        self.layers = nn.ModuleList(
            GraphLayer(dims[i], dims[i + 1]) for i in range(len(dims) - 1)
        )
        self.readout = (
            nn.Linear(dims[-1], num_graph_classes, bias=True)
            if num_graph_classes is not None
            else None
        )

    def node_features(self, x: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            x = layer(x, edges, self.aggregation)
        return x

    def forward(self, x: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
        x = self.node_features(x, edges)
        if self.readout is not None:
            return self.readout(x.sum(dim=0))
        return x
