"""Desk-scale training demo: inject the bound losses into a torch graph.

Phase 1 trains a tiny two-layer encoder with CE + TTL on synthetic
prompt/gold clusters and tracks the mean bridge cosine (rho).  Phase 2
trains a fresh encoder plus the projection with a logistic difference-pair
objective + TPO, with lambda_dyn supplied by the EMA scheduler.  The demo
proves gradient plumbing, not alignment quality: data is synthetic Gaussian
clusters, not model states.
"""

import argparse

import numpy as np
import torch
import torch.nn.functional as F

from . import (
    BoundBatch,
    SchedulerConfig,
    SchedulerState,
    bound_tpo,
    bound_ttl,
    scheduler_update,
)

LN_EPS = 1e-5


class TtlFunction(torch.autograd.Function):
    """Forward = bound TTL loss; backward injects the analytic gradients."""

    @staticmethod
    def forward(ctx, h_prompt, h_model, h_gold):
        batch = BoundBatch(
            h_prompt=np.ascontiguousarray(h_prompt.detach().numpy(), dtype=np.float64),
            h_model=np.ascontiguousarray(h_model.detach().numpy(), dtype=np.float64),
            h_gold=np.ascontiguousarray(h_gold.detach().numpy(), dtype=np.float64),
        )
        res = bound_ttl(batch, want_grads=True)
        ctx.g_prompt = torch.from_numpy(res.grads["h_prompt"]).to(h_prompt.dtype)
        ctx.g_model = torch.from_numpy(res.grads["h_model"]).to(h_model.dtype)
        return h_prompt.new_tensor(res.loss)

    @staticmethod
    def backward(ctx, grad_out):
        return grad_out * ctx.g_prompt, grad_out * ctx.g_model, None


class TpoFunction(torch.autograd.Function):
    """Forward = bound TPO loss on (delta_h, P); backward injects both grads."""

    @staticmethod
    def forward(ctx, delta_h, projection, topic_ids, topic_vectors):
        dh = np.ascontiguousarray(delta_h.detach().numpy(), dtype=np.float64)
        batch = BoundBatch(
            h_chosen=dh,
            h_rejected=np.zeros_like(dh),
            topic_ids=list(topic_ids),
        )
        res = bound_tpo(
            batch,
            topic_vectors,
            np.ascontiguousarray(projection.detach().numpy(), dtype=np.float64),
            use_layer_norm=False,
            want_grads=True,
        )
        ctx.g_dh = torch.from_numpy(res.grads["delta_h"]).to(delta_h.dtype)
        ctx.g_P = torch.from_numpy(res.grads["P"]).to(projection.dtype)
        return delta_h.new_tensor(res.loss)

    @staticmethod
    def backward(ctx, grad_out):
        return grad_out * ctx.g_dh, grad_out * ctx.g_P, None, None


class TwoLayerEncoder(torch.nn.Module):
    def __init__(self, dim, hidden):
        super().__init__()
        self.fc1 = torch.nn.Linear(dim, hidden)
        self.fc2 = torch.nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(torch.tanh(self.fc1(x)))


def _ttl_phase(seed, steps, trace, batch_size=16, dim=12, clusters=4,
               lambda_topo=0.5, lr=0.02):
    gen = torch.Generator().manual_seed(seed)
    centers_p = torch.randn(clusters, dim, generator=gen) * 3.0
    centers_a = centers_p + torch.randn(clusters, dim, generator=gen) * 2.0
    labels = torch.arange(batch_size) % clusters
    x_prompt = centers_p[labels] + 0.3 * torch.randn(batch_size, dim, generator=gen)
    x_answer = centers_a[labels] + 0.3 * torch.randn(batch_size, dim, generator=gen)
    x_teacher = x_answer + 0.1 * torch.randn(batch_size, dim, generator=gen)

    torch.manual_seed(seed)
    encoder = TwoLayerEncoder(dim, 24)
    head = torch.nn.Linear(dim, clusters)
    opt = torch.optim.Adam(
        list(encoder.parameters()) + list(head.parameters()), lr=lr
    )
    for step in range(steps):
        opt.zero_grad()
        h_prompt = encoder(x_prompt)
        h_model = encoder(x_teacher)
        ce = F.cross_entropy(head(h_model), labels)
        ttl = TtlFunction.apply(h_prompt, h_model, x_answer)
        total = ce + lambda_topo * ttl
        total.backward()
        opt.step()
        trace.append(
            {
                "phase": "ttl",
                "step": step,
                "ce": float(ce.item()),
                "ttl": float(ttl.item()),
                "combined": float(total.item()),
                "mean_rho": 1.0 - float(ttl.item()),
            }
        )


def _tpo_phase(seed, steps, trace, batch_size=12, dim=10, d_s=6, topics=3, lr=0.02):
    gen = torch.Generator().manual_seed(seed + 1)
    topic_vectors = {
        t: np.asarray(torch.randn(d_s, generator=gen).numpy(), dtype=np.float64)
        for t in range(topics)
    }
    shift = torch.randn(topics, dim, generator=gen) * 2.0
    base = torch.randn(batch_size, dim, generator=gen) * 2.0
    topic_ids = [i % topics for i in range(batch_size)]
    x_chosen = base + shift[torch.tensor(topic_ids)] + 0.2 * torch.randn(
        batch_size, dim, generator=gen
    )
    x_rejected = base + 0.2 * torch.randn(batch_size, dim, generator=gen)

    torch.manual_seed(seed + 1)
    encoder = TwoLayerEncoder(dim, 20)
    scorer = torch.nn.Linear(dim, 1)
    projection = torch.nn.Parameter(torch.randn(dim, d_s) * (6.0 / (dim + d_s)) ** 0.5)
    opt = torch.optim.Adam(
        list(encoder.parameters()) + list(scorer.parameters()) + [projection], lr=lr
    )
    sched_state = SchedulerState()
    sched_cfg = SchedulerConfig(warmup_steps=min(5, max(steps - 1, 0)))
    for step in range(steps):
        opt.zero_grad()
        h_ch = encoder(x_chosen)
        h_rj = encoder(x_rejected)
        pair = F.softplus(scorer(h_rj) - scorer(h_ch)).mean()
        delta_h = F.layer_norm(h_ch, (dim,), eps=LN_EPS) - F.layer_norm(
            h_rj, (dim,), eps=LN_EPS
        )
        tpo = TpoFunction.apply(delta_h, projection, topic_ids, topic_vectors)
        sched_state = scheduler_update(
            sched_state, sched_cfg, float(pair.item()), float(tpo.item())
        )
        total = pair + sched_state.lambda_dyn * tpo
        total.backward()
        opt.step()
        trace.append(
            {
                "phase": "tpo",
                "step": step,
                "pair": float(pair.item()),
                "tpo": float(tpo.item()),
                "lambda_dyn": float(sched_state.lambda_dyn),
                "combined": float(total.item()),
                "mean_sigma": 1.0 - float(tpo.item()),
            }
        )


def toy_training_demo(seed: int = 0, steps: int = 200) -> list:
    """Run both phases; returns the per-step metrics trace.

    With steps > 0, asserts that the mean bridge cosine (rho) on the TTL
    training batch strictly increases from the first to the last step.
    """
    torch.set_num_threads(1)
    trace: list = []
    if steps <= 0:
        return trace
    _ttl_phase(seed, steps, trace)
    _tpo_phase(seed, steps, trace)
    rhos = [row["mean_rho"] for row in trace if row["phase"] == "ttl"]
    assert rhos[-1] > rhos[0], (
        f"mean bridge cosine did not increase: {rhos[0]:.4f} -> {rhos[-1]:.4f}"
    )
    return trace


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args(argv)
    trace = toy_training_demo(seed=args.seed, steps=args.steps)
    for row in trace:
        if row["phase"] == "ttl":
            print(
                f"ttl step {row['step']:4d}  ce {row['ce']:.4f}  "
                f"ttl {row['ttl']:.4f}  total {row['combined']:.4f}  "
                f"rho {row['mean_rho']:.4f}"
            )
        else:
            print(
                f"tpo step {row['step']:4d}  pair {row['pair']:.4f}  "
                f"tpo {row['tpo']:.4f}  lambda {row['lambda_dyn']:.4f}  "
                f"sigma {row['mean_sigma']:.4f}"
            )
    if trace:
        rhos = [r["mean_rho"] for r in trace if r["phase"] == "ttl"]
        print(f"mean rho: {rhos[0]:.4f} -> {rhos[-1]:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
