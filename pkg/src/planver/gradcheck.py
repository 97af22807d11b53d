"""Central finite-difference gradient verification for the training
objectives. The checker perturbs every scalar parameter, so keep the model
tiny (width <= 16) and run it in float64.
"""

from __future__ import annotations

import torch


def gradient_check(loss_fn, params: list[torch.nn.Parameter], h: float = 1e-4,
                   analytic_grads=None) -> float:
    """Worst per-coordinate relative error between the analytic gradient of
    loss_fn() and central finite differences over every entry of params."""
    if analytic_grads is None:
        analytic_grads = torch.autograd.grad(loss_fn(), params)
    worst = 0.0
    with torch.no_grad():
        for p, g in zip(params, analytic_grads):
            flat = p.view(-1)
            gflat = g.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = loss_fn().item()
                flat[i] = orig - h
                down = loss_fn().item()
                flat[i] = orig
                fd = (up - down) / (2.0 * h)
                a = gflat[i].item()
                err = abs(a - fd) / max(abs(a) + abs(fd), 1e-6)
                worst = max(worst, err)
    return worst


def model_gradient_check(model, batch_loss_fn, h: float = 1e-4,
                         corrupt: tuple[str, float] | None = None) -> float:
    """Check all parameters of a model against finite differences of
    batch_loss_fn(model). corrupt=(param_name, delta) biases that parameter's
    analytic gradient to prove the harness catches faults."""
    model = model.double()
    params = [p for p in model.parameters() if p.requires_grad]

    def loss_fn():
        return batch_loss_fn(model)

    grads = list(torch.autograd.grad(loss_fn(), params))
    if corrupt is not None:
        name, delta = corrupt
        target = dict(model.named_parameters())[name]
        idx = params.index(target)
        grads[idx] = grads[idx].clone()
        grads[idx].view(-1)[0] += delta
    return gradient_check(loss_fn, params, h, analytic_grads=grads)
