"""Classical reference models: logistic regression and a quadratic-activation MLP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


class BaselineError(Exception):
    pass


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision(X) > 0).astype(int)


@dataclass
class LinearConfig:
    lr: float = 0.5
    max_iters: int = 5000
    tol: float = 1e-6


def train_linear(X: np.ndarray, y: np.ndarray, cfg: LinearConfig | None = None
                 ) -> tuple[LinearModel, float]:
    """Full-batch gradient descent on the logistic loss until the gradient norm
    drops below tol or the iteration cap is hit. Returns (model, train accuracy)."""
    cfg = cfg or LinearConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if set(np.unique(y)) - {0, 1}:
        raise BaselineError("binary labels required")
    if len(np.unique(y)) < 2:
        raise BaselineError("degenerate single-class data")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(cfg.max_iters):
        z = X @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -30, 30)))
        err = (p - y) / n
        gw = X.T @ err
        gb = err.sum()
        if np.sqrt(np.sum(gw ** 2) + gb ** 2) < cfg.tol:
            break
        w -= cfg.lr * gw
        b -= cfg.lr * gb
    model = LinearModel(w, float(b))
    acc = float(np.mean(model.predict(X) == y))
    return model, acc


class QuadMLP(torch.nn.Module):
    """One hidden layer with x -> x^2 activation; output is therefore a
    quadratic polynomial of the input features."""

    def __init__(self, n_features: int, hidden: int = 8, n_classes: int = 2):
        super().__init__()
        self.hidden = torch.nn.Linear(n_features, hidden)
        self.out = torch.nn.Linear(hidden, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.out(self.hidden(x) ** 2)

    def predict(self, X: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            logits = self(torch.as_tensor(np.asarray(X), dtype=torch.float32))
        return logits.argmax(dim=1).numpy()


@dataclass
class MLPConfig:
    hidden: int = 8
    lr: float = 1e-2
    epochs: int = 500
    seed: int = 0


def train_quad_mlp(X: np.ndarray, y: np.ndarray, cfg: MLPConfig | None = None
                   ) -> tuple[QuadMLP, float]:
    """Full-batch Adam on cross-entropy; returns (model, train accuracy)."""
    cfg = cfg or MLPConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    torch.manual_seed(cfg.seed)
    model = QuadMLP(X.shape[1], cfg.hidden, n_classes=int(y.max()) + 1)
    xt = torch.as_tensor(X, dtype=torch.float32)
    yt = torch.as_tensor(y, dtype=torch.long)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = torch.nn.CrossEntropyLoss()
    for _ in range(cfg.epochs):
        opt.zero_grad()
        loss = loss_fn(model(xt), yt)
        loss.backward()
        opt.step()
    acc = float(np.mean(model.predict(X) == y))
    return model, acc
