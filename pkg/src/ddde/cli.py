"""Command-line surface tying the modules into reproducible experiments.

Exit codes: 0 success, 2 usage/validation, 3 numeric divergence, 4 I/O.
Every file-producing command writes a JSON config echo next to its main
output; re-running from the echo reproduces the output byte for byte.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields

from ._util import STREAM_FOLDS, STREAM_GENERATOR, atomic_write_text, consumer_rng
from .data import (
    Dataset,
    Domain,
    gen_circles,
    gen_correlated_gaussian,
    gen_gaussian,
    gen_gaussian_mixture,
    gen_two_moons,
    load_csv,
    sample_uniform,
    save_csv,
)
from .errors import DivergenceError, DomainError, FormatError, ValidationError
from .estimator import DddeModel, TrainConfig, train
from .evaluation import auroc, grid_eval, nll, save_grid_csv
from .kde import KDE_BANDWIDTH_GRID, KdeModel, kde_nll, select_bandwidth_cv

GENERATOR_NAMES = ("gaussian", "mixture9", "correlated", "moons", "circles", "uniform")


@dataclass
class RunConfig:
    """Validated experiment configuration; unknown JSON keys are rejected."""

    seed: int = 0
    data: str | None = None
    labeled: bool = False
    generator: dict | None = None
    domain: list | None = None  # per-dimension [low, high]; null -> unit box
    hidden: list = field(default_factory=lambda: [512, 512, 512])
    epochs: int = 200
    lr: float = 1e-3
    lr_decay_factor: float = 10.0 ** -0.5
    lr_decay_every: int = 50
    n_data: int = 32
    n_unif: int = 64
    beta: float = 0.9999
    epsilon: float = 1e-20
    objective_variant: str = "log-ema"
    dropout_p: float = 0.0
    kde_grid: list = field(default_factory=lambda: list(KDE_BANDWIDTH_GRID))
    kde_folds: int = 5
    checkpoint: str = "model.ddde"
    history: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**raw)
        cfg.to_train_config().validate()
        if cfg.domain is not None:
            cfg.resolve_domain(len(cfg.domain))
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise FormatError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def resolve_domain(self, dim: int) -> Domain:
        if self.domain is None:
            return Domain.unit(dim)
        try:
            lows = [float(b[0]) for b in self.domain]
            highs = [float(b[1]) for b in self.domain]
        except (TypeError, IndexError) as exc:
            raise ValidationError(
                "domain must be a list of per-dimension [low, high] pairs") from exc
        dom = Domain(lows, highs)
        if dom.dim != dim:
            raise ValidationError(f"domain is {dom.dim}-d but the data is {dim}-d")
        return dom

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, lr=self.lr, lr_decay_factor=self.lr_decay_factor,
            lr_decay_every=self.lr_decay_every, n_data=self.n_data,
            n_unif=self.n_unif, beta=self.beta, epsilon=self.epsilon,
            seed=self.seed, hidden=tuple(int(h) for h in self.hidden),
            dropout_p=self.dropout_p, objective_variant=self.objective_variant)


def build_dataset(spec: dict, seed: int) -> Dataset:
    """Materialize a generator spec {"name": ..., params...} deterministically."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in GENERATOR_NAMES:
        raise ValidationError(f"unknown generator {name!r}; choose from {GENERATOR_NAMES}")
    if "n" not in spec:
        raise ValidationError("generator spec needs a sample count n")
    n = int(spec.pop("n"))
    rng = consumer_rng(seed, STREAM_GENERATOR)
    if name == "gaussian":
        dim = int(spec.pop("dim", 2))
        mean = spec.pop("mean", 0.5)
        mean = [float(mean)] * dim if not isinstance(mean, (list, tuple)) else mean
        dataset = gen_gaussian(n, mean, float(spec.pop("sigma", 0.1)), rng)
    elif name == "mixture9":
        dataset = gen_gaussian_mixture(n, rng)
    elif name == "correlated":
        dataset = gen_correlated_gaussian(n, float(spec.pop("rho", 0.9)), rng)
    elif name == "moons":
        dataset = gen_two_moons(n, float(spec.pop("noise", 0.05)), rng)
    elif name == "circles":
        dataset = gen_circles(n, float(spec.pop("noise", 0.05)),
                              float(spec.pop("factor", 0.5)), rng)
    else:  # uniform
        dataset = sample_uniform(Domain.unit(int(spec.pop("dim", 2))), n, rng)
    if spec:
        raise ValidationError(f"unknown parameters for {name}: {sorted(spec)}")
    return dataset


def _write_echo(base_path, payload: dict) -> None:
    atomic_write_text(f"{base_path}.config.json", json.dumps(payload, indent=2) + "\n")


def cmd_gen_data(args) -> None:
    spec = {"name": args.generator, "n": args.n}
    if args.generator == "gaussian":
        spec.update(dim=args.dim, mean=args.mean, sigma=args.sigma)
    elif args.generator == "correlated":
        spec.update(rho=args.rho)
    elif args.generator == "moons":
        spec.update(noise=args.noise)
    elif args.generator == "circles":
        spec.update(noise=args.noise, factor=args.factor)
    elif args.generator == "uniform":
        spec.update(dim=args.dim)
    dataset = build_dataset(spec, args.seed)
    if args.labels and dataset.labels is None:
        raise ValidationError(f"generator {args.generator} produces no labels")
    if not args.labels:
        dataset = Dataset(dataset.points, provenance=dataset.provenance)
    save_csv(dataset, args.out)
    _write_echo(args.out, {"command": "gen-data", "generator": spec,
                           "seed": args.seed, "labels": args.labels, "out": args.out})
    print(f"wrote {dataset.n} x {dataset.dim} samples to {args.out}")


def cmd_train(args) -> None:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.data is not None:
        cfg.data, cfg.generator = args.data, None
    for name in ("checkpoint", "history", "epochs", "lr", "seed"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if cfg.generator is not None:
        dataset = build_dataset(cfg.generator, cfg.seed)
    elif cfg.data is not None:
        dataset = load_csv(cfg.data, labeled=cfg.labeled)
    else:
        raise ValidationError("config needs either a data path or a generator spec")
    domain = cfg.resolve_domain(dataset.dim)

    model, history = train(dataset, domain, cfg.to_train_config())
    model.save(cfg.checkpoint)
    history_path = cfg.history or f"{cfg.checkpoint}.history.csv"
    history.to_csv(history_path)
    _write_echo(cfg.checkpoint, asdict(cfg))
    if len(history):
        print(f"final objective = {history.objective[-1]:.6g}")
    else:
        print("no training epochs; checkpoint holds the initialized network")


def _load_model_and_data(checkpoint, data_path, labeled=False):
    model = DddeModel.load(checkpoint)
    dataset = load_csv(data_path, labeled=labeled)
    if dataset.dim != model.input_dim:
        raise ValidationError(
            f"checkpoint expects {model.input_dim}-d points, data has {dataset.dim}-d")
    return model, dataset


def cmd_eval(args) -> None:
    model, dataset = _load_model_and_data(args.checkpoint, args.data)
    value = nll(model.log_density, dataset, domain=model.domain)
    print(f"nll = {value:.6g}")


def cmd_grid(args) -> None:
    model = DddeModel.load(args.checkpoint)
    grid = grid_eval(model.log_density, model.domain, args.resolution)
    save_grid_csv(grid, args.out)
    _write_echo(args.out, {"command": "grid", "checkpoint": args.checkpoint,
                           "resolution": args.resolution, "out": args.out})
    print(f"wrote {grid.values.size} cells to {args.out}")


def cmd_score(args) -> None:
    model, dataset = _load_model_and_data(args.checkpoint, args.data,
                                          labeled=args.labeled)
    scores = model.anomaly_score(dataset.points)
    atomic_write_text(args.out, "\n".join(f"{s:.17g}" for s in scores) + "\n")
    _write_echo(args.out, {"command": "score", "checkpoint": args.checkpoint,
                           "data": args.data, "labeled": args.labeled, "out": args.out})
    print(f"wrote {scores.size} scores to {args.out}")
    if dataset.labels is not None:
        print(f"auroc = {auroc(scores, dataset.labels):.6g}")


def cmd_kde(args) -> None:
    train_ds = load_csv(args.train)
    test_ds = load_csv(args.test)
    if train_ds.dim != test_ds.dim:
        raise ValidationError(
            f"train data is {train_ds.dim}-d, test data is {test_ds.dim}-d")
    grid = ([float(v) for v in args.grid.split(",")] if args.grid
            else list(KDE_BANDWIDTH_GRID))
    bandwidth = select_bandwidth_cv(train_ds, grid, k=args.folds,
                                    rng=consumer_rng(args.seed, STREAM_FOLDS))
    model = KdeModel(train_ds, bandwidth)
    print(f"bandwidth = {bandwidth:.6g}")
    print(f"nll = {kde_nll(model, test_ds):.6g}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddde",
        description="Neural data-density estimation with a KDE baseline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a toy dataset CSV")
    p.add_argument("generator", choices=GENERATOR_NAMES)
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--mean", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--factor", type=float, default=0.5)
    p.add_argument("--labels", action="store_true",
                   help="append the component label column")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a density estimator from a JSON config")
    p.add_argument("--config", help="JSON config path (defaults apply without it)")
    p.add_argument("--data", help="override: training CSV path")
    p.add_argument("--checkpoint", help="override: checkpoint output path")
    p.add_argument("--history", help="override: history CSV output path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="test-set NLL of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="test CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="export a log-density grid CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("score", help="anomaly scores (and AUROC with labels)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labeled", action="store_true",
                   help="data CSV carries a trailing 0/1 label column; 1 = anomaly")
    p.add_argument("--out", required=True, help="scores CSV output path")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("kde", help="cross-validated KDE baseline NLL")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--grid", help="comma-separated bandwidth grid")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_kde)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
