"""Command-line front end.

Every run prints ``name=value`` records (the first is always
``record=config``) to stdout and, with ``--out``, to ``<out>/report.txt``
alongside any keys, messages, codes or family files it produced.

Random streams: with master seed ``S``, code generation draws from
``stream(S, 0)`` and the run itself from ``stream(S, 1)`` (``stream(S, 1, m)``
for the ``m``-th entry of an ``M`` list).  Experiments derive per-trial or
per-chunk streams from those by counter, so output is identical for a fixed
config and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import adversary, analysis, owf, protocol
from .streams import stream

COMMANDS = (
    "keygen",
    "family-info",
    "distribute",
    "sign",
    "verify",
    "run-honest",
    "attack-forge",
    "attack-repudiate",
    "attack-two-group",
    "lemma-check",
)
ABORT, CONFIG_ERROR = 1, 2

REPUDIATE_STRATEGIES = ("honest", "symmetric-pair", "type1", "type2", "minus-test")
TWO_GROUP_STRATEGIES = ("honest", "symmetric-pair", "minus-test")
FORGE_STRATEGIES = ("random-guess", "measure-then-guess")


class ConfigParseError(ValueError):
    pass


@dataclass
class RunConfig:
    family: str = "rotation"
    L: int = 8
    M: tuple[int, ...] = (16,)
    T: Optional[int] = None
    t: int = 2
    method: str = "distributed-swap"
    c1: float = 0.0
    c2: Optional[float] = None
    ladder: Optional[tuple[float, ...]] = None
    code: Optional[str] = None
    code_length: int = 32
    strategy: Optional[str] = None
    bases: tuple[str, ...] = ("Z",)
    mode: str = "exact"
    trials: int = 1000
    seed: int = 0
    out: Optional[str] = None
    holevo_override: bool = False
    bit: int = 0
    Delta: Optional[float] = None
    r: int = 2
    samples: int = 200
    keys: Optional[str] = None
    message: Optional[str] = None


HELP = {
    "family": "one-way function family: rotation or fingerprint",
    "L": "private key length in bits (fingerprint: code dimension)",
    "M": "key pairs; attack commands accept a comma list",
    "T": "public-key copies per key (default: 4, 7 for attack-two-group, 1 for fingerprint)",
    "t": "recipients for the symmetry and trusted-center methods",
    "method": "key distribution: distributed-swap, trusted-center or symmetry",
    "c1": "top acceptance threshold",
    "c2": "rejection threshold (default: 0.8 times the forgery bound)",
    "ladder": "full threshold ladder c1,c2,... (overrides c1/c2)",
    "code": "code file for the fingerprint family ('code N_c K' then K rows)",
    "code_length": "length of the random code drawn when no code file is given",
    "strategy": "attack strategy (default: random-guess for attack-forge, symmetric-pair otherwise)",
    "bases": "measure-then-guess bases per copy, comma list of Z/X",
    "mode": "exact or mc",
    "trials": "Monte Carlo trials",
    "seed": "master seed (unsigned 64-bit)",
    "out": "output directory for report.txt and artifacts",
    "holevo_override": "allow T*n >= L",
    "bit": "message bit to sign",
    "Delta": "deviation parameter (default: c2-c1 for attacks, 0.25 for lemma-check)",
    "r": "lemma-check: max minus factors; minus-test: affected indices",
    "samples": "lemma-check random states",
    "keys": "keys file for sign/verify",
    "message": "signed message file for verify",
}


def _default(f: dataclasses.Field):
    return f.default


def _parse_value(name: str, text: str):
    text = text.strip()
    if name in ("M",):
        return tuple(int(x) for x in text.split(","))
    if name == "ladder":
        return tuple(float(x) for x in text.split(","))
    if name == "bases":
        return tuple(x.strip() for x in text.split(","))
    if name == "holevo_override":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if name in ("L", "T", "t", "code_length", "trials", "seed", "bit", "r", "samples"):
        value = int(text)
        if name == "seed" and not 0 <= value < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return value
    if name in ("c1", "c2", "Delta"):
        return float(text)
    return text


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    cfg = dataclasses.replace(base) if base else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELD_NAMES:
            raise ConfigParseError(f"line {lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _parse_value(key, value))
        except ValueError as exc:
            raise ConfigParseError(f"line {lineno}: bad value for {key}: {exc}") from None
    check_config(cfg)
    return cfg


def check_config(cfg: RunConfig) -> None:
    if cfg.family not in (owf.ROTATION, owf.FINGERPRINT):
        raise ConfigParseError(f"unknown family {cfg.family!r}")
    if cfg.mode not in ("exact", "mc"):
        raise ConfigParseError(f"unknown mode {cfg.mode!r}")
    if any(m < 1 for m in cfg.M) or not cfg.M:
        raise ConfigParseError("M must be positive")
    if cfg.trials < 1 or cfg.samples < 1:
        raise ConfigParseError("trials and samples must be positive")
    if cfg.bit not in (0, 1):
        raise ConfigParseError("bit must be 0 or 1")
    ladder = cfg.ladder or ((cfg.c1, cfg.c2) if cfg.c2 is not None else None)
    if ladder is not None:
        try:
            protocol.check_ladder(ladder)
        except ValueError as exc:
            raise ConfigParseError(f"threshold ladder rejected: {exc}") from None


# ------------------------------------------------------------------ run state


class Run:
    def __init__(self, command: str, cfg: RunConfig, stdout):
        self.command = command
        self.cfg = cfg
        self.stdout = stdout
        self.lines: list[str] = []
        self.out = Path(cfg.out) if cfg.out else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def emit(self, line: str) -> None:
        self.lines.append(line)
        print(line, file=self.stdout)

    def record(self, name: str, **fields) -> None:
        self.emit(analysis.format_record(name, **fields))

    def artifact(self, name: str, text: str) -> None:
        if self.out:
            (self.out / name).write_text(text)

    def finish(self) -> None:
        self.artifact("report.txt", "\n".join(self.lines) + "\n")

    # ------------------------------------------------------------ builders

    @property
    def T(self) -> int:
        if self.cfg.T is not None:
            return self.cfg.T
        if self.command == "attack-two-group":
            return 7
        return 1 if self.cfg.family == owf.FINGERPRINT else 4

    def family(self):
        cfg = self.cfg
        if cfg.family == owf.ROTATION:
            return owf.rotation_family(cfg.L), None
        if cfg.code:
            code = owf.load_code(Path(cfg.code).read_text())
        else:
            code = owf.random_code(cfg.code_length, cfg.L, stream(cfg.seed, 0))
            self.artifact("code.txt", owf.dump_code(code))
        if code.dimension != cfg.L:
            raise protocol.ConfigError(f"code dimension {code.dimension} differs from L = {cfg.L}")
        return owf.fingerprint_family(code, "exhaustive"), code

    def protocol_config(self, M: int, family, code) -> protocol.ProtocolConfig:
        cfg = self.cfg
        if cfg.ladder:
            ladder = cfg.ladder
        elif cfg.c2 is not None:
            ladder = (cfg.c1, cfg.c2)
        else:
            ladder = protocol.default_ladder(family, M, self.T, cfg.c1)
        return protocol.ProtocolConfig(family, M, self.T, ladder, code, cfg.holevo_override)

    def single_M(self) -> int:
        if len(self.cfg.M) != 1:
            raise protocol.ConfigError(f"{self.command} takes a single M")
        return self.cfg.M[0]


def _echo(run: Run) -> None:
    cfg = run.cfg
    values = {}
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        values[f.name] = v
    values["T"] = run.T
    run.record("config", command=run.command, **values)


def _family_record(run: Run, family) -> None:
    run.record(
        "family",
        kind=family.kind,
        L=family.L,
        n=family.n,
        delta=family.delta,
        certainty=family.delta_certainty,
        holevo_budget_bits=run.T * family.n,
    )
    run.artifact("family.txt", owf.dump_family(family))


def _tallies(run: Run, results) -> None:
    for tally, verdict in results:
        run.record("verdict", recipient=tally.recipient, s=tally.s, M=tally.M, verdict=str(verdict))


# ------------------------------------------------------------------ commands


def cmd_keygen(run: Run) -> int:
    family, _ = run.family()
    keys = protocol.keygen(run.single_M(), family.L, stream(run.cfg.seed, 1))
    run.artifact("keys.txt", protocol.dump_keys(keys, family))
    run.record("keys", M=keys.M, L=keys.L, kind=family.kind)
    return 0


def cmd_family_info(run: Run) -> int:
    family, code = run.family()
    _family_record(run, family)
    if code is not None:
        run.record("code", length=code.length, dimension=code.dimension, min_distance=code.min_distance)
    M = run.cfg.M[0]
    run.record(
        "guessing",
        M=M,
        T=run.T,
        G=analysis.expected_guessed_keys(family.L, family.n, run.T, 2 * M),
        holevo_ok=run.T * family.n < family.L,
    )
    return 0


def _distribute(run: Run, keys, config, rng):
    plan = protocol.plan_for(run.cfg.method, config.T, run.cfg.t)
    if plan.copies != config.T:
        raise protocol.ConfigError(f"{plan.name} needs T = {plan.copies}, config has {config.T}")
    glob = protocol.make_public_keys(keys, config)
    p = protocol.plan_pass_probability(glob, plan)
    dist = protocol.run_distribution(glob, plan, rng)
    run.record(
        "distribution", method=plan.name, copies=plan.copies, pass_probability=p, aborted=dist.aborted
    )
    return glob, plan, dist


def cmd_distribute(run: Run) -> int:
    family, code = run.family()
    M = run.single_M()
    config = run.protocol_config(M, family, code)
    rng = stream(run.cfg.seed, 1)
    keys = protocol.keygen(M, family.L, rng)
    _, _, dist = _distribute(run, keys, config, rng)
    return ABORT if dist.aborted else 0


def _load_keys(run: Run, family):
    if run.cfg.keys:
        keys = protocol.load_keys(Path(run.cfg.keys).read_text())
        if keys.L != family.L:
            raise protocol.ConfigError("keys file does not match L")
        return keys
    return protocol.keygen(run.single_M(), family.L, stream(run.cfg.seed, 1))


def cmd_sign(run: Run) -> int:
    family, _ = run.family()
    keys = _load_keys(run, family)
    msg = protocol.sign(run.cfg.bit, keys)
    run.artifact("keys.txt", protocol.dump_keys(keys, family))
    run.artifact("message.txt", protocol.dump_message(msg))
    run.record("signature", bit=msg.b, M=keys.M, revealed=len(msg.revealed))
    return 0


def cmd_verify(run: Run) -> int:
    family, code = run.family()
    keys = _load_keys(run, family)
    if run.cfg.message:
        msg = protocol.load_message(Path(run.cfg.message).read_text())
    else:
        msg = protocol.sign(run.cfg.bit, keys)
    config = run.protocol_config(keys.M, family, code)
    glob, plan, dist = _distribute(run, keys, config, stream(run.cfg.seed, 2))
    if dist.aborted:
        return ABORT
    rng = stream(run.cfg.seed, 3)
    results = [
        protocol.verify(msg, dist.assignments[r], glob, config, rng, recipient=r)
        for r in plan.recipients
    ]
    _tallies(run, results)
    return 0


def cmd_run_honest(run: Run) -> int:
    family, code = run.family()
    config = run.protocol_config(run.single_M(), family, code)
    _family_record(run, family)
    session = protocol.honest_session(
        config, run.cfg.method, stream(run.cfg.seed, 1), b=run.cfg.bit, t=run.cfg.t
    )
    run.record("distribution", method=run.cfg.method, aborted=session.distribution.aborted)
    if session.distribution.aborted:
        return ABORT
    _tallies(run, session.results)
    return 0


def _attack_record(run: Run, report: adversary.AttackReport) -> None:
    extras = " ".join(
        f"{k}={analysis.fmt(v)}" for k, v in report.extras.items() if not isinstance(v, dict)
    )
    run.emit(f"record=attack {report.line()} {extras}".rstrip())


def _decay_record(run: Run, points: list[tuple[int, float]]) -> None:
    """Least-squares slope of log2(estimate) in M, when every estimate is positive."""
    if len(points) < 2 or any(p <= 0 for _, p in points):
        return
    Ms, ps = np.array(points).T
    slope = float(np.polyfit(Ms, np.log2(ps), 1)[0])
    run.record("decay", log2_slope_per_M=slope, d=2.0 ** (-slope))


def cmd_attack_forge(run: Run) -> int:
    family, code = run.family()
    name = run.cfg.strategy or "random-guess"
    if name not in FORGE_STRATEGIES:
        raise adversary.StrategyError(f"forge strategy must be one of {FORGE_STRATEGIES}")
    strategy = adversary.ForgerStrategy(name, run.cfg.bases)
    points = []
    for idx, M in enumerate(run.cfg.M):
        config = run.protocol_config(M, family, code)
        report = adversary.forge_experiment(config, strategy, run.cfg.trials, stream(run.cfg.seed, 1, idx))
        _attack_record(run, report)
        points.append((M, report.estimate))
    _decay_record(run, points)
    return 0


def alice_strategy(name: str, M: int, r: int) -> adversary.AliceStrategy:
    if name == "honest":
        return adversary.AliceStrategy(adversary.Honest())
    if name == "symmetric-pair":
        return adversary.AliceStrategy(adversary.SymmetricPair())
    if name == "type1":
        terms = ((1.0, "ff", "ff"), (1.0, ("perp", 1, 1), ("plus", 1)))
        return adversary.AliceStrategy(adversary.Type1Combination(terms))
    if name == "type2":
        return adversary.AliceStrategy(adversary.Type2Pair())
    if name == "minus-test":
        k = min(r, M)
        specs = tuple(adversary.MinusTest() if i < k else adversary.Honest() for i in range(M))
        return adversary.AliceStrategy(specs)
    raise adversary.StrategyError(f"unknown Alice strategy {name!r}")


def cmd_attack_repudiate(run: Run) -> int:
    family, code = run.family()
    name = run.cfg.strategy or "symmetric-pair"
    if name not in REPUDIATE_STRATEGIES:
        raise adversary.StrategyError(f"repudiation strategy must be one of {REPUDIATE_STRATEGIES}")
    points = []
    for idx, M in enumerate(run.cfg.M):
        config = run.protocol_config(M, family, code)
        plan = protocol.plan_for(run.cfg.method, config.T, run.cfg.t)
        if plan.copies != config.T:
            raise protocol.ConfigError(f"{plan.name} needs T = {plan.copies}, config has {config.T}")
        report = adversary.repudiate_experiment(
            config,
            alice_strategy(name, M, run.cfg.r),
            run.cfg.mode,
            stream(run.cfg.seed, 1, idx),
            trials=run.cfg.trials,
            plan=plan,
            b=run.cfg.bit,
        )
        _attack_record(run, report)
        points.append((M, report.estimate))
    _decay_record(run, points)
    return 0


def cmd_attack_two_group(run: Run) -> int:
    family, code = run.family()
    name = run.cfg.strategy or "symmetric-pair"
    if name not in TWO_GROUP_STRATEGIES:
        raise adversary.StrategyError(f"two-group strategy must be one of {TWO_GROUP_STRATEGIES}")
    points = []
    for idx, M in enumerate(run.cfg.M):
        config = run.protocol_config(M, family, code)
        report = adversary.two_group_experiment(
            config,
            alice_strategy(name, M, run.cfg.r),
            stream(run.cfg.seed, 1, idx),
            Delta=run.cfg.Delta,
            mode=run.cfg.mode,
            trials=run.cfg.trials,
            b=run.cfg.bit,
        )
        _attack_record(run, report)
        points.append((M, report.estimate))
    _decay_record(run, points)
    return 0


def cmd_lemma_check(run: Run) -> int:
    Delta = 0.25 if run.cfg.Delta is None else run.cfg.Delta
    for idx, M in enumerate(run.cfg.M):
        rep = analysis.lemma_experiment(
            M, run.cfg.r, Delta, run.cfg.samples, stream(run.cfg.seed, 1, idx)
        )
        run.record(
            "lemma",
            M=rep.M,
            r=rep.r,
            Delta=rep.Delta,
            samples=rep.samples,
            max_tail=rep.max_tail_frequency,
            bound=rep.bound,
            satisfied=rep.satisfied,
            vacuous=rep.vacuous,
            condition_holds=rep.condition_holds,
            exact_terms=rep.exact_term_count,
            approx_terms=rep.approx_term_count,
        )
    return 0


HANDLERS = {
    "keygen": cmd_keygen,
    "family-info": cmd_family_info,
    "distribute": cmd_distribute,
    "sign": cmd_sign,
    "verify": cmd_verify,
    "run-honest": cmd_run_honest,
    "attack-forge": cmd_attack_forge,
    "attack-repudiate": cmd_attack_repudiate,
    "attack-two-group": cmd_attack_two_group,
    "lemma-check": cmd_lemma_check,
}


# ---------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qdsig",
        allow_abbrev=False,
        description="Quantum digital signature simulator.",
        epilog="Exit status: 0 success, 1 protocol abort, 2 configuration error.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    p.add_argument("--holevo-override", action="store_true", default=None, help=HELP["holevo_override"])
    for f in fields(RunConfig):
        if f.name == "holevo_override":
            continue
        flag = "--" + f.name.replace("_", "-")
        default = _default(f)
        if isinstance(default, tuple):
            default = ",".join(str(x) for x in default)
        text = HELP[f.name] if "default" in HELP[f.name] else f"{HELP[f.name]} (default: {default})"
        p.add_argument(flag, dest=f.name, default=None, help=text)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = parse_config(Path(args.config).read_text())
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is None:
            continue
        if f.name == "holevo_override":
            cfg.holevo_override = True
            continue
        try:
            setattr(cfg, f.name, _parse_value(f.name, value))
        except ValueError as exc:
            raise ConfigParseError(f"--{f.name}: {exc}") from None
    check_config(cfg)
    return cfg


def main(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CONFIG_ERROR if exc.code else 0
    try:
        cfg = resolve_config(args)
        run = Run(args.command, cfg, stdout)
        _echo(run)
        status = HANDLERS[args.command](run)
    except (
        ConfigParseError,
        protocol.ConfigError,
        owf.FamilyError,
        adversary.StrategyError,
        protocol.DistributionError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    run.finish()
    return status


if __name__ == "__main__":
    raise SystemExit(main())
