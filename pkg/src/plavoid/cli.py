"""Command line: ``run``, ``certify`` and ``demo``.

Exit status 0 means every certificate passed, 2 a rejected input
(precondition), 3 a certification failure or exhausted budget.  Reports are
deterministic functions of (inputs, seed, arithmetic mode): no timings, no
absolute paths, keys sorted.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .avoid_core import avoid_zero_result, certify_bound, certify_nonvanishing
from .bundle import section_avoid_result
from .charts import certify_bound_on, certify_clearance
from .errors import AvoidanceError, CertificationError, PreconditionError
from .exact import fmt
from .glue import (BUDGET_READING, avoid_countable_union_result, avoid_finite_union_result,
                   glue_avoid_result, relative_avoid_result)
from .io import (bundle_from_json, complex_from_json, dumps, field_from_json, load_json, map_from_json,
                 map_to_json, region_from_json, section_to_json, target_from_json, unitary_from_json)

MODES = ("avoid-zero", "glue", "finite-union", "countable-union", "relative", "section", "su2-split")
EXIT_PASS, EXIT_PRECONDITION, EXIT_CERTIFICATION = 0, 2, 3

READINGS = {
    "budget_index": BUDGET_READING,
    "eta_naming": "eta_C is the normalized distance to C (zero exactly on C); "
                  "eta_k is the countable-union step budget 2^-(k+2) min(eps, clearances)",
    "bound_rescaling": "the kernel prescales eps by 1/(2 sqrt(m) + 1) so the 2 sqrt(m) eps construction "
                       "bound lands strictly below eps",
    "budget_floor": "pass i adds 2^-(i+2) (eps/2) wherever v_i > 0 (fixed slack reserve)",
    "normal_space": "the repeated adjective in the base-space hypothesis is read as a single 'normal'",
    "matrix_norm": "Frobenius",
}


@dataclass
class PipelineConfig:
    mode: str
    inputs: dict
    seed: int = 0
    arith: str = "float"
    max_retries: int | None = None
    max_subdiv: int | None = None
    k_max: int | None = None
    slack: str = "2^-(i+2)"
    base_dir: Path = field(default_factory=Path)

    @classmethod
    def from_json(cls, d: dict, base_dir: Path) -> "PipelineConfig":
        d = dict(d)
        mode = d.pop("mode", None)
        cfg = cls(mode=mode, inputs={}, base_dir=base_dir)
        for key in ("seed", "arith", "max_retries", "max_subdiv", "k_max", "slack"):
            if key in d:
                setattr(cfg, key, d.pop(key))
        cfg.inputs = d
        return cfg

    def validate(self) -> None:
        if self.mode not in MODES:
            raise PreconditionError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.arith not in ("float", "rational"):
            raise PreconditionError("arith must be 'float' or 'rational'")
        for name in ("max_retries", "max_subdiv", "k_max"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise PreconditionError(f"{name} must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise PreconditionError("seed must fit in 64 bits")
        needed = {"avoid-zero": ("complex", "f", "eps"), "glue": ("complex", "f", "eps", "target"),
                  "finite-union": ("complex", "f", "eps", "targets"),
                  "countable-union": ("complex", "f", "eps", "targets"),
                  "relative": ("complex", "f", "eps", "C", "targets"),
                  "section": ("bundle", "eps"), "su2-split": ("complex", "field", "eps")}[self.mode]
        missing = [k for k in needed if k not in self.inputs]
        if missing:
            raise PreconditionError(f"mode {self.mode!r} needs inputs {missing}")

    @property
    def exact(self) -> bool:
        return self.arith == "rational"

    def budgets(self) -> dict:
        out = {}
        if self.max_retries is not None:
            out["max_retries"] = self.max_retries
        if self.max_subdiv is not None:
            out["max_subdiv"] = self.max_subdiv
        return out

    def echo(self) -> dict:
        files = {k: v for k, v in sorted(self.inputs.items()) if isinstance(v, str) and v.endswith(".json")}
        return {"mode": self.mode, "seed": int(self.seed), "arith": self.arith,
                "max_retries": self.max_retries, "max_subdiv": self.max_subdiv, "k_max": self.k_max,
                "slack": self.slack, "input_files": files}

    def load(self, key: str):
        v = self.inputs[key]
        if isinstance(v, str) and v.endswith(".json"):
            return load_json(self.base_dir / v)
        return v


def _targets(cfg: PipelineConfig, p: int) -> list:
    out = []
    for d in cfg.load("targets"):
        atlas, tg = target_from_json(d, p)
        if atlas is None:
            raise PreconditionError("the origin target is only available in avoid-zero mode")
        out.append((atlas, tg))
    return out


def _execute(cfg: PipelineConfig) -> tuple[dict, dict]:
    """Run the configured pipeline; returns (report body, output artifacts)."""
    exact, budgets, seed = cfg.exact, cfg.budgets(), int(cfg.seed)
    if cfg.mode == "section":
        spec, f = bundle_from_json(cfg.load("bundle"), exact)
        eps = field_from_json(cfg.load("eps"), spec.base, exact)
        C = region_from_json(cfg.load("C"), spec.base) if "C" in cfg.inputs else None
        res = section_avoid_result(spec, f, eps, C=C, seed=seed, **budgets)
        certs = {f"bound[{i}]": c.summary() for i, c in enumerate(res.bounds)}
        certs.update({f"clearance[{i}]": c.summary() for i, c in enumerate(res.clearances)})
        body = {"certificates": certs, "coherence_residual": fmt(res.residual)}
        return body, {"section.json": section_to_json(res.section, spec.base)}

    K = complex_from_json(cfg.load("complex"), name="input")
    eps = field_from_json(cfg.load("eps"), K, exact)
    if cfg.mode == "su2-split":
        from .matrix import split_eigenvalues_result
        u = unitary_from_json(cfg.load("field"), K, exact)
        C = region_from_json(cfg.load("C"), K) if "C" in cfg.inputs else None
        res = split_eigenvalues_result(u, eps, C=C, seed=seed, **budgets)
        margins = res.v.sample_margins()
        body = {"certificates": {k: c.summary() for k, c in res.certificates.items()},
                "min_trace_margin": fmt(res.min_margin),
                "trace_margins": [{"simplex": list(s), "margin": fmt(m)} for s, m in margins]}
        if not res.passed:
            raise _Failed(body)
        out = {"complex": map_to_json(res.v.as_map(), K)["complex"], **res.v.to_json()}
        return body, {"field.json": out}

    f = map_from_json(cfg.load("f"), K, exact)
    if cfg.mode == "avoid-zero":
        res = avoid_zero_result(f, eps, seed, **budgets)
        body = {"certificates": {"nonvanishing": res.nonvanishing.summary(), "bound": res.bound.summary()},
                "deferred_simplices": len(res.deferred)}
    elif cfg.mode == "glue":
        atlas, tg = target_from_json(cfg.load("target"), f.target_dim)
        if atlas is None:
            raise PreconditionError("glue mode needs a chart-described target")
        res = glue_avoid_result(f, eps, atlas, tg, seed, **budgets)
        body = {"certificates": {"bound": res.bound.summary(), "clearance": res.clearance.summary()}}
    elif cfg.mode == "finite-union":
        res = avoid_finite_union_result(f, eps, _targets(cfg, f.target_dim), seed, **budgets)
        body = {"certificates": _union_certs(res), "monotone_safety": list(res.safety)}
    elif cfg.mode == "countable-union":
        if cfg.k_max is None:
            raise PreconditionError("countable-union needs k_max")
        res = avoid_countable_union_result(f, eps, _targets(cfg, f.target_dim), cfg.k_max, seed, **budgets)
        body = {"certificates": _union_certs(res), "ledger": res.ledger.to_json(exact=True)}
    else:
        C = region_from_json(cfg.load("C"), K)
        res, _ = relative_avoid_result(f, eps, C, _targets(cfg, f.target_dim), seed, cfg.k_max, **budgets)
        unchanged = all(np.array_equal(res.g.values[v], f.values[v]) for v in C.indices)
        body = {"certificates": _union_certs(res), "unchanged_on_C": unchanged}
        if hasattr(res, "ledger"):
            body["ledger"] = res.ledger.to_json(exact=True)
    return body, {"g.json": map_to_json(res.g, K)}


def _union_certs(res) -> dict:
    out = {"bound": res.bound.summary()}
    for i, c in enumerate(res.clearances):
        out[f"clearance[{i}]"] = c.summary()
    return out


class _Failed(Exception):
    def __init__(self, body: dict):
        super().__init__("certificates failed")
        self.body = body


def _diagnostic(exc: Exception) -> dict:
    out = {"error": type(exc).__name__, "message": str(exc)}
    cert = getattr(exc, "certificate", None)
    if cert is not None and hasattr(cert, "summary"):
        out["certificate"] = cert.summary()
    return out


def run(cfg: PipelineConfig) -> tuple[dict, dict, int]:
    """Execute and report; never raises for package errors (they map to exit codes)."""
    report = {"tool": "plavoid", "version": __version__, "command": "run", "readings": READINGS}
    artifacts: dict = {}
    try:
        cfg.validate()
        report["config"] = cfg.echo()
        body, artifacts = _execute(cfg)
        report.update(body)
        code = EXIT_PASS
    except _Failed as exc:
        report.update(exc.body)
        code = EXIT_CERTIFICATION
    except PreconditionError as exc:
        report["diagnostics"] = _diagnostic(exc)
        code = EXIT_PRECONDITION
    except CertificationError as exc:
        report["diagnostics"] = _diagnostic(exc)
        code = EXIT_CERTIFICATION
    report.setdefault("config", {"mode": cfg.mode})
    report["status"] = {EXIT_PASS: "pass", EXIT_PRECONDITION: "rejected",
                        EXIT_CERTIFICATION: "fail"}[code]
    report["exit_code"] = code
    report["outputs"] = sorted(artifacts)
    return report, artifacts, code


def _carrier_of(g_doc: dict, K):
    """``K`` itself, or the refinement declared in ``g_doc``."""
    from .errors import CarrierMismatch
    if "complex" not in g_doc:
        return K
    d = g_doc["complex"]
    if "refines" in d:
        return complex_from_json(d, parent=K, name="g")
    Kg = complex_from_json(d, name="g")
    if Kg.facets == K.facets and np.array_equal(Kg.vertices, K.vertices):
        return K
    raise CarrierMismatch("g's complex is neither f's complex nor a declared refinement of it")


def certify(f_doc: dict, g_doc: dict, eps_doc, target_doc: dict, exact: bool = True) -> tuple[dict, int]:
    """Audit ``g`` against ``f``, ``eps`` and a target without running any construction."""
    report = {"tool": "plavoid", "version": __version__, "command": "certify"}
    try:
        K = complex_from_json(f_doc["complex"], name="f")
        f = map_from_json(f_doc, K, exact)
        Kg = _carrier_of(g_doc, K)
        g = map_from_json(g_doc, Kg, exact)
        if g.target_dim != f.target_dim:
            from .errors import CarrierMismatch
            raise CarrierMismatch("f and g have different target dimensions")
        eps = field_from_json(eps_doc, K, exact)
        atlas, tg = target_from_json(target_doc, f.target_dim)
        if atlas is None:
            clear = certify_nonvanishing(g)
            bound = certify_bound(f, g, eps)
        else:
            clear = certify_clearance(g, tg.evaluator)
            bound = certify_bound_on(atlas.manifold, f, g, eps)
        report["certificates"] = {"bound": bound.summary(), "clearance": clear.summary()}
        code = EXIT_PASS if bound.passed and clear.passed else EXIT_CERTIFICATION
    except PreconditionError as exc:
        report["diagnostics"] = _diagnostic(exc)
        code = EXIT_PRECONDITION
    except (KeyError, ValueError, TypeError) as exc:
        report["diagnostics"] = {"error": type(exc).__name__, "message": str(exc)}
        code = EXIT_PRECONDITION
    report["status"] = {0: "pass", 2: "rejected", 3: "fail"}[code]
    report["exit_code"] = code
    return report, code


DEMOS = {
    "torus": "torus_su2.json",
    "interval": "interval_line.json",
    "mobius": "mobius.json",
    "circle": "circle_glue.json",
    "square": "square_avoid_zero.json",
}


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("plavoid") / "fixtures" / name))


def demo_config(name: str) -> PipelineConfig:
    if name not in DEMOS:
        raise PreconditionError(f"unknown demo {name!r}; available: {', '.join(sorted(DEMOS))}")
    path = fixture_path(DEMOS[name])
    return PipelineConfig.from_json(load_json(path), path.parent)


def _apply_flags(cfg: PipelineConfig, args) -> PipelineConfig:
    upd = {}
    for key in ("seed", "arith", "max_retries", "max_subdiv"):
        v = getattr(args, key, None)
        if v is not None:
            upd[key] = v
    if getattr(args, "kmax", None) is not None:
        upd["k_max"] = args.kmax
    return replace(cfg, **upd)


def _write(out_dir: str | None, report: dict, artifacts: dict) -> None:
    text = dumps(report)
    if out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(text, encoding="utf-8")
    for name, doc in artifacts.items():
        (out / name).write_text(dumps(doc), encoding="utf-8")
    status = report.get("status", "?")
    sys.stdout.write(f"{status}: report written to {out / 'report.json'}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plavoid", description="Certified PL perturbation off bad sets.")
    parser.add_argument("--version", action="version", version=f"plavoid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--arith", choices=("float", "rational"))
        p.add_argument("--kmax", type=int)
        p.add_argument("--max-subdiv", dest="max_subdiv", type=int)
        p.add_argument("--max-retries", dest="max_retries", type=int)
        p.add_argument("--out-dir", dest="out_dir")

    p_run = sub.add_parser("run", help="run a pipeline config (JSON)")
    p_run.add_argument("config")
    common(p_run)
    p_demo = sub.add_parser("demo", help="run a bundled fixture")
    p_demo.add_argument("name", choices=sorted(DEMOS))
    common(p_demo)
    p_cert = sub.add_parser("certify", help="audit an existing output")
    p_cert.add_argument("--f", required=True)
    p_cert.add_argument("--g", required=True)
    p_cert.add_argument("--eps", required=True)
    p_cert.add_argument("--target", required=True)
    p_cert.add_argument("--arith", choices=("float", "rational"), default="rational")
    p_cert.add_argument("--out-dir", dest="out_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "certify":
            docs = [load_json(p) for p in (args.f, args.g, args.eps, args.target)]
            report, code = certify(*docs, exact=args.arith == "rational")
            _write(args.out_dir, report, {})
            return code
        if args.command == "demo":
            cfg = demo_config(args.name)
        else:
            path = Path(args.config)
            cfg = PipelineConfig.from_json(load_json(path), path.parent)
        cfg = _apply_flags(cfg, args)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    except AvoidanceError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_PRECONDITION
    report, artifacts, code = run(cfg)
    _write(args.out_dir, report, artifacts)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
