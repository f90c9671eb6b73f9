"""Command-line front end.

Subcommands mirror the pipeline phases and share one output directory:

    preset        list presets or dump one as a JSON config
    characterize  tomograph every distinct entangler of a configured circuit
    decompose     turn saved characterizations into per-gate decompositions
    run           full pipeline: simulate, mitigate, report
    mitigate      recompute mitigation and error bars from saved samples
    report        re-render tables into figures

Errors exit nonzero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .characterize import decomposition_from_characterization, GateCharacterization
from .errors import ConfigError, FermipecError
from .experiment import (
    ExperimentConfig,
    build_noise_model,
    characterize_circuit,
    mitigate,
    preset,
    preset_names,
    rebuild_bundle,
    render_report,
    run_experiment,
    save_mitigated,
    save_run_artifacts,
    simulate_experiment,
)
from .hubbard import build_hamiltonian, compile_to_native, trotter_circuit


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "preset", None):
        config = preset(args.preset)
    elif getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        config = ExperimentConfig.from_json_dict(payload)
    else:
        raise ConfigError("one of --preset or --config is required")
    if getattr(args, "seed", None) is not None:
        config = replace(config, pec=replace(config.pec, master_seed=args.seed))
    if getattr(args, "exact", False):
        config = replace(
            config,
            pec=replace(config.pec, shots=0),
            characterization=replace(config.characterization, exact_mode=True),
        )
    return config


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out)


def _cmd_preset(args: argparse.Namespace) -> int:
    if not args.name:
        for name in preset_names():
            print(name)
        return 0
    config = preset(args.name)
    if args.dump:
        print(json.dumps(config.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(f"{config.name}: {config.model.sites} sites, "
              f"{config.model.components} component(s), M={config.trotter.steps}, "
              f"samples={config.pec.samples}")
    return 0


def _cmd_characterize(args: argparse.Namespace) -> int:
    config = _load_config(args)
    noise = build_noise_model(config)
    circuit = compile_to_native(
        trotter_circuit(build_hamiltonian(config.model), config.total_time(), config.trotter.steps)
    )
    chars = characterize_circuit(circuit, noise, config.characterization)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(config.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for gid, char in sorted(chars.items()):
        path = out / f"characterization_{gid}.json"
        path.write_text(json.dumps(char.to_json_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        print(f"wrote {path}")
    return 0


def _cmd_decompose(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    paths = sorted(out.glob("characterization_*.json"))
    if not paths:
        raise ConfigError(f"no characterization files under {out}; run characterize first")
    for path in paths:
        char = GateCharacterization.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
        decomp = decomposition_from_characterization(char)
        target = out / f"decomposition_{decomp.gate_id}.json"
        target.write_text(json.dumps(decomp.to_json_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
        print(f"wrote {target}  cost={decomp.cost:.6f}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    bundle = run_experiment(config)
    save_run_artifacts(bundle, out)
    save_mitigated(bundle, out)
    figures = render_report(out)
    print(f"run complete: {out}")
    for stage, (factor, stderr) in sorted(bundle.fits.items()):
        print(f"  per-gate fidelity [{stage}]: {factor:.6f} +- {stderr:.6f}")
    for path in figures:
        print(f"  figure {path}")
    return 0


def _cmd_mitigate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    bundle = rebuild_bundle(out)
    mitigate(bundle)
    save_mitigated(bundle, out)
    print(f"mitigation refreshed under {out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    if not (out / "fidelity.csv").exists():
        raise ConfigError(f"no mitigated tables under {out}; run `run` or `mitigate` first")
    for path in render_report(out):
        print(f"figure {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermipec",
        description="Error-cancelled Trotter simulation of small Fermi-Hubbard chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_source=True):
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        if config_source:
            p.add_argument("--preset", help="named preset configuration")
            p.add_argument("--config", help="path to a JSON config file")
            p.add_argument("--seed", type=int, help="override the sampling master seed")
            p.add_argument(
                "--exact", action="store_true",
                help="exact-expectation mode: no shot noise, exact tomography",
            )

    p = sub.add_parser("preset", help="list presets or dump one")
    p.add_argument("name", nargs="?", help="preset name")
    p.add_argument("--dump", action="store_true", help="print the full JSON config")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("characterize", help="tomograph the circuit's entanglers")
    add_common(p)
    p.set_defaults(func=_cmd_characterize)

    p = sub.add_parser("decompose", help="decompose saved characterizations")
    add_common(p, config_source=False)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("run", help="full pipeline into the output directory")
    add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("mitigate", help="recompute mitigation from saved samples")
    add_common(p, config_source=False)
    p.set_defaults(func=_cmd_mitigate)

    p = sub.add_parser("report", help="render figures from saved tables")
    add_common(p, config_source=False)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FermipecError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "IoError", "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
