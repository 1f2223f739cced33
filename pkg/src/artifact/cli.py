"""Command-line client for the experiment service.

The CLI builds an experiment request from an optional flat config file
plus flag overrides and submits it to the HTTP service — by default the
in-process app, or a remote server via ``--server``.  The response CSV is
written to ``--out`` (default: stdout).
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx

from .errors import ArtifactError, ConfigError
from .harness import parse_config_file

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="Nonlinear OFDM channel identification experiments.",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name, help_text in (
        ("estimate", "estimation-quality sweep (NMSE metrics per trial)"),
        ("ber", "bit-error-rate sweep for the configured decoder"),
        ("inverse", "inverse-learning composition-error profile"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="flat key = value config file")
        cmd.add_argument("--seed", type=int, help="master seed (64-bit)")
        cmd.add_argument("--trials", type=int, help="number of Monte Carlo trials")
        cmd.add_argument("--est-snr-db", type=float, help="identification SNR in dB")
        cmd.add_argument(
            "--snr-db", help="comma-separated detection SNR grid in dB"
        )
        cmd.add_argument(
            "--nonlinearity",
            help="identity | soft | hard | file:<csv>",
        )
        cmd.add_argument(
            "--method", choices=["predistortion", "iterative"], help="decoder"
        )
        cmd.add_argument("--workers", type=int, help="parallel trial workers")
        cmd.add_argument("--out", help="output CSV path (default: stdout)")
        cmd.add_argument(
            "--server",
            help="base URL of a running service (default: run in-process)",
        )
    return parser


def _request_payload(args: argparse.Namespace) -> dict[str, object]:
    """Merge config file values and flag overrides into request JSON."""
    values: dict[str, object] = {}
    if args.config:
        values.update(parse_config_file(args.config))
    overrides = {
        "master_seed": args.seed,
        "trials": args.trials,
        "est_snr_db": args.est_snr_db,
        "det_snr_grid_db": args.snr_db,
        "nonlinearity": args.nonlinearity,
        "detector.method": args.method,
        "workers": args.workers,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["scenario"] = args.scenario

    payload: dict[str, object] = {}
    for key, value in values.items():
        parts = key.split(".")
        node = payload
        for part in parts[:-1]:
            node = node.setdefault(part, {})  # type: ignore[assignment]
        node[parts[-1]] = value
    if "det_snr_grid_db" in payload and isinstance(payload["det_snr_grid_db"], str):
        payload["det_snr_grid_db"] = [
            float(v) for v in str(payload["det_snr_grid_db"]).split(",") if v != ""
        ]
    return payload


async def _submit(payload: dict[str, object], server: str | None) -> str:
    if server:
        async with httpx.AsyncClient(base_url=server, timeout=None) as client:
            response = await client.post("/experiments", json=payload)
    else:
        from .service import app  # imported lazily: FastAPI startup cost

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service", timeout=None
        ) as client:
            response = await client.post("/experiments", json=payload)
    if response.status_code == 200:
        return response.json()["csv"]
    try:
        detail = str(response.json().get("detail", response.text))
    except ValueError:
        detail = response.text
    if response.status_code == 422:
        raise ConfigError(detail)
    raise ArtifactError(detail)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = _request_payload(args)
        csv_text = asyncio.run(_submit(payload, args.server))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ArtifactError, httpx.HTTPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
