"""Command-line client for the fedfocal service.

Every subcommand talks to the HTTP API. By default the service runs
in-process (no sockets involved), so the CLI works standalone; pass
``--server URL`` to drive a remote instance started with ``fedfocal
serve``. Dataset paths are resolved where the service runs, against
FEDFOCAL_DATA_DIR when relative.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

import click
import httpx


class _InProcessTransport(httpx.BaseTransport):
    """Synchronous bridge into the ASGI app, one event loop per request."""

    def __init__(self, app) -> None:
        self._transport = httpx.ASGITransport(app=app, raise_app_exceptions=False)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def call() -> tuple[httpx.Response, bytes]:
            response = await self._transport.handle_async_request(request)
            return response, await response.aread()

        response, content = asyncio.run(call())
        return httpx.Response(
            status_code=response.status_code, headers=response.headers, content=content
        )


def _make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service.app import app

    return httpx.Client(
        transport=_InProcessTransport(app), base_url="http://fedfocal.internal"
    )


def _post(server: str | None, endpoint: str, payload: dict) -> dict:
    with _make_client(server) as client:
        response = client.post(endpoint, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"{endpoint} failed ({response.status_code}): {detail}")
    return response.json()


def _load_config_file(path: str) -> dict:
    config_path = Path(path)
    if not config_path.exists():
        raise click.ClickException(f"config file not found: {config_path}")
    try:
        return json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{config_path}: invalid JSON ({exc})")


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.ClickException(f"--seeds expects comma-separated integers, got {text!r}")


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.ClickException(f"expected comma-separated numbers, got {text!r}")


@click.group()
def main() -> None:
    """Federated focal-loss experiment runner."""


server_option = click.option("--server", default=None, help="Remote service URL (default: in-process).")
workers_option = click.option(
    "--workers", default=1, show_default=True, help="Parallel client workers; affects wall time only."
)


@main.command()
@click.option("--config", "config_path", required=True, help="Experiment config JSON.")
@click.option("--out", default=None, help="Override the config's output directory.")
@click.option("--seeds", default=None, help='Override seeds, e.g. "1,2,3".')
@workers_option
@server_option
def run(config_path: str, out: str | None, seeds: str | None, workers: int, server: str | None) -> None:
    """Run one experiment config and write trace CSVs + summary JSON."""
    config = _load_config_file(config_path)
    if out:
        config["output_dir"] = out
    if seeds:
        config["seeds"] = _parse_seeds(seeds)
    body = _post(server, "/experiments/run", {"config": config, "workers": workers})
    click.echo(f"{body['method']} on {body['dataset']}: " f"{body['mean']:.4f}±{body['std']:.4f} (median {body['median']:.4f}, {body['n_seeds']} seeds)")
    if body.get("summary_path"):
        click.echo(f"summary: {body['summary_path']}")
    for trace in body.get("trace_paths", []):
        click.echo(f"trace:   {trace}")


@main.command()
@click.option("--config", "config_path", required=True, help="Base experiment config JSON.")
@click.option("--axis", type=click.Choice(["gamma", "psi", "client_ratio"]), required=True)
@click.option("--values", required=True, help='Axis values, e.g. "1,2,3,4,5".')
@click.option("--out", default=None, help="Override the config's output directory.")
@click.option("--seeds", default=None, help="Override seeds.")
@workers_option
@server_option
def ablate(config_path: str, axis: str, values: str, out: str | None, seeds: str | None, workers: int, server: str | None) -> None:
    """Sweep one hyperparameter axis with shared seeds."""
    config = _load_config_file(config_path)
    if out:
        config["output_dir"] = out
    if seeds:
        config["seeds"] = _parse_seeds(seeds)
    body = _post(
        server,
        "/experiments/ablate",
        {"config": config, "axis": axis, "values": _parse_floats(values), "workers": workers},
    )
    click.echo(body["table_csv"], nl=False)
    if body.get("table_path"):
        click.echo(f"table: {body['table_path']}")


def _parse_unbalance(text: str) -> dict:
    try:
        classes_part, ratio_part = text.split(":")
        return {"classes": [int(c) for c in classes_part.split(",")], "ratio": int(ratio_part)}
    except ValueError:
        raise click.ClickException(f'--unbalance expects "c1,c2[,...]:ratio", got {text!r}')


def _parse_noise(text: str) -> dict:
    try:
        mu_part, sigma_part = text.split(":")
        return {"mu": float(mu_part), "sigma": float(sigma_part)}
    except ValueError:
        raise click.ClickException(f'--noise expects "mu:sigma", got {text!r}')


def _parse_sample(text: str) -> dict:
    try:
        train_part, test_part = text.split(":")
        return {"train_count": int(train_part), "test_count": int(test_part)}
    except ValueError:
        raise click.ClickException(f'--sample expects "train:test", got {text!r}')


def _idx_file(source: Path, stem: str) -> str:
    for candidate in (source / stem, source / f"{stem}.gz"):
        if candidate.exists():
            return str(candidate)
    raise click.ClickException(f"no {stem}[.gz] under {source}")


@main.command()
@click.option("--dataset", type=click.Choice(["mnist", "digits", "blobs"]), required=True)
@click.option("--source", default=".", help="Directory holding the raw IDX files (mnist only).")
@click.option("--out", required=True, help="Cache output directory.")
@click.option("--name", default=None, help="Cache name (defaults to the dataset).")
@click.option("--unbalance", "unbalance_spec", default=None, help='Class thinning, "0,1,2,9:100".')
@click.option("--noise", "noise_spec", default=None, help='Gaussian pixel noise, "10:5".')
@click.option("--sample", "sample_spec", default=None, help='Subsample counts, "10000:1000".')
@click.option("--no-normalize", is_flag=True, help="Keep the 0-255 pixel scale.")
@click.option("--seed", default=0, show_default=True)
@server_option
def prepare(dataset: str, source: str, out: str, name: str | None, unbalance_spec: str | None, noise_spec: str | None, sample_spec: str | None, no_normalize: bool, seed: int, server: str | None) -> None:
    """Build a transformed dataset cache plus its provenance manifest."""
    if dataset == "mnist":
        src = Path(source)
        source_payload = {
            "kind": "mnist_idx",
            "train_images": _idx_file(src, "train-images-idx3-ubyte"),
            "train_labels": _idx_file(src, "train-labels-idx1-ubyte"),
            "test_images": _idx_file(src, "t10k-images-idx3-ubyte"),
            "test_labels": _idx_file(src, "t10k-labels-idx1-ubyte"),
        }
    elif dataset == "digits":
        source_payload = {"kind": "digits", "seed": seed}
    else:
        source_payload = {"kind": "blobs", "seed": seed}
    transforms = {
        "subsample": _parse_sample(sample_spec) if sample_spec else None,
        "unbalance": _parse_unbalance(unbalance_spec) if unbalance_spec else None,
        "noise": _parse_noise(noise_spec) if noise_spec else None,
        "normalize": not no_normalize,
    }
    body = _post(
        server,
        "/datasets/prepare",
        {
            "name": name or dataset,
            "source": source_payload,
            "transforms": transforms,
            "output_dir": out,
            "seed": seed,
        },
    )
    click.echo(f"cache: {body['cache_dir']}")
    click.echo(json.dumps(body["manifest"], indent=2, sort_keys=True))


@main.command()
@click.argument("paths", nargs=-1, required=True)
@server_option
def report(paths: tuple[str, ...], server: str | None) -> None:
    """Render a table from experiment summary JSON files (or directories)."""
    expanded: list[str] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            expanded.extend(str(p) for p in sorted(path.glob("**/summary.json")))
        else:
            expanded.append(str(path))
    if not expanded:
        raise click.ClickException("no summary files found")
    body = _post(server, "/reports/render", {"paths": expanded})
    click.echo(body["table"], nl=False)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
