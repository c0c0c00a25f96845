"""Gnuplot-ready emission of cost comparison results."""
from __future__ import annotations

import os

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from stealthkit.group import Group
from stealthkit.services.bench_service import ComparisonRow


TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'templates')

_ENV = Environment(
    loader=FileSystemLoader(TEMPLATE_DIR),
    keep_trailing_newline=True,
    undefined=StrictUndefined,
    autoescape=False,
)


def _pivot(rows: list[ComparisonRow]) -> list[dict]:
    table: dict[int, dict] = {}
    for row in rows:
        entry = table.setdefault(row.n, {'n': row.n})
        prefix = 'dksap' if row.scheme == 'dksap' else 'iot'
        entry[f'{prefix}_{row.side}'] = row.modeled_cost * 1000
        entry[f'{prefix}_bytes'] = row.wire_bytes
    return [table[n] for n in sorted(table)]


def render_plot_files(rows: list[ComparisonRow], group: Group, *, stem: str = 'cost_comparison') -> dict[str, str]:
    """Return ``{filename: content}`` for the data file and the gnuplot script."""
    data_name = f'{stem}.dat'
    script = _ENV.get_template('cost_comparison.gp.j2').render(
        backend=group.params.backend,
        encoding=group.params.encoding,
        point_length=group.params.point_length,
        data_name=data_name,
        image_name=f'{stem}.png',
    )
    data = _ENV.get_template('cost_comparison.dat.j2').render(rows=_pivot(rows))
    return {data_name: data, f'{stem}.gp': script}


def write_plot_files(rows: list[ComparisonRow], group: Group, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, content in render_plot_files(rows, group).items():
        path = os.path.join(out_dir, name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(content)
        written.append(path)
    return written
