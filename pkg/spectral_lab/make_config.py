"""Generate the config JSON schema and a default config file."""

import json
from pathlib import Path

import click

from spectral_lab.config import ExperimentConfig
from spectral_lab.logging_config import console


@click.command()
@click.option('--output', help='Default config path', default='config.json')
@click.option('--schema', help='JSON schema path', default='config.schema.json')
@click.option('--command', 'commands', multiple=True, help='Keep only these command sections')
def main(output: str, schema: str, commands: tuple[str, ...]) -> None:
  """Write the default experiment config and its JSON schema."""
  config = ExperimentConfig().model_dump(mode='json')
  if commands:
    sections = {'torus', 'sphere', 'perturb', 'noncross'}
    unknown = set(commands) - sections
    if unknown:
      raise click.BadParameter(f'unknown commands {sorted(unknown)}', param_hint='--command')
    config = {k: v for k, v in config.items() if k not in sections or k in commands}

  for name, data in ((output, config), (schema, ExperimentConfig.model_json_schema())):
    path = Path(name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + '\n')
    console.print(f'wrote {path}')


if __name__ == '__main__':
  main()
