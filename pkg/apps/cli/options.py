# ============================================================================
# apps/cli/options.py - Flags shared by every subcommand
# ============================================================================

import functools

import click

from .services import load_config, parse_overrides


def shared_options(func):
    """--config, --seed, --task and repeated --set KEY=VALUE"""
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                  help="Flat key=value run configuration file")
    @click.option("--seed", type=int, default=None, help="Random seed")
    @click.option("--task", type=click.Choice(["argument", "wikipedia", "abstract"]), default=None)
    @click.option("--set", "set_pairs", multiple=True, metavar="KEY=VALUE", help="Override any config key")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)
    return wrapper


def resolve_config(config_path, seed, task, set_pairs, scope=None, **explicit):
    """Merge --set pairs with explicit flags (explicit flags win) and load the run config"""
    overrides = parse_overrides(set_pairs)
    overrides.update({"seed": seed, "task": task})
    overrides.update(explicit)
    return load_config(config_path, overrides, scope=scope)
