"""Key = value config files: the on-disk format for experiment configs and
checkpoint sidecars. Flags override file values override defaults, and every
run persists its fully-resolved config next to its outputs.
"""

from __future__ import annotations

from .modules import ConfigError, ModelConfig

# knobs that may appear in config files / flags, with coercers
_MODEL_FIELDS = {
    "alphabet_size": int,
    "dim": int,
    "n_out": int,
    "alpha": float,
    "delta": float,
    "kind": str,
    "lstm_layers": int,
    "lstm_hidden": int,
    "soft_select": None,  # bool
    "soft_temperature": float,
    "decoupled_scorer": None,
    "backend": str,
    "k_max": int,
    "d_max": int,
    "n_priority": int,
}
_TRAIN_FIELDS = {
    "lr": float,
    "beta1": float,
    "beta2": float,
    "eps": float,
    "max_strikes": int,
    "epoch_cap": int,
    "seed": int,
}


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def read_kv_file(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_kv_text(fh.read(), source=str(path))


def write_kv_file(path, values: dict):
    with open(path, "w") as fh:
        for key in sorted(values):
            v = values[key]
            if v is None:
                continue
            fh.write(f"{key} = {v}\n")


def coerce(key: str, raw: str):
    for table in (_MODEL_FIELDS, _TRAIN_FIELDS):
        if key in table:
            conv = table[key]
            if conv is None:
                return _parse_bool(raw)
            if raw.lower() == "none":
                return None
            try:
                return conv(raw)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {raw!r}")
    raise ConfigError(f"unknown config key {key!r}")


def split_config(kv: dict[str, str]):
    """Coerce raw strings into (model kwargs, training kwargs)."""
    model, train = {}, {}
    for key, raw in kv.items():
        value = coerce(key, raw)
        if key in _MODEL_FIELDS:
            model[key] = value
        else:
            train[key] = value
    return model, train


def model_config_kv(cfg: ModelConfig) -> dict:
    return {k: v for k, v in cfg.to_dict().items() if v is not None}


def load_model_config(path) -> ModelConfig:
    model_kwargs, _ = split_config(read_kv_file(path))
    if "alphabet_size" not in model_kwargs:
        raise ConfigError(f"{path}: missing alphabet_size")
    return ModelConfig(**model_kwargs)
