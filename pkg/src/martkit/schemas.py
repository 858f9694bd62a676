"""JSON Schemas for the CLI's configuration input and result documents.

Outputs emitted by the CLI validate against these schemas; the run
configuration is validated with unknown keys rejected.
"""

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

_NAMED_MATRICES = {
    "type": "object",
    "additionalProperties": _MATRIX,
}

FIT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "m", "n", "T", "loss", "param_count", "parameters", "thresholds"],
    "properties": {
        "model": {"type": "string"},
        "m": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "T": {"type": "integer", "minimum": 2},
        "loss": {"type": "number"},
        "param_count": {"type": "integer", "minimum": 0},
        "thresholds": {
            "anyOf": [
                {"type": "array", "items": {"type": "number"}},
                {
                    "type": "object",
                    "properties": {"r": {"type": "number"}, "s": {"type": "number"}},
                    "required": ["r", "s"],
                    "additionalProperties": False,
                },
            ]
        },
        "parameters": _NAMED_MATRICES,
        "converged": {"type": "boolean"},
        "n_iters": {"type": "integer"},
        "regime_counts": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}},
        },
        "ridge_used": {"type": "boolean"},
        "held_updates": {"type": "array", "items": {"type": "string"}},
        "extras": {"type": "object"},
    },
    "additionalProperties": False,
}

_INTERVAL_PAIR = {
    "type": "object",
    "required": ["lower", "upper"],
    "properties": {"lower": _MATRIX, "upper": _MATRIX},
    "additionalProperties": False,
}

INFER_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["fit", "coefficients", "thresholds"],
    "properties": {
        "fit": FIT_SCHEMA,
        "coefficients": {
            "type": "object",
            "required": ["level", "intervals", "se"],
            "properties": {
                "level": {"type": "number"},
                "intervals": {"type": "object", "additionalProperties": _INTERVAL_PAIR},
                "se": _NAMED_MATRICES,
            },
            "additionalProperties": False,
        },
        "thresholds": {
            "type": "object",
            "required": ["level", "r_interval", "s_interval", "jump_rates"],
            "properties": {
                "level": {"type": "number"},
                "r_interval": {"type": "array", "items": {"type": "number"}},
                "s_interval": {"type": "array", "items": {"type": "number"}},
                "jump_rates": {"type": "array", "items": {"type": "number"}},
                "n_sims": {"type": "integer"},
                "bandwidths": {"type": "array", "items": {"type": "number"}},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

BENCHMARK_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["rolling", "results"],
    "properties": {
        "rolling": {
            "type": "object",
            "required": ["train_window", "test_start", "test_end", "refit_every"],
            "properties": {
                "train_window": {"type": "integer"},
                "test_start": {"type": "integer"},
                "test_end": {"type": "integer"},
                "refit_every": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["model", "param_count", "mspe"],
                "properties": {
                    "model": {"type": "string"},
                    "param_count": {"type": "integer"},
                    "mspe": {"type": "number"},
                    "n_fits": {"type": "integer"},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "seed": {"type": "integer"},
        "threads": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "grid": {
            "type": "object",
            "properties": {
                "trim_fraction": {"type": "number"},
                "max_candidates_per_axis": {"type": "integer"},
                "candidate_source": {"enum": ["sample", "quantile"]},
            },
            "additionalProperties": False,
        },
        "als": {
            "type": "object",
            "properties": {
                "max_iters": {"type": "integer"},
                "rel_tol": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "model": {
            "type": "object",
            "properties": {
                "tag": {
                    "enum": ["2mart", "ktmar", "smart", "tmar", "tmar3", "mar", "var", "rrvar"]
                },
                "rank_k": {"type": "integer"},
                "threshold_axis": {"enum": ["z", "w", "auto"]},
            },
            "additionalProperties": False,
        },
        "rolling": {
            "type": "object",
            "properties": {
                "train_window": {"type": "integer"},
                "test_start": {"type": "integer"},
                "test_end": {"type": "integer"},
                "refit_every": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "simulate": {
            "type": "object",
            "properties": {
                "dims": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 2},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "T": {"type": "integer", "minimum": 2},
                "burn_in": {"type": "integer", "minimum": 0},
                "setting": {"enum": ["I", "II"]},
            },
            "additionalProperties": False,
        },
        "inference": {
            "type": "object",
            "properties": {
                "level": {"type": "number"},
                "n_sims": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "replicate": {
            "type": "object",
            "properties": {
                "setting": {"enum": ["I", "II"]},
                "dims": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 2},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "T": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "reps": {"type": "integer", "minimum": 1},
                "what": {
                    "enum": [
                        "estimation-error",
                        "ecp-coef",
                        "ecp-threshold",
                        "independence",
                        "forecast-ordering",
                    ]
                },
                "grid_cap": {"type": "integer", "minimum": 2},
                "n_sims": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}
