"""qrollout: reversible-circuit rollout oracles and their analysis toolkit."""

__version__ = "0.1.0"
