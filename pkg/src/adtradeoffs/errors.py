"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Base class for input and invariant violations."""


class InvalidAuctionError(ValidationError):
    """An auction record violates its invariants or has no usable bidders."""


class MissingMetricError(ValidationError):
    """A candidate ad lacks a metric score required for re-ranking."""

    def __init__(self, ad_id, metric=None):
        self.ad_id = ad_id
        self.metric = metric
        if metric is None:
            msg = f"no metric record for ad {ad_id!r}"
        else:
            msg = f"missing metric {metric!r} for ad {ad_id!r}"
        super().__init__(msg)


class ConfigError(ValidationError):
    """A configuration value is out of range or inconsistent."""


class ParseError(ValidationError):
    """A data file line cannot be decoded; message carries the location."""


class SamplingError(ValidationError):
    """Dataset construction cannot satisfy a sampling requirement."""
