"""Exception types raised across gsvdlab."""


class GsvdError(Exception):
    """Base class; the CLI turns any of these into an error JSON."""

    code = "gsvd_error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class ConvergenceFailure(GsvdError):
    code = "convergence_failure"

    def __init__(self, residual, sweeps):
        super().__init__(f"Jacobi SVD did not converge after {sweeps} sweeps (residual {residual:.3e})")
        self.residual = residual
        self.sweeps = sweeps


class InvalidInput(GsvdError):
    code = "invalid_input"


class EmptyGainSample(GsvdError):
    code = "empty_gain_sample"


class InvalidSlack(GsvdError):
    code = "invalid_slack"


class DegenerateInput(GsvdError):
    code = "degenerate_input"


class GainViolation(GsvdError):
    code = "gain_violation"

    def __init__(self, x, gamma):
        super().__init__(f"slack residual gamma={gamma:.6g} <= 0; estimated gains are too small at this input")
        self.x = x
        self.gamma = gamma


class OffManifoldDegenerate(GsvdError):
    code = "off_manifold_degenerate"


class InvalidScale(GsvdError):
    code = "invalid_scale"


class TrainingDiverged(GsvdError):
    code = "training_diverged"


class DegenerateDirection(GsvdError):
    code = "degenerate_direction"


class DegenerateDataset(GsvdError):
    code = "degenerate_dataset"


class FormatError(GsvdError):
    code = "format_error"


class ConfigError(GsvdError):
    code = "config_error"
