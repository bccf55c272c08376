"""Exception types raised by the allocation library."""


class AllocationError(Exception):
    """Base class for all library errors."""


class ConfigError(AllocationError, ValueError):
    """Invalid body, actuator or scenario configuration."""


class RankDeficientTarget(AllocationError):
    """The actuators cannot span the requested controlled axes."""

    def __init__(self, rank: int, n_axes: int):
        super().__init__(f"mapping rank {rank} < {n_axes} controlled axes")
        self.rank = rank
        self.n_axes = n_axes


class InconsistentConstraints(AllocationError):
    """Stacked equality system [M; A] F = [tau; b] has no exact solution."""

    def __init__(self, residual: float):
        super().__init__(f"stacked system residual {residual:.3e} too large")
        self.residual = residual


class DegenerateKernelBlock(AllocationError):
    """A kernel-direction block is shorter than the unit norm required."""


class InfeasibleKb(AllocationError):
    """No kernel vector satisfies the block-norm and orthogonality constraints."""

    def __init__(self, message: str, n_binding: int):
        super().__init__(message)
        self.n_binding = n_binding


class ScenarioError(AllocationError):
    """An allocator failed inside a scenario run."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause
