"""Exception hierarchy shared by all modules."""


class FrcvpError(Exception):
    """Base class for every error raised by this package."""


class InvalidInstance(FrcvpError):
    pass


class InfeasibleVehicle(InvalidInstance):
    """Travel time along the route exceeds the vehicle's time window."""


class DisconnectedRoute(InvalidInstance):
    """A route's edges do not form a directed path from origin to destination."""


class NodeNotOnRoute(FrcvpError):
    pass


class NotConnected(FrcvpError):
    pass


class NotATree(FrcvpError):
    """An operation that needs a tree or forest was given a graph with loops."""


class EmptyInput(FrcvpError):
    pass


class InvalidParams(FrcvpError):
    pass


class CapacityNotSupported(FrcvpError):
    """The closed-form set objective is only defined for unbounded platoon size."""


class InfeasibleAssignment(FrcvpError):
    pass


class InfeasibleSchedule(FrcvpError):
    pass


class SearchSpaceTooLarge(FrcvpError):
    pass


class IterationLimit(FrcvpError):
    pass


class NotLoopy(FrcvpError):
    pass


class QuantumViolated(FrcvpError):
    pass


class LoopBreakIncomplete(FrcvpError):
    pass


class NoPath(FrcvpError):
    pass
