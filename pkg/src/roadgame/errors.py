"""Exception hierarchy shared by all roadgame modules."""


class RoadgameError(Exception):
    """Base class for every error raised deliberately by this package."""


# -- scenario documents ------------------------------------------------------

class ScenarioError(RoadgameError):
    pass


class MalformedXml(ScenarioError):
    pass


class SchemaViolation(ScenarioError):
    def __init__(self, path, message="missing or invalid element"):
        self.path = path
        super().__init__(f"{path}: {message}")


class InvariantViolation(ScenarioError):
    def __init__(self, entity_id, message):
        self.entity_id = entity_id
        super().__init__(f"id {entity_id}: {message}")


# -- dynamics ----------------------------------------------------------------

class NoBehaviour(RoadgameError):
    """A reactive obstacle was asked for a fixed state."""


class UnsupportedFeature(RoadgameError):
    pass


# -- safety game -------------------------------------------------------------

class GridTooCoarse(RoadgameError):
    pass


class Unrealizable(RoadgameError):
    pass


class OutsideWinningRegion(RoadgameError):
    pass


# -- learning ----------------------------------------------------------------

class ShieldEmpty(RoadgameError):
    pass


class NotWinning(RoadgameError):
    pass


# -- strategies --------------------------------------------------------------

class SchemaError(RoadgameError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ArityMismatch(RoadgameError):
    pass


class UnassignedRegion(RoadgameError):
    pass


# -- verification ------------------------------------------------------------

class ControllerUndefined(RoadgameError):
    def __init__(self, state, reason="state outside controller domain"):
        self.state = state
        super().__init__(f"{reason}: {state}")


# -- configuration -----------------------------------------------------------

class ConfigError(RoadgameError):
    pass
