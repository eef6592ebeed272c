"""Exception types shared across the pipeline."""


class LcirspError(Exception):
    """Base class for all lcirsp errors."""


# --- trajectory ingestion ---

class MissingColumn(LcirspError):
    def __init__(self, name):
        super().__init__(f"required column missing from CSV header: {name!r}")
        self.name = name


class MalformedRow(LcirspError):
    def __init__(self, line_no, reason=""):
        msg = f"malformed CSV row at line {line_no}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.line_no = line_no


class EmptyInput(LcirspError):
    pass


class EmptyTrajectory(LcirspError):
    pass


# --- kinematics ---

class NoFeasibleStep(LcirspError):
    pass


class BoundaryFrame(LcirspError):
    pass


class DegenerateGeometry(LcirspError):
    pass


class TooShort(LcirspError):
    pass


class DegenerateRange(LcirspError):
    def __init__(self, channel=None):
        label = f" (channel {channel})" if channel is not None else ""
        super().__init__(f"min-max range is degenerate{label}: max == min")
        self.channel = channel


# --- labeling / features ---

class UnknownLane(LcirspError):
    def __init__(self, lane_id):
        super().__init__(f"lane_id {lane_id} not present in lane geometry")
        self.lane_id = lane_id


class EgoNotInSnapshot(LcirspError):
    pass


class InsufficientHorizon(LcirspError):
    pass


# --- nn core / models ---

class ShapeMismatch(LcirspError):
    pass


class GraphNotRecorded(LcirspError):
    pass


class ReceptiveFieldTooSmall(LcirspError):
    pass


class InvalidSpec(LcirspError):
    pass


class TaskMismatch(LcirspError):
    pass


# --- training / evaluation ---

class TooFewItems(LcirspError):
    pass


class EmptyMatrix(LcirspError):
    pass


class LengthMismatch(LcirspError):
    pass


class ConstantSeries(LcirspError):
    pass


class ZeroBaseline(LcirspError):
    pass


class InvalidConfig(LcirspError):
    pass
