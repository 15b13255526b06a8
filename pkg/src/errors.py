# -*- coding: utf-8 -*-
"""
Typed errors raised across the toolkit
Validation problems subclass ValueError, runtime failures subclass RuntimeError,
so that the command line can map them to distinct exit codes
"""


class MeshError(ValueError):
    """ Invalid mesh file or mesh content, with line/element context """
    def __init__(self, message: str, line: int = None, element: int = None):
        self.base_message = message
        context = []
        if line is not None:
            context.append(f"line {line}")
        if element is not None:
            context.append(f"triangle {element}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.line = line
        self.element = element


class ShapeError(ValueError):
    """ Tensor shapes do not agree """


class ConfigError(ValueError):
    """ Run configuration does not validate """


class GeometryMismatchError(ValueError):
    """ Checkpoint trained on another geometry than the one requested """


class TopologyError(RuntimeError):
    """ Coarsening stopped before the target vertex count """
    def __init__(self, message: str, achieved: int):
        super().__init__(f"{message} (achieved {achieved} vertices)")
        self.achieved = achieved


class SimulationError(RuntimeError):
    """ Excitation simulation became unstable """
    def __init__(self, message: str, params: dict = None):
        if params:
            message = f"{message} with params {params}"
        super().__init__(message)
        self.params = params


class TrainingDivergenceError(RuntimeError):
    """ Non-finite loss or gradient during optimisation """


class DatasetError(ValueError):
    """ Dataset files disagree with their manifest """


class GradientCheckError(RuntimeError):
    """ Backward pass disagrees with finite differences """
