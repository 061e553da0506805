"""subsas: element-level acoustic simulation and 3-D synthetic aperture
imaging for a shallow-water sub-bottom sonar.

Pipeline: scene description -> point-scatterer field realization ->
per-ping time-series synthesis -> matched filtering -> time-domain
backprojection onto a voxel grid -> image post-processing, plus a
validation harness for the model's statistical-consistency properties.
"""

__version__ = "0.1.0"
