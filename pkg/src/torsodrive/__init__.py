"""Torso-posture drive interface: sensing, mapping, coupling dynamics,
vehicle simulation, closed-loop harness and live telemetry service."""

from .calibration import (CalibrationProfile, PostureDwell, calibrate_neutral,
                          calibrate_postures, calibrate_recording, eval_f1,
                          fit_f1, midpoint_boundaries)
from .coupling import (CouplingParams, CouplingState, CouplingTrace,
                       ForceProfile, SupportGeometry, average_angular_accel,
                       contact_force, controllers, derivatives, energy,
                       min_stiffness, min_stiffness_bisection, simulate, step,
                       support_force_curve, support_kinematics)
from .errors import (AbortRun, CalibrationError, ConfigurationError,
                     InputError, InsufficientDataError, PendulumFell)
from .estimators import PostureCalibrator, TorsoVelocityMapper
from .harness import (DriverParams, Intent, NoiseParams, ScenarioConfig,
                      SyntheticUser, run_closed_loop, stiffness_study,
                      synthesize_frame, velocity_space_sweep, virtual_driver)
from .mapping import (BendRegion, Gate, MappingParams, PipelineSession,
                      VelocityCommand, command, forward_max_angle, magnitude,
                      pipeline_tick, smooth, weights)
from .sensing import (CircuitParams, PostureCategory, SensorFrame,
                      SensorLayout, classify_posture, compute_cop,
                      load_frames_jsonl, save_frames_jsonl, to_conductance)
from .vehicle import (PathMatcher, PathSpec, Pose, RunTrace, avg_accel,
                      build_figure8, completion_time, cross_error,
                      integrate_unicycle, wrap_angle)

__version__ = "0.1.0"
