"""Vision-guided prosthetic grasping.

Gesture functions map hand-object distance to six joint angles; a
trajectory regression estimates which object the user is reaching for;
a staged controller drives the hand and tightens the grip on contact.
"""
from .controller import ControllerConfig, HandState, Stage, controller_step, simulate_hand
from .errors import ComputationError, GraspError, InputError
from .geometry import BoundingBox2D, CameraIntrinsics, SizeParams, reconstruct_object
from .gesture import (
    GestureFunction,
    GestureLibrary,
    GestureLibraryEntry,
    degree_of_completion,
    eval_gesture,
    fit_gesture_function,
    library_lookup,
    load_library,
    save_library,
)
from .hand import extract_angle_vector, fit_palm_plane
from .intent import (
    estimate_target,
    estimate_target_sphere_baseline,
    fit_trajectory_line,
    separation_plane,
)
from .metrics import anthropomorphism, grasp_success_rate, intent_accuracy
from .registration import register_clouds, validate_gesture_entry

__version__ = "0.1.0"
