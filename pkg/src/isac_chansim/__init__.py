"""ISAC radio channel simulator.

Radar cross section of segmented objects, six-mode sensing scenarios with
LOS/NLOS states and specular environment planes, micro-Doppler fine-motion
models, concatenated target channels over OFDM numerology, and a
delay-Doppler sensing pipeline with zero-Doppler clutter suppression.
"""

from .channel import (
    BackgroundConfig,
    ChannelRealization,
    Cluster,
    LinkBudget,
    NO_ECHO_DB,
    build_realization,
    concatenate_target_link,
    freq_response,
    generate_background,
    sensing_pathloss,
)
from .microdoppler import (
    MicroMotionProfile,
    NoMotion,
    PendulumArm,
    PhaseSeries,
    Rotor,
    SawtoothDoppler,
    SinusoidDoppler,
    Spectrogram,
    VitalSign,
    arm_swing_iq,
    arm_swing_states,
    micro_phase_series,
    radial_velocity,
    spectrogram,
)
from .rcs import (
    AspectAngles,
    CircularPlate,
    Cylinder,
    PrimitiveShape,
    RcsDecomposition,
    RectangularPlate,
    Segment,
    SegmentedObject,
    Sphere,
    decompose_slow_fast,
    far_field_distance,
    object_rcs,
    plane_wave_valid,
    primitive_rcs,
    segment_object,
)
from .scenario import (
    EoType1,
    EoType2,
    LosModel,
    LosState,
    Node,
    NodeKind,
    Scenario,
    SensingMode,
    SpecularPath,
    Target,
    load_scenario_file,
    los_state,
    specular_paths,
    validate,
)
from .sensing import (
    DelayDopplerMap,
    Detection,
    OfdmConfig,
    delay_doppler,
    detect_peaks,
    estimate_csi,
    make_pilot,
    notch_zero_doppler,
    simulate_echo,
    to_range_velocity,
)

__version__ = "0.1.0"
