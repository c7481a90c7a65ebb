"""Turbine shell clearance control: thermal plant, deflection, relay control and fault campaigns."""
from .campaign import (
    Baseline,
    CampaignContext,
    CampaignResult,
    FaultSpec,
    Table1Report,
    VariabilitySample,
    compute_baseline,
    enumerate_failures,
    estimate_pdf,
    run_campaign,
    run_scenario,
    run_table1_suite,
)
from .config import ScenarioConfig, load_config
from .control import ControllerConfig, ControllerState, controller_step, outer_loop, relay_update
from .deflection import BeamSpec, DeflectionProfile, solve_beam, zone_to_element_dT
from .errors import ShellClearError
from .simulation import SimulationSettings, run_batch, run_single
from .thermal import PlantParams, PlantState, ProfileSpec, initial_hot_shutdown_state, step

__version__ = "0.1.0"
