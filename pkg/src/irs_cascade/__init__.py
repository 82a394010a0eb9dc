"""Cascaded channel estimation for IRS-assisted hybrid receivers with low-resolution ADCs."""
from .geometry import UpaDims, build_transform, steering_vector
from .quantizer import QuantizerSpec, lloyd_max, quantize
from .channel import ChannelModel, ChannelRealization
from .acquisition import MeasurementBlock, SparsityPattern, simulate_observation
from .estimators import EstimatorParams, proposed_digital_estimator, nmse
from .harness import SystemConfig, run_trial, sweep_antennas, sweep_snr, sweep_sparsity

__version__ = "0.1.0"
