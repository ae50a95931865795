"""Dual-domain MRI augmentation and sparse branch-grid reconstruction."""

from .augment import (AugPolicy, Elastic, FlipH, FlipV, MotionSpec, NoiseSpec,
                      Rot90, RotArbitrary, Scale, ShiftInt, add_thermal_noise,
                      apply_geo, apply_motion, augment_sample,
                      regenerate_kspace, sample_augmentation)
from .balance import (SampleRecord, draws_from_weights, read_manifest,
                      update_weights)
from .experiment import ExperimentConfig, derive_seed, run_experiment
from .masks import MaskFamily, SamplingMask, make_mask
from .metrics import MetricReport, evaluate, nmse, psnr, ssim
from .mri import (AcquisitionModel, adjoint, fft2c, forward, ifft2c,
                  make_coil_maps, make_phantom, sense_combine)
from .recon import (BranchGrid, CascadeRecord, GaussianSmooth, ReconTrace,
                    SoftThreshold, apply_expert, dc_step,
                    initial_word_frequency, reconstruct, run_cascade)
from .routing import BranchNav, spherical_kmeans
from .vq import (VqCodebook, VqLossReport, extract_features, prompt_fuse,
                 vq_loss, word_frequency)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionModel", "AugPolicy", "BranchGrid", "BranchNav",
    "CascadeRecord", "Elastic", "ExperimentConfig", "FlipH", "FlipV",
    "GaussianSmooth", "MaskFamily", "MetricReport", "MotionSpec",
    "NoiseSpec", "ReconTrace", "Rot90", "RotArbitrary", "SampleRecord",
    "SamplingMask", "Scale", "ShiftInt", "SoftThreshold", "VqCodebook",
    "VqLossReport", "add_thermal_noise", "adjoint", "apply_expert",
    "apply_geo", "apply_motion", "augment_sample", "dc_step", "derive_seed",
    "draws_from_weights", "evaluate", "extract_features", "fft2c", "forward",
    "ifft2c", "initial_word_frequency", "make_coil_maps", "make_mask",
    "make_phantom", "nmse", "prompt_fuse", "psnr", "read_manifest",
    "reconstruct", "regenerate_kspace", "run_cascade", "run_experiment",
    "sample_augmentation", "sense_combine", "spherical_kmeans", "ssim",
    "update_weights", "vq_loss", "word_frequency",
]
