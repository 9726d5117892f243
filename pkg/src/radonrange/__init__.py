"""Radon transforms on affine and projective p-planes, with range verifiers.

The affine transform uses the delta-kernel normalization
``psi(sigma, tau) = int phi(t) prod_i delta(<t, tau_i> + sigma_i) dt``.
"""
from .errors import (EvalFailure, FormatError, IndexOutOfRange, InsufficientDecay,
                     NotHyperplane, NotOrthonormal, OnIncidence, QuadratureOverflow,
                     RadonError, RankDeficient, SingularAction, UnderdeterminedFit,
                     UnsupportedDimension)
from .geometry import (Dimensions, FrameSet, GrassmannPoint, PlaneChart, PlaneFrame,
                       StiefelPoint, canonical_frame, equiangular_frames, fibonacci_frames,
                       gl_act, kernel_basis, linear_part, sample_frames, sample_stiefel_points,
                       stiefel_pack, stiefel_unpack)
from .inversion import (InversionConfig, ReconGrid, direction_weights, fbp_reconstruct,
                        fourier_slice, relative_l2, roundtrip_error, slice_frequencies)
from .io import read_grid, read_sinogram, write_grid, write_grid_csv, write_sinogram, write_sinogram_csv
from .moments import (CavalieriReport, MomentTable, cavalieri_fit, cavalieri_report,
                      moment_table)
from .phantoms import (GaussianMixture, GaussianTerm, analytic_radon, eval_phantom,
                       fourier_transform, load_phantom, moment_oracle, random_mixture,
                       save_phantom, unit_gaussian)
from .projective import (ComplexFrame, HomogeneousField, extend_homogeneous, kernel_john_check,
                         kernel_scalar, leray_coefficient, projective_john_residual,
                         projective_radon)
from .rangecheck import (JohnResidual, ResidualReport, StiefelFunction, characteristic_test,
                         john_residual, john_residual_field, phantom_stiefel_function,
                         symbol_minor)
from .transform import (QuadratureSpec, SigmaGrid, Sinogram, radon_point, radon_sinogram,
                        sinogram_decay_report)

__version__ = "0.1.0"
