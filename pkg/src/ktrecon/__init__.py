"""ktrecon: dynamic multi-coil MRI reconstruction in complementary domains.

A desk-scale toolkit covering the full loop: synthetic cine phantoms,
coil-map synthesis, k-t undersampling (lattice and Riesz-greedy
variable-density masks), the alternating x-f / x-t reconstruction with
closed-form data consistency and weighted merging, trainable
convolutional-recurrent regularizers with hand-rolled gradients, and
quantitative evaluation (NMSE / PSNR / SSIM / HFEN over dynamic crops).
"""

from .coils import CoilMaps, combine, normalize, project, synth_maps
from .metrics import EvalReport, crop_dynamic, evaluate, hfen, nmse, psnr, ssim
from .phantom import Ellipse, PhantomSpec, acquire, default_spec, generate
from .regularizers import ProxSpec, prox_soft, xf_regularize, xt_regularize
from .sampling import (SamplingMask, apply_mask, mask_lattice, mask_vista_like,
                       temporal_average)
from .solver import (ObjectiveWeights, SolverConfig, SolverState,
                     classical_recipe, dc_step, merge_step, penalty_objective,
                     solve, xf_step, xt_step, zero_filled)
from .tensors import (DOMAIN_IMAGE, DOMAIN_KSPACE, DOMAIN_XF, DynTensor,
                      RealTensor, add, mul, norm, scale, sub, zeros_like)
from .transforms import (FftPlan, centered, fft_spatial, fft_temporal,
                         ifft_spatial, ifft_temporal)

__version__ = "0.1.0"
