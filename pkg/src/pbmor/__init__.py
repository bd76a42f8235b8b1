"""Interpolatory model reduction for parametric bilinear systems."""

from pbmor.basis import (InterpolationSpec, ReductionBasis, assemble_global, build_all_orderings, build_basis,
                         build_hessian_enrichment, build_V_sequential, build_W_sequential)
from pbmor.benchmarks import gen_advdiff, gen_rc
from pbmor.deim import DeimModel, deim_approximate, fit_deim, pod_basis, qdeim_select
from pbmor.errors import PBMORError
from pbmor.irka import irka_linear, irka_specs
from pbmor.projection import ReducedBilinearSystem, online_evaluate, reduce
from pbmor.simulation import InputSignal, relative_l2_error, simulate_bilinear, simulate_rc_nonlinear
from pbmor.system import AffineMatrix, BilinearSystem, CoefficientFunction
from pbmor.transfer import (eval_Hk_bitangential, eval_Hk_left, eval_Hk_right, freq_derivative, param_hessian,
                            param_jacobian)
from pbmor.verify import VerificationReport, sweep, verify

__version__ = '0.1.0'

__all__ = [
    'AffineMatrix', 'BilinearSystem', 'CoefficientFunction', 'DeimModel', 'InputSignal', 'InterpolationSpec',
    'PBMORError', 'ReducedBilinearSystem', 'ReductionBasis', 'VerificationReport', 'assemble_global',
    'build_V_sequential', 'build_W_sequential', 'build_all_orderings', 'build_basis', 'build_hessian_enrichment',
    'deim_approximate', 'eval_Hk_bitangential', 'eval_Hk_left', 'eval_Hk_right', 'fit_deim', 'freq_derivative',
    'gen_advdiff', 'gen_rc', 'irka_linear', 'irka_specs', 'online_evaluate', 'param_hessian', 'param_jacobian',
    'pod_basis', 'qdeim_select', 'reduce', 'relative_l2_error', 'simulate_bilinear', 'simulate_rc_nonlinear',
    'sweep', 'verify',
]
