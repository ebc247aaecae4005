from .analysis import (distribution_fidelity, gst_error_scaling, predict_fidelity_perturbation,
                       sigma_mc)
from .basis import BasisOperation, BasisOperationSet, build_basis_set
from .gst import (EXACT, GstDataset, basis_hats, compute_hat, inverse_noise, run_gst)
from .montecarlo import (MitigatedDistribution, PecPlan, build_pec_plan, exact_distribution,
                         monte_carlo_run, plan_from_tomography, run_pec,
                         run_tomography)
from .quasiprob import QuasiprobDecomposition, decompose_quasiprob, decompose_state_measurement
