"""Full counting statistics of an ESR-driven quantum-dot spin pump."""

from .params import (CHANNELS, CHANNEL_INDEX, L_DOWN, L_UP, LEAD_CHANNELS,
                     LEADS, R_DOWN, R_UP, DegenerateRatesError, RateParams,
                     as_chi, chi_from_s, zero_chi)
from .generator import (Basis, GeneratorMatrix, NoStationaryStateError,
                        SingularCoherenceBlockError, build_coherent,
                        build_incoherent, eliminate_coherences,
                        generator_builder, rabi_flip_rate, stationary_state)
from .spectral import (BranchCrossingError, CgfValue, CharPoly, cardano_roots,
                       char_poly, closed_form_incoherent_ev0,
                       cubic_coefficients_equal_coupling, dominant_eigenvalue,
                       legacy_min_eigenvalue)
from .cumulants import (REGIMES, CumulantSet, DegenerateBranchError,
                        FiniteDifferenceEngine, ImplicitEngine,
                        MethodsDisagreeError, cumulant, full_cumulant_set,
                        independent_multi_indices, methods_agree,
                        spin_sign_combination)
from .sweep import (ConfigError, OracleSpec, SweepResult, SweepRow, SweepSpec,
                    WrongGridError, default_figure_spec, emit_csv,
                    emit_figure_data, parse_config, run_sweep)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
