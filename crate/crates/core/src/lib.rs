//! Exact tropical disc counts, scattering diagrams and Kontsevich-Soibelman wall-crossing
//! on affine surfaces with focus-focus singularities.

pub mod lattice;
pub mod series;
pub mod wallcross;
pub mod scattering;
pub mod tropical;
pub mod dt;
pub mod refined;
pub mod format;
pub mod svg;
pub mod pipeline;

pub use lattice::{
    int, phase_compare, rat, sublevel_classes, CentralCharge, ChargeLattice, GaussianRational, LatticeError, PhaseOrdering, Point, Rat,
    RelativeClass, Sector, SignConvention,
};
pub use series::{counts_from_slab, slab_from_counts, Coefficient, SeriesContext, SeriesError, SlabFunction, TruncatedSeries};
pub use wallcross::{
    check_symplectic, factorize, factorize_with_keys, jump, Automorphism, ElementaryTransform, Factor, OrderedProduct, WallCrossError,
};
pub use scattering::{aut_weight, LoopProbe, ScatteringDiagram, ScatteringError, Wall, WallKind};
pub use tropical::{disc_weight, enumerate_discs, omega_trop, sector_product, vertex_multiplicity, SingularBase, Singularity, TropicalDisc, TropicalError};
pub use dt::{integrality_report, multiple_cover, refine, slab_to_dt, DtError, IntegralityReport, InvariantRow, InvariantTable};
pub use refined::{q_dilog, q_int, q_mul, refined_omega, refined_weight, QFraction, QLaurent, RefinedAutomorphism, RefinedError, RefinedTransform};
pub use format::{write_diagram, DiagramFile, FormatError, ParseError};
pub use pipeline::{Command, PipelineError, Report, RunConfig};
