//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;
use std::sync::Arc;

use tropwall::lattice::{int, rat, ChargeLattice, GaussianRational, Point, RelativeClass, SignConvention};
use tropwall::{Automorphism, ElementaryTransform, ScatteringDiagram, SeriesContext, SingularBase, SlabFunction};

pub fn pentagon_base() -> SingularBase {
    SingularBase::new(vec![(Point::from_ints(-1, 0), [1, 0]), (Point::from_ints(0, -1), [0, 1])], SignConvention::Plus).unwrap()
}

pub fn three_base() -> SingularBase {
    SingularBase::new(
        vec![(Point::from_ints(-1, 0), [1, 0]), (Point::from_ints(0, -1), [0, 1]), (Point::new(rat(-9, 20), rat(-2, 5)), [1, 2])],
        SignConvention::Plus,
    )
    .unwrap()
}

pub fn initial_diagram(b: &SingularBase, order: u32) -> ScatteringDiagram {
    b.diagram_at_phase(&GaussianRational::one(), ScatteringDiagram::order_cutoff(order)).unwrap()
}

/// Rank-2 context with both generator charges equal to 1.
pub fn context(order: u32) -> Arc<SeriesContext> {
    let lat = Arc::new(ChargeLattice::standard());
    Arc::new(SeriesContext::new(lat, vec![GaussianRational::one(), GaussianRational::one()], ScatteringDiagram::order_cutoff(order)).unwrap())
}

/// theta for slab 1 + z^v.
pub fn theta(ctx: &Arc<SeriesContext>, v: [i64; 2]) -> Automorphism {
    let s = SlabFunction::from_coefficients(ctx, RelativeClass::new(v), &BTreeMap::from([(1, int(1))])).unwrap();
    ElementaryTransform::new(s).to_automorphism().unwrap()
}
