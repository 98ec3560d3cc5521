#![allow(dead_code)]

use std::collections::BTreeMap;

use tropwall::lattice::{int, rat, Point, RelativeClass, SignConvention};
use tropwall::{ScatteringDiagram, SingularBase, Wall};

pub fn pentagon() -> SingularBase {
    SingularBase::new(vec![(Point::from_ints(-1, 0), [1, 0]), (Point::from_ints(0, -1), [0, 1])], SignConvention::Plus).unwrap()
}

/// Two singularities on each axis.
pub fn doubled() -> SingularBase {
    SingularBase::new(
        vec![
            (Point::from_ints(-1, 0), [1, 0]),
            (Point::from_ints(-2, 0), [1, 0]),
            (Point::from_ints(0, -1), [0, 1]),
            (Point::from_ints(0, -2), [0, 1]),
        ],
        SignConvention::Plus,
    )
    .unwrap()
}

pub fn three() -> SingularBase {
    SingularBase::new(
        vec![(Point::from_ints(-1, 0), [1, 0]), (Point::from_ints(0, -1), [0, 1]), (Point::new(rat(-9, 20), rat(-2, 5)), [1, 2])],
        SignConvention::Plus,
    )
    .unwrap()
}

pub fn focus_focus() -> SingularBase {
    SingularBase::new(vec![(Point::origin(), [1, 0])], SignConvention::Plus).unwrap()
}

/// Initial rays of a base at phase 1.
pub fn initial(b: &SingularBase, order: u32) -> ScatteringDiagram {
    b.diagram_at_phase(&tropwall::GaussianRational::one(), ScatteringDiagram::order_cutoff(order)).unwrap()
}

/// Pentagon rays carrying (1 + z)^2.
pub fn squared(order: u32) -> ScatteringDiagram {
    let d = initial(&pentagon(), order);
    let sq = BTreeMap::from([(1, int(2)), (2, int(1))]);
    let w: Vec<Wall> = d.walls().iter().map(|w| Wall { slab: sq.clone(), ..w.clone() }).collect();
    d.with_walls(w).unwrap()
}

/// The scattering corpus: (name, initial diagram).
pub fn scattering_corpus(order: u32) -> Vec<(&'static str, ScatteringDiagram)> {
    vec![("pentagon", initial(&pentagon(), order)), ("squared", squared(order)), ("three", initial(&three(), order))]
}

/// The disc-counting corpus with generic stop points.
pub fn base_corpus() -> Vec<(&'static str, SingularBase, Vec<Point>)> {
    vec![
        ("pentagon", pentagon(), vec![Point::from_ints(1, 1), Point::new(rat(3, 2), rat(1, 3)), Point::new(rat(-1, 2), rat(2, 1))]),
        ("doubled", doubled(), vec![Point::new(rat(1, 3), rat(1, 2)), Point::new(rat(-3, 2), rat(5, 7))]),
        ("three", three(), vec![Point::new(rat(1, 2), rat(1, 3)), Point::new(rat(-1, 5), rat(3, 4))]),
    ]
}

pub fn class(v: &[i64]) -> RelativeClass {
    RelativeClass::new(v.iter().copied())
}
