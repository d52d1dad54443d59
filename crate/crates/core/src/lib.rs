//! Fractal covering counts, parabolic box-counting dimension estimates and
//! quadrature of boundary scaled functionals for regularity screening of
//! velocity/pressure fields on the half-cylinder `Q+ = B+ x (-1, 0)`.

pub mod boxcount;
pub mod criteria;
pub mod error;
pub mod fields;
pub mod fractal_sets;
pub mod functionals;
pub mod geometry;

pub use boxcount::{CoverCurve, CoverSample, DimensionEstimate, Metric, PointCloud};
pub use criteria::{BoundaryGrid, ConstantsConfig, RegularityVerdict, ScreeningReport, Verdict};
pub use error::{Error, Result};
pub use fields::{FieldSample, FieldSource, GridSpec, GriddedField};
pub use fractal_sets::{CantorSpec, HarmonicTailSpec, Interval, ProductSetSpec};
pub use functionals::{FunctionalValues, MeanMode, QuadratureConfig};
pub use geometry::{HalfBall, ParabolicCylinder, SpaceTimePoint};
