//! Local maximum-entropy (LME) meshfree approximation.
//!
//! The core is generic over the scalar type through [`scalar::Real`];
//! the aliases below fix it to `f64` or `f32`.

pub mod cli;
pub mod diagnostics;
pub mod geometry;
pub mod interpolation;
pub mod io;
pub mod linalg;
pub mod maxent;
pub mod scalar;

pub type PointSetF64 = geometry::PointSet<f64>;
pub type PointSetF32 = geometry::PointSet<f32>;
pub type PointF64 = geometry::Point<f64>;
pub type PointF32 = geometry::Point<f32>;
pub type DomainF64 = geometry::Domain<f64>;
pub type DomainF32 = geometry::Domain<f32>;
pub type LmeParamsF64 = maxent::LmeParams<f64>;
pub type LmeParamsF32 = maxent::LmeParams<f32>;
pub type ShapeEvalF64 = maxent::ShapeEval<f64>;
pub type ShapeEvalF32 = maxent::ShapeEval<f32>;
pub type ScalarFieldF64 = interpolation::ScalarField<f64>;
pub type ScalarFieldF32 = interpolation::ScalarField<f32>;
