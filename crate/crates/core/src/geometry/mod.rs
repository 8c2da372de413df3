//! Directions, curves and their flat/curved decomposition.

pub mod curve;
pub mod direction;

pub use curve::{
    Curve, CurveSpec, FlatDecomposition, FlatPart, GraphPiece, Orientation, Piece, PieceSpec, Point, QuadNode,
};
pub use direction::{classify_direction, distance_to_lattice_direction, ClassifyOptions, Direction, DirectionClass};
