pub mod cache;
pub mod error;
pub mod fixedpoint;
pub mod grid;
pub mod model;
pub mod noswitch;
pub mod oracle;
pub mod quadrature;
pub mod yor;
