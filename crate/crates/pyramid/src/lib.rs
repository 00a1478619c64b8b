pub mod calculus;
pub mod dofs;
pub mod interp;
pub mod linalg;
pub mod quadrature;
pub mod ratpoly;
pub mod reference;
pub mod spaces;
