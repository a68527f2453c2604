pub mod exact;
pub mod linalg;
pub mod qspace;
pub mod specfun;
pub mod quad;
pub mod kernels;
pub mod lattice;
pub mod quat;
pub mod green;
