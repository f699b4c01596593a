pub mod homology;
pub mod invcalc;
pub mod linalg;
pub mod moduli;
pub mod momentmap;
pub mod qla;
pub mod rational;
pub mod reduction;
pub mod runner;
pub mod surface;
