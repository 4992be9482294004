//! Normalized Hecke eigenform coefficients: exact level-one construction,
//! file ingestion, Satake parameters.

pub mod eigen;
pub mod form;
pub mod ingest;
pub mod ntt;
pub mod qexp;
pub mod satake;

pub use eigen::{level1_combinations, level1_eigenforms, rational_eigenform_exact};
pub use form::{HeckeEigenform, Provider};
pub use ingest::{export_coefficients, ingest_coefficients, parse_coefficients};
pub use qexp::{eisenstein_qexp, eta24_oracle, QExpansion};
pub use satake::{satake, SatakePair};
