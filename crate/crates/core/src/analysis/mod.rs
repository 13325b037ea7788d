//! Density evolution and EXIT measurement.

pub mod de;
pub mod exit;
pub mod pdf;

pub use de::{
    check_update, check_update_merged, de_run, estimate_initial_pdfs, flipped_fractions, variable_update, DeConfig,
    DeResult, InitialPdfs,
};
pub use exit::{exit_trajectory, exit_transfer, mutual_information, ExitPoint, MiHistogram};
pub use pdf::{Grid, QuantizedPdf};
