//! Existence check on the mask, evaluation metrics and cross-validation.

mod coercivity;
mod cv;
mod image;
mod metrics;

pub use coercivity::{coercivity_check, CoercivityVerdict};
pub use cv::{cv_select_alpha, mask_partition, CvCell, CvConfig, CvConvention, CvPlan, CvResult, SolverKind};
pub use image::{psnr, psnr_masked, ssim, ssim_masked, SsimParams};
pub use metrics::{nmse, sim_score, sim_score_matrix};
