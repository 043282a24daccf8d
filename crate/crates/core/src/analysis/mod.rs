//! Statistics and classification over questionnaire and EEG features.

pub mod classify;
pub mod pca;
pub mod report;
pub mod stats;

pub use classify::{
    f1_score, knn_predict, loocv_f1, loocv_predictions, Average, ClassifierSpec, CvConfig, Label, LabeledTrial,
    LinearSvm, SvmConfig,
};
pub use pca::PcaModel;
pub use stats::{
    chi2_sf, fisher_combination, pearson_matrix, spearman, spearman_fisher, t_sf, two_sample_t, CorrelationRow,
    FisherCombination, PearsonMatrix, TTest,
};
