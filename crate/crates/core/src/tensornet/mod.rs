//! Small hand-written network library: layers with explicit backward
//! passes, the three-block CNN, training, Grad-CAM, LRP, gradient checking
//! and checkpoints.

pub mod checkpoint;
pub mod features;
pub mod gradcam;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lrp;
pub mod model;
pub mod train;

pub use checkpoint::Checkpoint;
pub use features::{FeatureNorm, FeatureSet};
pub use gradcam::{cam_from_parts, grad_cam, grad_cam_all, grad_cam_from_trace, upsample_bilinear};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, GRAD_CHECK_SAMPLES, GRAD_CHECK_STEP};
pub use layers::{Conv1d, Conv2d, Dense, DenseNet, DenseNetTrace, Parameterized};
pub use loss::{argmax, bce_with_logits, cross_entropy, sigmoid, softmax};
pub use lrp::{lrp_attribute, lrp_attribute_eps, LRP_EPSILON};
pub use model::{CnnArch, CnnModel, CnnTrace, EMBEDDING_DIM};
pub use train::{accuracy, fit_classifier, labels_for, train_classifier, Adam, EpochStats, Hyper, Sgd, Target};
