//! Classic geometric clustering baselines and the two-cluster comparison
//! between DIB, GMM and k-means decision boundaries.

pub mod analytic;
pub mod boundary;
pub mod gmm;
pub mod kmeans;

pub use analytic::{
    bisect_root, dib_point_score, gaussian_kl_from_isotropic, gmm_hard_score, weight_rescaling_check, TwoClusterSetup,
};
pub use boundary::{
    decision_boundary, hausdorff_distance, write_polylines_csv, DibClassifier, Polyline, Region,
};
pub use gmm::{gmm_em, GmmResult};
pub use kmeans::{kmeans, KMeansResult};
