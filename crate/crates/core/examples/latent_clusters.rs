//! PCA of flattened states followed by mixture clustering of PC1/PC2.
//!
//! `cargo run --release --example latent_clusters`

use skycast::latent::{gmm_fit, pca_fit, pca_project, GmmConfig, StateMatrix};
use skycast::synthetic::two_blobs;

fn main() -> skycast::Result<()> {
    // lift two planar blobs into 200 dimensions with a fixed random-looking map
    let (pts, labels) = two_blobs(150, 6.0, 1);
    let d = 200;
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            (0..d)
                .map(|c| {
                    let (a, b) = ((c as f64 * 0.37).sin(), (c as f64 * 0.91).cos());
                    a * p[0] + b * p[1] + 0.01 * ((c * 7 + 3) % 11) as f64
                })
                .collect()
        })
        .collect();
    let x = StateMatrix::from_rows(&rows)?;
    let pca = pca_fit(&x, 4, false)?;
    println!(
        "explained variance: {}",
        pca.explained_variance_ratio.iter().map(|r| format!("{:.2}%", 100.0 * r)).collect::<Vec<_>>().join(" ")
    );
    let scores = pca_project(&pca, &x)?;
    let plane: Vec<[f64; 2]> = (0..scores.nrows()).map(|r| [scores[(r, 0)], scores[(r, 1)]]).collect();
    let gmm = gmm_fit(&plane, 2, 0, &GmmConfig::default())?;
    let pred = gmm.predict(&plane);
    let agree = pred.iter().zip(&labels).filter(|(p, l)| p == l).count();
    println!(
        "GMM: {} EM iterations, converged {}, weights {:.2?}, cluster agreement {}/{}",
        gmm.log_likelihood.len(),
        gmm.converged,
        gmm.weights,
        agree.max(pred.len() - agree),
        pred.len()
    );
    Ok(())
}
