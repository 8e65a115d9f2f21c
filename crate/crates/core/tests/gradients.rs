//! Analytic gradients against central finite differences.

mod common;

use common::grad::{self, Check};
use reconad::models::Variant;

const TRIALS: u64 = 100;

fn ok(c: Check) {
    if let Err(e) = c {
        panic!("{e}");
    }
}

#[test]
fn dense_layer() {
    ok(grad::dense(TRIALS));
}

#[test]
fn conv1d_layer() {
    ok(grad::conv1d(TRIALS));
}

#[test]
fn conv_transpose_layer() {
    ok(grad::conv_transpose(TRIALS));
}

#[test]
fn two_layer_selu_network() {
    ok(grad::two_layer_selu(TRIALS));
}

#[test]
fn recon_loss_through_dense() {
    ok(grad::recon_loss_dense(TRIALS));
}

#[test]
fn autoencoder_loss() {
    ok(grad::model(Variant::Ae, TRIALS));
}

#[test]
fn vae_loss_including_kl_and_reparameterization() {
    ok(grad::model(Variant::Vae, TRIALS));
}

#[test]
fn vae_cnn_loss() {
    ok(grad::model(Variant::VaeCnn, TRIALS));
}
