//! Build a model and run it stage by stage: encoders, fusion, heads.
//!
//! cargo run --example model_forward

use ndarray::Array2;
use universa::model::{ForwardCtx, ModelConfig, ModelInput, UniVersa};
use universa::train::placeholder_ref_features;

fn main() -> universa::Result<()> {
    let config = ModelConfig {
        d_model: 64,
        heads: 4,
        layers: 2,
        ffn_dim: 128,
        ..Default::default()
    };
    let model = UniVersa::new(config, 42)?;
    println!("{} parameter tensors, {} scalars", model.params().len(), model.params().num_scalars());

    let target = Array2::from_shape_fn((120, 80), |(t, m)| ((t * 7 + m * 3) % 11) as f64 * 0.1 - 12.0);
    let ref_audio = placeholder_ref_features();
    let ref_text = [2u32];

    let h = model.encode_target(target.view())?;
    let ra = model.encode_ref_audio(ref_audio.view())?;
    let rt = model.encode_ref_text(&ref_text)?;
    let fused = model.fuse(&h, Some(&ra), Some(&rt))?;
    println!("target states {}x{}, fused {}x{}", h.frames(), h.dim(), fused.frames(), fused.dim());

    let staged = model.predict_raw(&fused)?;
    let input = ModelInput {
        target: target.view(),
        ref_audio: Some(ref_audio.view()),
        ref_text: Some(&ref_text),
    };
    let (direct, _) = model.forward(&input, &mut ForwardCtx::eval())?;
    for ((metric, a), b) in model.metrics().iter().zip(&staged).zip(&direct) {
        println!("{metric:>8} {a:+.4} (forward {b:+.4})");
    }
    Ok(())
}
