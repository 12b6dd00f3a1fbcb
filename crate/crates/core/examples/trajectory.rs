//! Minimal end-to-end use: one guided trajectory, decoded and printed.

use latsearch_core::diffusion::{Decoder, DiffusionModel, EvalCounter, SamplerMethod};
use latsearch_core::mixture::{Condition, MixtureTarget};
use latsearch_core::schedule::{make_schedule, ScheduleKind};
use latsearch_core::tensor::Latent;

fn main() {
    let target = MixtureTarget::axes_preset(4, 4, 4, 2.0, 0.15, 0.25).unwrap();
    let model = DiffusionModel::new(make_schedule(32, ScheduleKind::Linear).unwrap(), target);
    let mut rng = latsearch_core::rng::stream(42, "example", &[]);
    let noise = Latent::standard_normal(4, 4, &mut rng);
    let (z0, _trace, eps_evals) = model
        .sample_trajectory(&noise, Condition::Prompt(0), 5.0, SamplerMethod::Heun2, &[])
        .unwrap();
    assert_eq!(eps_evals, 32 * 2 * 2); // 32 steps x 2 drift evals x 2 CFG branches
    let video = Decoder::identity(4).decode(&z0, &EvalCounter::new()).unwrap();
    for f in 0..video.frames() {
        println!("frame {f}: {:?}", video.frame(f));
    }
}
