//! Fixtures shared by the criterion benchmarks.

use uqseg_core::synth::{generate_phantom, perturb_stack, PhantomSpec};
use uqseg_core::{BinaryMask, SampleStack};

/// A `size`×`size` ellipse phantom perturbed into `samples` predictions.
pub fn phantom_stack(size: usize, samples: usize, severity: f64) -> (BinaryMask, SampleStack) {
    let spec = PhantomSpec {
        height: size,
        width: size,
        cx: (size as f64 - 1.0) / 2.0,
        cy: (size as f64 - 1.0) / 2.0,
        semi_axis_x: size as f64 * 0.25,
        semi_axis_y: size as f64 * 0.18,
        boundary_softness: 1.0,
        severity,
        seed: 7,
    };
    let (gt, base) = generate_phantom(&spec).expect("phantom fits");
    let stack = perturb_stack(&base, samples, severity, spec.seed).expect("valid severity");
    (gt, stack)
}
