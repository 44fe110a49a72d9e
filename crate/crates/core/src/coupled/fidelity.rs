use num_complex::Complex64;

use crate::detector::{init_gaussian, KickedRotor};
use crate::qstate::{inner, SimParams};
use crate::Result;

/// `f(t) = ⟨ψ|(U_+^†)^t U_-^t|ψ⟩` for `t = 0, …, t_max`, where `U_±` is the
/// rotator period with kick strength `K ± ε_c` and `|ψ⟩` the packet at
/// `detector_init`.
pub fn fidelity_series(params: &SimParams, detector_init: (f64, f64), t_max: usize) -> Result<Vec<Complex64>> {
    let packet = init_gaussian(detector_init.0, detector_init.1, params)?.into_amplitudes();
    let mut plus = packet.clone();
    let mut minus = packet;
    let mut rotor_plus = KickedRotor::new(params, params.k_up());
    let mut rotor_minus = KickedRotor::new(params, params.k_down());
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(inner(&plus, &minus));
    for _ in 0..t_max {
        rotor_plus.step(&mut plus);
        rotor_minus.step(&mut minus);
        out.push(inner(&plus, &minus));
    }
    Ok(out)
}

pub fn fidelity_amplitude(params: &SimParams, detector_init: (f64, f64), t: usize) -> Result<Complex64> {
    Ok(*fidelity_series(params, detector_init, t)?.last().expect("series holds t = 0"))
}
