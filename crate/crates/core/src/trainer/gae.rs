use crate::scalar::Scalar;

/// Generalized advantage estimates and value targets for one segment.
///
/// `bootstrap` is `V(s_T)` after the last step; it is ignored when the
/// segment ends in a terminal state. Advantages are returned unnormalized.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    bootstrap: T,
    terminal: bool,
    gamma: f64,
    lambda: f64,
) -> (Vec<T>, Vec<T>) {
    assert_eq!(rewards.len(), values.len(), "one value per reward");
    let (g, l) = (T::lit(gamma), T::lit(lambda));
    let n = rewards.len();
    let mut adv = vec![T::zero(); n];
    let mut next_value = if terminal { T::zero() } else { bootstrap };
    let mut running = T::zero();
    for t in (0..n).rev() {
        let delta = rewards[t] + g * next_value - values[t];
        running = delta + g * l * running;
        adv[t] = running;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, returns)
}

/// Mean 0, standard deviation 1 (population std, guarded by `1e-8`).
pub fn normalize<T: Scalar>(xs: &mut [T]) {
    if xs.is_empty() {
        return;
    }
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt() + T::lit(1e-8);
    xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
}
