//! Small numeric helpers shared across modules.

/// Tolerance under which two atom values are treated as the same point.
pub const MERGE_TOL: f64 = 1e-12;

/// Allowed deviation of a probability vector's total from one.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Tolerance used by threshold comparisons on probabilities (indicator
/// distortions and left quantiles), so that the two routes to the same
/// quantity agree on ties.
pub const PROB_TOL: f64 = 1e-12;

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sorted, tolerance-merged copy of `values`.
pub(crate) fn merged_breakpoints(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        match out.last() {
            Some(&last) if v - last <= MERGE_TOL => {}
            _ => out.push(v),
        }
    }
    out
}
