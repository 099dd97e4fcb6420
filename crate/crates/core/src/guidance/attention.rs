use ndarray::{Array2, Axis};

use super::{GuidanceError, Real};

/// Linear projections for one attention head.
/// `l_q`: d_model × d, `l_k`: d_text × d, `l_v`: d_text × d_v.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionProj<T: Real = f32> {
    pub l_q: Array2<T>,
    pub l_k: Array2<T>,
    pub l_v: Array2<T>,
}

/// Row-wise softmax of QKᵀ/√d (max-subtracted). Shape L_q × L_k.
pub fn attention_weights<T: Real>(
    spatial: &Array2<T>,
    prompt: &Array2<T>,
    proj: &AttentionProj<T>,
    d: usize,
) -> Result<Array2<T>, GuidanceError> {
    check_dims(spatial, prompt, proj, d)?;
    let q = spatial.dot(&proj.l_q);
    let k = prompt.dot(&proj.l_k);
    let scale = T::from_usize(d).unwrap().sqrt();
    let mut scores = q.dot(&k.t()) / scale;
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.iter().copied().fold(T::zero(), |a, b| a + b);
        row.mapv_inplace(|v| v / sum);
    }
    Ok(scores)
}

/// Softmax(QKᵀ/√d)·V with Q = spatial·l_q, K = prompt·l_k, V = prompt·l_v.
pub fn cross_attention<T: Real>(
    spatial: &Array2<T>,
    prompt: &Array2<T>,
    proj: &AttentionProj<T>,
    d: usize,
) -> Result<Array2<T>, GuidanceError> {
    let weights = attention_weights(spatial, prompt, proj, d)?;
    Ok(weights.dot(&prompt.dot(&proj.l_v)))
}

fn check_dims<T: Real>(spatial: &Array2<T>, prompt: &Array2<T>, proj: &AttentionProj<T>, d: usize) -> Result<(), GuidanceError> {
    let mismatch = |what: String| Err(GuidanceError::DimensionMismatch(what));
    if d == 0 {
        return mismatch("head dim must be positive".into());
    }
    if spatial.nrows() == 0 || prompt.nrows() == 0 {
        return mismatch("empty query or key sequence".into());
    }
    if proj.l_q.dim() != (spatial.ncols(), d) {
        return mismatch(format!("l_q is {:?}, expected ({}, {d})", proj.l_q.dim(), spatial.ncols()));
    }
    if proj.l_k.dim() != (prompt.ncols(), d) {
        return mismatch(format!("l_k is {:?}, expected ({}, {d})", proj.l_k.dim(), prompt.ncols()));
    }
    if proj.l_v.nrows() != prompt.ncols() || proj.l_v.ncols() == 0 {
        return mismatch(format!("l_v is {:?}, expected {} rows", proj.l_v.dim(), prompt.ncols()));
    }
    Ok(())
}
